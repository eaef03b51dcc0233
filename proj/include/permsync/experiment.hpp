#pragma once

// Monte Carlo trials and parameter sweeps.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "permsync/cluster.hpp"
#include "permsync/error.hpp"
#include "permsync/format.hpp"
#include "permsync/model.hpp"
#include "permsync/permutation.hpp"
#include "permsync/rng.hpp"
#include "permsync/spectrum.hpp"
#include "permsync/sync.hpp"

namespace permsync {

struct TrialOptions {
  std::vector<Method> methods{Method::vanilla, Method::anchored};
  bool collect_diagnostics = false;
  /// Wall-clock stage times are recorded only on request so that result
  /// files stay reproducible byte for byte.
  bool record_timings = false;
  EigOptions eig;         // seed is overridden per trial
  ClusterConfig cluster;  // seed is overridden per trial
};

struct StageTimes {
  double eig_ms = 0.0;
  double cluster_ms = 0.0;
  double round_ms = 0.0;
};

struct TrialResult {
  double sigma = 0.0;
  std::size_t sigma_index = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::optional<double> loss_vanilla;
  std::optional<double> loss_anchored;
  std::optional<Diagnostics> diagnostics;
  std::size_t eig_iters = 0;
  double clustering_objective = 0.0;
  std::optional<StageTimes> times;

  std::optional<double> loss(Method m) const { return m == Method::vanilla ? loss_vanilla : loss_anchored; }
};

/// generate -> eigenspace -> (anchor) -> estimates -> losses (+ diagnostics).
/// Deterministic in params.seed.
inline TrialResult run_trial(const ModelParams& params, const TrialOptions& opts = {}) {
  using clock = std::chrono::steady_clock;
  auto ms_since = [](clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };

  TrialResult out;
  out.sigma = params.sigma;
  out.seed = params.seed;
  StageTimes times;

  const Instance inst = generate(params);
  EigOptions eig = opts.eig;
  eig.seed = derive_seed(params.seed, 0, 0, StreamRole::eigen_start);
  ClusterConfig ccfg = opts.cluster;
  ccfg.seed = derive_seed(params.seed, 0, 0, StreamRole::cluster);

  auto t0 = clock::now();
  Eigenspace es;
  try {
    es = top_eigenpairs(inst, params.d, eig);
  } catch (const ConvergenceError& e) {
    out.failed = true;
    out.failure = e.what();
    return out;
  }
  times.eig_ms = ms_since(t0);
  out.eig_iters = es.iterations;

  const bool want_vanilla = std::find(opts.methods.begin(), opts.methods.end(), Method::vanilla) != opts.methods.end();
  const bool want_anchored =
      std::find(opts.methods.begin(), opts.methods.end(), Method::anchored) != opts.methods.end();

  std::optional<Anchor> anchor;
  if (want_anchored) {
    t0 = clock::now();
    anchor = build_anchor(es, ccfg);
    times.cluster_ms = ms_since(t0);
    out.clustering_objective = anchor->clustering_objective;
  }

  t0 = clock::now();
  if (want_vanilla) out.loss_vanilla = hamming_loss(vanilla_estimate(es).perms, inst.truth());
  if (want_anchored) out.loss_anchored = hamming_loss(anchored_estimate(es, *anchor).perms, inst.truth());
  times.round_ms = ms_since(t0);

  if (opts.collect_diagnostics) out.diagnostics = compute_diagnostics(es, inst.truth(), anchor ? &*anchor : nullptr);
  if (opts.record_timings) out.times = times;
  return out;
}

struct SweepSpec {
  ModelParams base;
  std::vector<double> sigma_grid;
  std::size_t trials = 100;
  TrialOptions trial;
  std::size_t parallelism = 1;
  std::uint64_t master_seed = 0;

  void validate() const {
    base.validate();
    detail::require(trials >= 1, "trials must be at least 1");
    detail::require(!sigma_grid.empty(), "sigma grid must not be empty");
    for (double s : sigma_grid) detail::require(std::isfinite(s) && s >= 0.0, "sigma values must be non-negative");
    detail::require(!trial.methods.empty(), "at least one method is required");
    detail::require(parallelism >= 1, "parallelism must be at least 1");
  }
};

/// Seed of trial t at grid point i.
inline std::uint64_t trial_seed(std::uint64_t master, std::size_t sigma_index, std::size_t trial) {
  return derive_seed(master, static_cast<std::uint32_t>(sigma_index), static_cast<std::uint32_t>(trial));
}

struct LossStats {
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double std = 0.0;  // sample standard deviation (0 for a single value)
  double fence_lo = 0.0;  // q1 - 1.5 IQR
  double fence_hi = 0.0;  // q3 + 1.5 IQR

  double iqr() const { return q3 - q1; }
};

/// Linear interpolation between closest ranks (R type 7) on sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  detail::require(!sorted.empty(), "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline LossStats summarize_losses(std::span<const double> losses) {
  detail::require(!losses.empty(), "summarize: empty cell");
  std::vector<double> x(losses.begin(), losses.end());
  std::sort(x.begin(), x.end());
  LossStats s;
  s.min = x.front();
  s.max = x.back();
  // Offsets from the minimum keep the mean exact for constant samples.
  double acc = 0.0;
  for (double v : x) acc += v - s.min;
  s.mean = std::clamp(s.min + acc / static_cast<double>(x.size()), s.min, s.max);
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.std = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
  s.q1 = quantile_sorted(x, 0.25);
  s.median = quantile_sorted(x, 0.5);
  s.q3 = quantile_sorted(x, 0.75);
  s.fence_lo = s.q1 - 1.5 * s.iqr();
  s.fence_hi = s.q3 + 1.5 * s.iqr();
  return s;
}

struct SummaryRow {
  double sigma = 0.0;
  std::size_t sigma_index = 0;
  Method method = Method::anchored;
  std::optional<LossStats> stats;  // empty when every trial failed
  std::size_t n_ok = 0;
  std::size_t n_fail = 0;
};

struct SweepSummary {
  std::vector<SummaryRow> rows;  // grid order, then method order

  const SummaryRow* find(std::size_t sigma_index, Method m) const {
    for (const auto& r : rows)
      if (r.sigma_index == sigma_index && r.method == m) return &r;
    return nullptr;
  }
};

/// Per (grid point, method) statistics over successful trials. `results`
/// must be ordered by grid index.
inline SweepSummary summarize(std::span<const TrialResult> results, std::span<const Method> methods) {
  SweepSummary out;
  std::size_t i = 0;
  while (i < results.size()) {
    std::size_t end = i;
    while (end < results.size() && results[end].sigma_index == results[i].sigma_index) ++end;
    for (Method m : methods) {
      SummaryRow row;
      row.sigma = results[i].sigma;
      row.sigma_index = results[i].sigma_index;
      row.method = m;
      std::vector<double> losses;
      for (std::size_t t = i; t < end; ++t) {
        if (results[t].failed) {
          ++row.n_fail;
        } else if (auto l = results[t].loss(m)) {
          losses.push_back(*l);
        }
      }
      row.n_ok = losses.size();
      if (!losses.empty()) row.stats = summarize_losses(losses);
      out.rows.push_back(row);
    }
    i = end;
  }
  return out;
}

struct SweepResult {
  std::vector<TrialResult> trials;  // sorted by (grid index, trial index)
  SweepSummary summary;
};

inline SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  const std::size_t total = spec.sigma_grid.size() * spec.trials;
  std::vector<TrialResult> results(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t task = next.fetch_add(1);
      if (task >= total) return;
      const std::size_t si = task / spec.trials;
      const std::size_t t = task % spec.trials;
      ModelParams params = spec.base;
      params.sigma = spec.sigma_grid[si];
      params.seed = trial_seed(spec.master_seed, si, t);
      try {
        TrialResult r = run_trial(params, spec.trial);
        r.sigma_index = si;
        r.trial = t;
        results[task] = std::move(r);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(total);
        return;
      }
    }
  };

  const std::size_t workers = std::min(spec.parallelism, total);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  SweepResult out;
  out.trials = std::move(results);
  out.summary = summarize(out.trials, spec.trial.methods);
  return out;
}

namespace detail {

inline std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace detail

inline constexpr const char* kRawCsvHeader =
    "sigma,trial,method,loss,failed,gap,anchor_err,blockwise_err,global_err,eig_ms,cluster_ms,round_ms";

inline constexpr const char* kSummaryCsvHeader = "sigma,method,mean,median,q1,q3,min,max,std,n_ok,n_fail,fence_lo,fence_hi";

/// One row per (trial, method).
inline std::string raw_csv(std::span<const TrialResult> results, std::span<const Method> methods) {
  std::string out = std::string(kRawCsvHeader) + "\n";
  for (const auto& r : results) {
    for (Method m : methods) {
      out += format_double(r.sigma) + ',' + std::to_string(r.trial) + ',' + to_string(m) + ',';
      out += (r.failed ? std::string() : detail::opt_cell(r.loss(m))) + ',';
      out += r.failed ? "1," : "0,";
      const auto& dg = r.diagnostics;
      out += (dg ? detail::opt_cell(dg->gap) : std::string()) + ',';
      out += (dg && m == Method::anchored ? detail::opt_cell(dg->anchor_err) : std::string()) + ',';
      out += (dg ? format_double(dg->blockwise_err) : std::string()) + ',';
      out += (dg ? format_double(dg->global_err) : std::string()) + ',';
      if (r.times) {
        out += format_fixed(r.times->eig_ms, 3) + ',' + format_fixed(r.times->cluster_ms, 3) + ',' +
               format_fixed(r.times->round_ms, 3);
      } else {
        out += ",,";
      }
      out += '\n';
    }
  }
  return out;
}

inline std::string summary_csv(const SweepSummary& summary) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& row : summary.rows) {
    out += format_double(row.sigma) + ',' + to_string(row.method) + ',';
    if (row.stats) {
      const auto& s = *row.stats;
      for (double v : {s.mean, s.median, s.q1, s.q3, s.min, s.max, s.std}) out += format_double(v) + ',';
    } else {
      out += ",,,,,,,";
    }
    out += std::to_string(row.n_ok) + ',' + std::to_string(row.n_fail) + ',';
    if (row.stats) {
      out += format_double(row.stats->fence_lo) + ',' + format_double(row.stats->fence_hi);
    } else {
      out += ',';
    }
    out += '\n';
  }
  return out;
}

}  // namespace permsync
