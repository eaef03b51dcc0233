#pragma once

// Synthetic permutation-synchronization instances.
//
// For each pair j < k, independently: A_jk ~ Bernoulli(p), and when observed
//   X_jk = Z_j Z_k^T + sigma * W_jk,   W_jk entries i.i.d. N(0, 1).
// X_kj = X_jk^T, diagonal blocks are zero, unobserved blocks are zero.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "permsync/error.hpp"
#include "permsync/permutation.hpp"
#include "permsync/rng.hpp"

namespace permsync {

enum class TruthMode : std::uint32_t { uniform_random = 0, all_identity = 1 };

inline std::string to_string(TruthMode m) {
  return m == TruthMode::all_identity ? "identity" : "random";
}

inline TruthMode parse_truth_mode(const std::string& s) {
  if (s == "identity" || s == "all-identity") return TruthMode::all_identity;
  if (s == "random" || s == "uniform-random") return TruthMode::uniform_random;
  throw InvalidArgument("unknown truth mode '" + s + "'");
}

struct ModelParams {
  std::size_t n = 2;
  std::size_t d = 2;
  double p = 1.0;
  double sigma = 0.0;
  TruthMode truth_mode = TruthMode::uniform_random;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(n >= 2, "n must be at least 2");
    detail::require(d >= 1, "d must be at least 1");
    detail::require(std::isfinite(p) && p > 0.0 && p <= 1.0, "p must lie in (0, 1]");
    detail::require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be finite and non-negative");
    detail::require(n < (std::size_t{1} << 31) && d < 4096, "n or d too large");
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// nd above this needs the matrix-free operator instead of assemble_dense.
inline constexpr std::size_t kDefaultDenseCap = 8192;

class Instance {
 public:
  struct Pair {
    std::uint32_t j;
    std::uint32_t k;
    friend bool operator==(const Pair&, const Pair&) = default;
  };

  Instance() = default;

  /// Builds an instance from explicit parts. `pairs` must be strictly
  /// increasing in (j, k) with j < k; `blocks` holds d*d row-major values per
  /// pair. An empty `truth` means the ground truth is unknown.
  Instance(ModelParams params, std::vector<Permutation> truth, std::vector<Pair> pairs,
           std::vector<double> blocks)
      : params_(params), truth_(std::move(truth)), pairs_(std::move(pairs)), blocks_(std::move(blocks)) {
    params_.validate();
    const std::size_t n = params_.n, d = params_.d;
    detail::require(truth_.empty() || truth_.size() == n, "truth length must equal n");
    for (const auto& z : truth_) detail::require(z.size() == d, "truth dimension must equal d");
    detail::require(blocks_.size() == pairs_.size() * d * d, "block storage size mismatch");
    mask_.assign(n * n, 0);
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const auto [j, k] = pairs_[i];
      detail::require(j < k && k < n, "pair indices must satisfy j < k < n");
      if (i > 0) {
        const auto prev = pairs_[i - 1];
        detail::require(prev.j < j || (prev.j == j && prev.k < k), "pairs must be sorted and unique");
      }
      mask_[j * n + k] = mask_[k * n + j] = 1;
    }
  }

  const ModelParams& params() const noexcept { return params_; }
  std::size_t n() const noexcept { return params_.n; }
  std::size_t d() const noexcept { return params_.d; }
  std::size_t dim() const noexcept { return params_.n * params_.d; }
  bool has_truth() const noexcept { return !truth_.empty(); }
  const std::vector<Permutation>& truth() const noexcept { return truth_; }
  const std::vector<Pair>& pairs() const noexcept { return pairs_; }
  std::size_t observed_pairs() const noexcept { return pairs_.size(); }
  const std::vector<double>& block_data() const noexcept { return blocks_; }

  bool observed(std::size_t j, std::size_t k) const { return mask_[j * params_.n + k] != 0; }

  /// Row-major d*d values of the stored block for pair index i.
  std::span<const double> block(std::size_t i) const {
    const std::size_t dd = params_.d * params_.d;
    return {blocks_.data() + i * dd, dd};
  }

  /// X_jk as a dense d x d matrix (zero when unobserved or j == k).
  Eigen::MatrixXd block_matrix(std::size_t j, std::size_t k) const {
    const auto d = static_cast<Eigen::Index>(params_.d);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    if (j == k || !observed(j, k)) return out;
    const bool upper = j < k;
    const Pair key{static_cast<std::uint32_t>(std::min(j, k)), static_cast<std::uint32_t>(std::max(j, k))};
    const auto it = std::lower_bound(pairs_.begin(), pairs_.end(), key, [](const Pair& a, const Pair& b) {
      return a.j < b.j || (a.j == b.j && a.k < b.k);
    });
    const auto vals = block(static_cast<std::size_t>(it - pairs_.begin()));
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) {
        const double x = vals[static_cast<std::size_t>(r * d + c)];
        if (upper) {
          out(r, c) = x;
        } else {
          out(c, r) = x;
        }
      }
    return out;
  }

  /// Y = X V for an (nd x b) block of vectors, without forming X.
  void apply(const Eigen::MatrixXd& v, Eigen::MatrixXd& y) const {
    const std::size_t d = params_.d;
    const auto dim_i = static_cast<Eigen::Index>(dim());
    detail::require(v.rows() == dim_i, "apply: vector length must equal n*d");
    y.setZero(dim_i, v.cols());
    const std::size_t dd = d * d;
    for (Eigen::Index col = 0; col < v.cols(); ++col) {
      const double* vin = v.col(col).data();
      double* yout = y.col(col).data();
      for (std::size_t i = 0; i < pairs_.size(); ++i) {
        const double* x = blocks_.data() + i * dd;
        const std::size_t oj = pairs_[i].j * d, ok = pairs_[i].k * d;
        for (std::size_t r = 0; r < d; ++r) {
          double acc = 0.0;
          const double vr = vin[oj + r];
          for (std::size_t c = 0; c < d; ++c) {
            const double xv = x[r * d + c];
            acc += xv * vin[ok + c];
            yout[ok + c] += xv * vr;
          }
          yout[oj + r] += acc;
        }
      }
    }
  }

  friend bool operator==(const Instance& a, const Instance& b) {
    return a.params_ == b.params_ && a.truth_ == b.truth_ && a.pairs_ == b.pairs_ && a.blocks_ == b.blocks_;
  }

 private:
  ModelParams params_;
  std::vector<Permutation> truth_;
  std::vector<Pair> pairs_;
  std::vector<double> blocks_;
  std::vector<std::uint8_t> mask_;
};

/// Latent permutations for the given parameters (one keyed stream per object).
inline std::vector<Permutation> generate_truth(const ModelParams& params) {
  std::vector<Permutation> truth;
  truth.reserve(params.n);
  for (std::size_t j = 0; j < params.n; ++j) {
    if (params.truth_mode == TruthMode::all_identity) {
      truth.push_back(Permutation::identity(params.d));
    } else {
      CounterRng rng(params.seed, static_cast<std::uint32_t>(j), 0, StreamRole::truth);
      truth.push_back(sample_uniform(params.d, rng));
    }
  }
  return truth;
}

inline Instance generate(const ModelParams& params) {
  params.validate();
  const std::size_t n = params.n, d = params.d;
  auto truth = generate_truth(params);

  // Z_j Z_k^T in index form: entry (r, c) is 1 iff r = z_j[t] and c = z_k[t].
  std::vector<Instance::Pair> pairs;
  std::vector<double> blocks;
  const auto expected = static_cast<std::size_t>(params.p * static_cast<double>(n * (n - 1) / 2));
  pairs.reserve(expected + 16);
  blocks.reserve((expected + 16) * d * d);
  for (std::uint32_t j = 0; j < n; ++j) {
    for (std::uint32_t k = j + 1; k < n; ++k) {
      CounterRng mask_rng(params.seed, j, k, StreamRole::mask);
      if (!(mask_rng.uniform() < params.p)) continue;
      pairs.push_back({j, k});
      const std::size_t base = blocks.size();
      blocks.resize(base + d * d, 0.0);
      if (params.sigma > 0.0) {
        CounterRng noise(params.seed, j, k, StreamRole::noise);
        for (std::size_t e = 0; e < d * d; ++e) blocks[base + e] = params.sigma * noise.normal();
      }
      const auto& zj = truth[j].images();
      const auto& zk = truth[k].images();
      for (std::size_t t = 0; t < d; ++t) blocks[base + static_cast<std::size_t>(zj[t]) * d + zk[t]] += 1.0;
    }
  }
  return Instance(params, std::move(truth), std::move(pairs), std::move(blocks));
}

/// Dense nd x nd observation matrix.
inline Eigen::MatrixXd assemble_dense(const Instance& inst, std::size_t cap = kDefaultDenseCap) {
  const std::size_t dim = inst.dim();
  detail::require(dim <= cap, "assemble_dense: n*d = " + std::to_string(dim) +
                                  " exceeds the dense cap; use the operator form");
  const std::size_t d = inst.d();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < inst.pairs().size(); ++i) {
    const auto [j, k] = inst.pairs()[i];
    const auto vals = inst.block(i);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) {
        const auto row = static_cast<Eigen::Index>(j * d + r);
        const auto col = static_cast<Eigen::Index>(k * d + c);
        x(row, col) = vals[r * d + c];
        x(col, row) = vals[r * d + c];
      }
  }
  return x;
}

/// X v for a single vector.
inline Eigen::VectorXd apply_operator(const Instance& inst, const Eigen::VectorXd& v) {
  Eigen::MatrixXd y;
  inst.apply(v, y);
  return y.col(0);
}

struct PopulationSpectrum {
  double top;   // multiplicity d
  double bulk;  // multiplicity (n - 1) d
};

/// Eigenvalues of E[A] (x) I_d = p (J_n - I_n) (x) I_d.
inline PopulationSpectrum population_eigenvalues(std::size_t n, double p, std::size_t d) {
  detail::require(n >= 1 && d >= 1 && p > 0.0 && p <= 1.0, "population_eigenvalues: invalid parameters");
  return {static_cast<double>(n - 1) * p, -p};
}

}  // namespace permsync
