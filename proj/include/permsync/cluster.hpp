#pragma once

// k-means (k-means++ seeding, Lloyd refinement, best of several restarts) and
// the anchor built from the cluster centers of the rows of U.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "permsync/error.hpp"
#include "permsync/rng.hpp"
#include "permsync/spectrum.hpp"

namespace permsync {

struct ClusterConfig {
  std::size_t restarts = 10;
  std::size_t max_iters = 100;
  double rel_tol = 1e-10;
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(restarts >= 1, "restarts must be at least 1");
    detail::require(max_iters >= 1, "max_iters must be at least 1");
    detail::require(rel_tol >= 0.0, "rel_tol must be non-negative");
  }
};

struct Clustering {
  Eigen::MatrixXd centers;  // k x dim, one center per row
  std::vector<int> labels;  // one per point
  double objective = 0.0;   // sum of squared distances to assigned centers
  bool converged = false;
  /// Final objective of every restart, in restart order.
  std::vector<double> restart_objectives;
  /// Index of the restart that produced this result.
  std::size_t best_restart = 0;
  /// An empty cluster was re-seeded at some point in the winning restart.
  bool empty_cluster = false;
  /// Objective after each (assign, update) pair of the winning restart.
  std::vector<double> trace;
};

namespace detail {

inline double kmeans_objective(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers,
                               const std::vector<int>& labels) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    total += (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  return total;
}

/// Nearest center per point (lowest index wins ties). Returns true if any
/// label changed.
inline bool assign_labels(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers, std::vector<int>& labels) {
  bool changed = false;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      const double dist = (points.row(i) - centers.row(c)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = static_cast<int>(c);
      }
    }
    if (labels[static_cast<std::size_t>(i)] != best) {
      labels[static_cast<std::size_t>(i)] = best;
      changed = true;
    }
  }
  return changed;
}

/// Centers become the means of their members. Returns the indices of empty
/// clusters (their centers are left untouched).
inline std::vector<int> update_centers(const Eigen::MatrixXd& points, const std::vector<int>& labels,
                                       Eigen::MatrixXd& centers) {
  const Eigen::Index k = centers.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    sums.row(l) += points.row(i);
    ++counts[static_cast<std::size_t>(l)];
  }
  std::vector<int> empty;
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      empty.push_back(static_cast<int>(c));
    } else {
      centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
  }
  return empty;
}

inline Eigen::MatrixXd kmeans_plus_plus(const Eigen::MatrixXd& points, std::size_t k, CounterRng& rng) {
  const Eigen::Index m = points.rows();
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), points.cols());
  centers.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m))));
  std::vector<double> d2(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) d2[i] = (points.row(i) - centers.row(0)).squaredNorm();
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double x : d2) total += x;
    Eigen::Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = m - 1;
      for (Eigen::Index i = 0; i < m; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] <= 0.0 && pick > 0) --pick;  // rounding at the tail
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m)));
    }
    centers.row(static_cast<Eigen::Index>(c)) = points.row(pick);
    for (Eigen::Index i = 0; i < m; ++i)
      d2[i] = std::min(d2[i], (points.row(i) - points.row(pick)).squaredNorm());
  }
  return centers;
}

inline Clustering lloyd(const Eigen::MatrixXd& points, std::size_t k, const ClusterConfig& cfg, CounterRng& rng) {
  Clustering out;
  out.centers = kmeans_plus_plus(points, k, rng);
  out.labels.assign(static_cast<std::size_t>(points.rows()), -1);
  assign_labels(points, out.centers, out.labels);
  double prev = kmeans_objective(points, out.centers, out.labels);
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const auto empty = update_centers(points, out.labels, out.centers);
    for (int c : empty) {
      // Re-seed at the point farthest from its own center.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const double dist = (points.row(i) - out.centers.row(out.labels[static_cast<std::size_t>(i)])).squaredNorm();
        if (dist > far_d) {
          far_d = dist;
          far = i;
        }
      }
      out.centers.row(c) = points.row(far);
      out.labels[static_cast<std::size_t>(far)] = c;
      out.empty_cluster = true;
    }
    const bool changed = assign_labels(points, out.centers, out.labels);
    const double obj = kmeans_objective(points, out.centers, out.labels);
    out.trace.push_back(obj);
    const bool small_step = prev <= 0.0 || (prev - obj) <= cfg.rel_tol * prev;
    prev = obj;
    if ((!changed && empty.empty()) || small_step) {
      out.converged = true;
      break;
    }
  }
  // Leave centers at the means of the final labels.
  update_centers(points, out.labels, out.centers);
  out.objective = kmeans_objective(points, out.centers, out.labels);
  return out;
}

}  // namespace detail

/// k-means on the rows of `points`: best objective over cfg.restarts
/// k-means++ initializations, each refined by Lloyd iterations.
inline Clustering d_means(const Eigen::MatrixXd& points, std::size_t k, const ClusterConfig& cfg = {}) {
  cfg.validate();
  detail::require(k >= 1 && static_cast<std::size_t>(points.rows()) >= k, "d_means: need at least k points");
  detail::require(points.allFinite(), "d_means: non-finite coordinate");
  Clustering best;
  std::vector<double> objectives;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    CounterRng rng(cfg.seed, static_cast<std::uint32_t>(r), 0, StreamRole::cluster);
    Clustering run = detail::lloyd(points, k, cfg, rng);
    objectives.push_back(run.objective);
    if (r == 0 || run.objective < best.objective) {
      best = std::move(run);
      best.best_restart = r;
    }
  }
  best.restart_objectives = std::move(objectives);
  return best;
}

/// The d x d anchor: rows are the k-means centers of the rows of U, scaled
/// by sqrt(n). Row order is whatever order the clustering produced.
struct Anchor {
  Eigen::MatrixXd m;
  double clustering_objective = 0.0;
  bool empty_cluster = false;
  /// max - min final objective across restarts.
  double restart_spread = 0.0;
};

inline Anchor build_anchor(const Eigenspace& es, const ClusterConfig& cfg = {}) {
  const std::size_t d = es.block_dim;
  detail::require(es.count() == d, "build_anchor: eigenspace width must equal the block size");
  detail::require(es.blocks() >= d, "build_anchor: need n >= d");
  const Clustering cl = d_means(es.u, d, cfg);
  Anchor a;
  a.m = std::sqrt(static_cast<double>(es.blocks())) * cl.centers;
  a.clustering_objective = cl.objective;
  a.empty_cluster = cl.empty_cluster;
  const auto [lo, hi] = std::minmax_element(cl.restart_objectives.begin(), cl.restart_objectives.end());
  a.restart_spread = *hi - *lo;
  return a;
}

}  // namespace permsync
