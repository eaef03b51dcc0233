#pragma once

// Reference implementations written straight from the definitions, used to
// check the library. Slow on purpose; no shortcuts shared with the library.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "permsync/permutation.hpp"

namespace oracle {

inline std::vector<std::vector<int>> all_images(std::size_t d) {
  std::vector<int> p(d);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

/// 0/1 matrix with a one at (images[j], j).
inline Eigen::MatrixXd explicit_matrix(const std::vector<int>& images) {
  const auto d = static_cast<Eigen::Index>(images.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) m(images[j], j) = 1.0;
  return m;
}

/// Exhaustive argmax of <P, q> in lexicographic order: the first permutation
/// whose score is within 1e-12 * max(1, sum |q|) of the maximum.
inline permsync::Permutation round(const Eigen::MatrixXd& q) {
  const auto perms = all_images(static_cast<std::size_t>(q.rows()));
  std::vector<double> scores;
  for (const auto& p : perms) {
    double s = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) s += q(p[j], static_cast<Eigen::Index>(j));
    scores.push_back(s);
  }
  const double best = *std::max_element(scores.begin(), scores.end());
  const double tol = 1e-12 * std::max(1.0, q.cwiseAbs().sum());
  for (std::size_t i = 0; i < perms.size(); ++i)
    if (scores[i] >= best - tol) return permsync::Permutation(perms[i]);
  return permsync::Permutation(perms.front());
}

/// min over P of (1/n) #{ j : matrix(est_j) != matrix(truth_j) P^T }, by
/// dense matrix comparison.
inline double loss(const std::vector<permsync::Permutation>& est, const std::vector<permsync::Permutation>& truth) {
  std::size_t best_miss = est.size();
  for (const auto& p : all_images(truth[0].size())) {
    const Eigen::MatrixXd pt = explicit_matrix(p).transpose();
    std::size_t miss = 0;
    for (std::size_t j = 0; j < est.size(); ++j)
      if (explicit_matrix(est[j].images()) != explicit_matrix(truth[j].images()) * pt) ++miss;
    best_miss = std::min(best_miss, miss);
  }
  return static_cast<double>(best_miss) / static_cast<double>(est.size());
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) off += a(i, j) * a(i, j);
    if (off < 1e-30 * std::max(1.0, a.squaredNorm())) break;
    for (Eigen::Index p = 0; p < n - 1; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(out.rbegin(), out.rend());
  return out;
}

}  // namespace oracle
