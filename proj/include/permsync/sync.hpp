#pragma once

// The two spectral estimators and the perturbation diagnostics.
//
//   vanilla:  Z_1 = I,  Z_j = round(U_j U_1^T)
//   anchored: Z_j = round(U_j M^T) for every j, M from build_anchor
//
// where round() is project_to_permutation.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "permsync/cluster.hpp"
#include "permsync/error.hpp"
#include "permsync/permutation.hpp"
#include "permsync/spectrum.hpp"

namespace permsync {

enum class Method { vanilla, anchored };

inline std::string to_string(Method m) { return m == Method::vanilla ? "vanilla" : "anchored"; }

inline Method parse_method(std::string_view s) {
  if (s == "vanilla") return Method::vanilla;
  if (s == "anchored") return Method::anchored;
  throw InvalidArgument("unknown method '" + std::string(s) + "'");
}

struct EstimateSet {
  std::vector<Permutation> perms;
  Method method = Method::anchored;
};

namespace detail {

inline void require_square_blocks(const Eigenspace& es) {
  require(es.count() == es.block_dim, "estimator: eigenspace width must equal the block size d");
  require(es.blocks() >= 1, "estimator: empty eigenspace");
}

}  // namespace detail

inline EstimateSet vanilla_estimate(const Eigenspace& es) {
  detail::require_square_blocks(es);
  EstimateSet out{{}, Method::vanilla};
  out.perms.reserve(es.blocks());
  out.perms.push_back(Permutation::identity(es.block_dim));
  const Eigen::MatrixXd first_t = block_row(es, 0).transpose();
  for (std::size_t j = 1; j < es.blocks(); ++j)
    out.perms.push_back(project_to_permutation(block_row(es, j) * first_t));
  return out;
}

inline EstimateSet anchored_estimate(const Eigenspace& es, const Anchor& anchor) {
  detail::require_square_blocks(es);
  const auto d = static_cast<Eigen::Index>(es.block_dim);
  detail::require(anchor.m.rows() == d && anchor.m.cols() == d, "anchored_estimate: anchor dimension mismatch");
  detail::require(anchor.m.allFinite(), "anchored_estimate: non-finite anchor");
  EstimateSet out{{}, Method::anchored};
  out.perms.reserve(es.blocks());
  const Eigen::MatrixXd anchor_t = anchor.m.transpose();
  for (std::size_t j = 0; j < es.blocks(); ++j) out.perms.push_back(project_to_permutation(block_row(es, j) * anchor_t));
  return out;
}

struct Diagnostics {
  Eigen::MatrixXd h;          // U^T U*
  double global_err = 0.0;    // ||U H - U*||_op
  double blockwise_err = 0.0; // max_j ||U_j H - U*_j||_op
  std::optional<double> anchor_err;  // min_P ||M - P H^T||_F
  std::optional<double> gap;         // lambda_d - lambda_{d+1}
  double h_orth_defect = 0.0; // min over orthogonal O of ||H - O||_op
};

/// U* with blocks Z*_j / sqrt(n).
inline Eigen::MatrixXd population_eigenspace(std::span<const Permutation> truth) {
  detail::require(!truth.empty(), "population_eigenspace: empty truth");
  const auto d = static_cast<Eigen::Index>(truth[0].size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(truth.size()));
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(truth.size()) * d, d);
  for (std::size_t j = 0; j < truth.size(); ++j)
    for (Eigen::Index c = 0; c < d; ++c) u(static_cast<Eigen::Index>(j) * d + truth[j][c], c) = scale;
  return u;
}

namespace detail {

/// Largest eigenvalue of a small symmetric PSD matrix, clamped at zero.
inline double top_sym_eigenvalue(const Eigen::MatrixXd& g) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
  return std::max(0.0, solver.eigenvalues().maxCoeff());
}

}  // namespace detail

inline Diagnostics compute_diagnostics(const Eigenspace& es, std::span<const Permutation> truth,
                                       const Anchor* anchor = nullptr) {
  detail::require_square_blocks(es);
  detail::require(!truth.empty(), "compute_diagnostics: ground truth is required");
  detail::require(truth.size() == es.blocks(), "compute_diagnostics: truth length must equal n");
  const auto d = static_cast<Eigen::Index>(es.block_dim);
  for (const auto& z : truth)
    detail::require(static_cast<Eigen::Index>(z.size()) == d, "compute_diagnostics: truth dimension mismatch");

  Diagnostics out;
  const Eigen::MatrixXd u_star = population_eigenspace(truth);
  out.h = es.u.transpose() * u_star;
  const Eigen::MatrixXd diff = es.u * out.h - u_star;

  // Both norms come from d x d Gram matrices; the global Gram is the sum of
  // the block Grams.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  double block_max = 0.0;
  for (std::size_t j = 0; j < es.blocks(); ++j) {
    const auto blk = diff.middleRows(static_cast<Eigen::Index>(j) * d, d);
    const Eigen::MatrixXd g = blk.transpose() * blk;
    gram += g;
    block_max = std::max(block_max, detail::top_sym_eigenvalue(g));
  }
  const double global_sq = detail::top_sym_eigenvalue(gram);
  out.global_err = std::sqrt(global_sq);
  out.blockwise_err = std::sqrt(block_max);

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.h);
  double defect = 0.0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    defect = std::max(defect, std::abs(svd.singularValues()(i) - 1.0));
  out.h_orth_defect = defect;

  if (anchor != nullptr) {
    detail::require(anchor->m.rows() == d && anchor->m.cols() == d, "compute_diagnostics: anchor dimension mismatch");
    const Eigen::MatrixXd ht = out.h.transpose();
    std::vector<int> p(static_cast<std::size_t>(d));
    std::iota(p.begin(), p.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      best = std::min(best, (anchor->m - Permutation(p).matrix() * ht).norm());
    } while (std::next_permutation(p.begin(), p.end()));
    out.anchor_err = best;
  }
  out.gap = es.gap();
  return out;
}

}  // namespace permsync
