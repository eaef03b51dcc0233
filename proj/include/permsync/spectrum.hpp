#pragma once

// Leading eigenpairs of a symmetric operator.
//
// The iterative path is a block Krylov method with full (twice-iterated
// Gram-Schmidt) reorthogonalization and thick restarts: the basis is grown
// one block at a time from the image of the most recent block, Rayleigh-Ritz
// is applied after every block, and residuals ||A y - theta y|| are evaluated
// exactly from the stored images A Q. Small problems go to a dense
// symmetric QR solver instead.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "permsync/error.hpp"
#include "permsync/model.hpp"
#include "permsync/rng.hpp"

namespace permsync {

enum class EigMethod { automatic, lanczos, dense };

struct EigOptions {
  /// Converged when every residual <= tol * max(1, |lambda_1|).
  double tol = 1e-8;
  /// Budget in block expansions; 0 means 50 * count.
  std::size_t max_blocks = 0;
  /// Basis width that triggers a thick restart; 0 means max(40, 12 * count).
  std::size_t max_basis = 0;
  std::uint64_t seed = 0;
  EigMethod method = EigMethod::automatic;
  /// `automatic` uses the dense solver when the dimension is at most this.
  std::size_t dense_threshold = 64;
};

struct Eigenspace {
  Eigen::MatrixXd u;              // dim x count, orthonormal columns
  std::vector<double> lambdas;    // descending
  std::vector<double> residuals;  // ||X u_i - lambda_i u_i||
  /// Ritz estimate of the next eigenvalue below lambdas.back(), when known.
  std::optional<double> next_lambda;
  std::size_t block_dim = 1;
  std::size_t iterations = 0;

  std::size_t count() const noexcept { return lambdas.size(); }
  std::size_t blocks() const noexcept { return static_cast<std::size_t>(u.rows()) / block_dim; }

  /// lambda_count - lambda_{count+1}, when the latter was estimated.
  std::optional<double> gap() const {
    if (!next_lambda || lambdas.empty()) return std::nullopt;
    return lambdas.back() - *next_lambda;
  }

  /// The leading k pairs; the (k+1)-th eigenvalue becomes next_lambda.
  Eigenspace leading(std::size_t k) const {
    detail::require(k >= 1 && k <= count(), "Eigenspace::leading: bad count");
    Eigenspace out;
    out.u = u.leftCols(static_cast<Eigen::Index>(k));
    out.lambdas.assign(lambdas.begin(), lambdas.begin() + static_cast<std::ptrdiff_t>(k));
    out.residuals.assign(residuals.begin(), residuals.begin() + static_cast<std::ptrdiff_t>(k));
    out.next_lambda = k < count() ? std::optional<double>(lambdas[k]) : next_lambda;
    out.block_dim = block_dim;
    out.iterations = iterations;
    return out;
  }
};

/// Rows [j*block_dim, (j+1)*block_dim) of U.
inline Eigen::MatrixXd block_row(const Eigenspace& es, std::size_t j) {
  detail::require(j < es.blocks(), "block_row: index out of range");
  const auto bd = static_cast<Eigen::Index>(es.block_dim);
  return es.u.middleRows(static_cast<Eigen::Index>(j) * bd, bd);
}

namespace detail {

/// Rayleigh-Ritz pairs of a symmetric matrix, sorted descending.
inline void ritz_descending(const Eigen::MatrixXd& t, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(t);
  values = solver.eigenvalues().reverse();
  vectors = solver.eigenvectors().rowwise().reverse();
}

template <class Op>
Eigenspace dense_eigenpairs(std::size_t dim, Op& apply, std::size_t count, std::size_t block_dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd x;
  apply(Eigen::MatrixXd::Identity(n, n), x);
  x = 0.5 * (x + x.transpose()).eval();
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  ritz_descending(x, values, vectors);
  const auto k = static_cast<Eigen::Index>(count);
  Eigenspace es;
  es.u = vectors.leftCols(k);
  es.lambdas.assign(values.data(), values.data() + k);
  if (k < n) es.next_lambda = values(k);
  const Eigen::MatrixXd r = x * es.u - es.u * values.head(k).asDiagonal();
  for (Eigen::Index i = 0; i < k; ++i) es.residuals.push_back(r.col(i).norm());
  es.block_dim = block_dim;
  es.iterations = 1;
  return es;
}

class KrylovBasis {
 public:
  KrylovBasis(Eigen::Index dim, Eigen::Index capacity, CounterRng& rng)
      : q_(dim, capacity), aq_(dim, capacity), t_(capacity, capacity), rng_(rng) {}

  Eigen::Index size() const { return m_; }
  Eigen::Index dim() const { return q_.rows(); }

  /// Orthonormalizes w against the basis and appends it together with its
  /// image. Returns the number of columns appended.
  template <class Op>
  Eigen::Index append(Eigen::MatrixXd w, Op& apply) {
    const Eigen::Index room = std::min<Eigen::Index>(dim() - m_, q_.cols() - m_);
    const Eigen::Index cols = std::min<Eigen::Index>(w.cols(), room);
    if (cols <= 0) return 0;
    Eigen::MatrixXd block(dim(), cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      Eigen::VectorXd v = w.col(c);
      for (int attempt = 0;; ++attempt) {
        const double before = v.norm();
        orthogonalize(v, block, c);
        const double after = v.norm();
        // A column that is (numerically) inside the current span carries no
        // new direction; replace it with a random one.
        if (before > 0.0 && after > 1e-10 * before) {
          block.col(c) = v / after;
          break;
        }
        if (attempt > 8) throw ConvergenceError("eigensolver could not extend the Krylov basis", {});
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng_.normal();
      }
    }
    Eigen::MatrixXd image;
    apply(block, image);
    q_.middleCols(m_, cols) = block;
    aq_.middleCols(m_, cols) = image;
    const Eigen::Index total = m_ + cols;
    const Eigen::MatrixXd proj = q_.leftCols(total).transpose() * image;
    t_.block(0, m_, total, cols) = proj;
    t_.block(m_, 0, cols, total) = proj.transpose();
    // Symmetrize the freshly written diagonal block.
    const Eigen::MatrixXd diag = t_.block(m_, m_, cols, cols);
    t_.block(m_, m_, cols, cols) = 0.5 * (diag + diag.transpose());
    last_ = m_;
    m_ = total;
    last_cols_ = cols;
    return cols;
  }

  Eigen::MatrixXd projected() const { return t_.topLeftCorner(m_, m_); }
  auto basis() const { return q_.leftCols(m_); }
  auto images() const { return aq_.leftCols(m_); }
  Eigen::MatrixXd last_images() const { return aq_.middleCols(last_, last_cols_); }

  /// Keeps the span of Q * s (s has orthonormal columns that are Ritz vectors
  /// of the projected matrix with Ritz values `values`).
  void compress(const Eigen::MatrixXd& s, const Eigen::VectorXd& values, Eigen::Index lead) {
    const Eigen::Index r = s.cols();
    const Eigen::MatrixXd q = q_.leftCols(m_) * s;
    const Eigen::MatrixXd aq = aq_.leftCols(m_) * s;
    q_.leftCols(r) = q;
    aq_.leftCols(r) = aq;
    t_.topLeftCorner(r, r) = values.head(r).asDiagonal();
    m_ = r;
    last_ = 0;
    last_cols_ = lead;
  }

 private:
  // Classical Gram-Schmidt, applied twice, against the basis and the first
  // `c` columns of the block under construction.
  void orthogonalize(Eigen::VectorXd& v, const Eigen::MatrixXd& block, Eigen::Index c) const {
    for (int pass = 0; pass < 2; ++pass) {
      if (m_ > 0) v -= q_.leftCols(m_) * (q_.leftCols(m_).transpose() * v);
      if (c > 0) v -= block.leftCols(c) * (block.leftCols(c).transpose() * v);
    }
  }

  Eigen::MatrixXd q_;
  Eigen::MatrixXd aq_;
  Eigen::MatrixXd t_;
  Eigen::Index m_ = 0;
  Eigen::Index last_ = 0;
  Eigen::Index last_cols_ = 0;
  CounterRng& rng_;
};

template <class Op>
Eigenspace krylov_eigenpairs(std::size_t dim, Op& apply, std::size_t count, const EigOptions& opts,
                             std::size_t block_dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  const auto b = static_cast<Eigen::Index>(count);
  const std::size_t max_blocks = opts.max_blocks ? opts.max_blocks : 50 * count;
  Eigen::Index capacity =
      static_cast<Eigen::Index>(opts.max_basis ? opts.max_basis : std::max<std::size_t>(40, 12 * count));
  capacity = std::min(std::max(capacity, 3 * b), n);

  CounterRng rng(opts.seed, 0, 0, StreamRole::eigen_start);
  KrylovBasis basis(n, capacity, rng);

  Eigen::MatrixXd start(n, b);
  for (Eigen::Index c = 0; c < b; ++c)
    for (Eigen::Index i = 0; i < n; ++i) start(i, c) = rng.normal();
  basis.append(start, apply);
  std::size_t expansions = 1;

  Eigen::VectorXd theta;
  Eigen::MatrixXd s;
  std::vector<double> best_residuals;
  for (;;) {
    ritz_descending(basis.projected(), theta, s);
    const Eigen::Index m = basis.size();
    const Eigen::Index k = std::min(b, m);
    const Eigen::MatrixXd lead = s.leftCols(k);
    const Eigen::MatrixXd y = basis.basis() * lead;
    const Eigen::MatrixXd ay = basis.images() * lead;
    const Eigen::MatrixXd r = ay - y * theta.head(k).asDiagonal();
    std::vector<double> residuals(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) residuals[i] = r.col(i).norm();
    const double scale = std::max(1.0, std::abs(theta(0)));
    const bool full = m == n;
    const bool converged =
        k == b && std::all_of(residuals.begin(), residuals.end(), [&](double x) { return x <= opts.tol * scale; });
    if (converged || full) {
      Eigenspace es;
      es.u = y;
      es.lambdas.assign(theta.data(), theta.data() + b);
      es.residuals = std::move(residuals);
      if (m > b) es.next_lambda = theta(b);
      es.block_dim = block_dim;
      es.iterations = expansions;
      return es;
    }
    best_residuals = residuals;
    if (expansions >= max_blocks)
      throw ConvergenceError("eigensolver did not converge within " + std::to_string(max_blocks) + " block steps",
                             best_residuals);

    Eigen::MatrixXd w;
    if (m + b > capacity) {
      const Eigen::Index keep = std::min<Eigen::Index>(m, std::max<Eigen::Index>(2 * b, capacity / 2));
      basis.compress(s.leftCols(keep), theta, b);
    }
    w = basis.last_images();
    basis.append(std::move(w), apply);
    ++expansions;
  }
}

}  // namespace detail

/// Top `count` eigenpairs (largest algebraic eigenvalues) of the symmetric
/// operator `apply`, which maps an (dim x b) block V to X V.
/// `block_dim` is the block size used by block_row.
template <class Op>
Eigenspace top_eigenpairs(std::size_t dim, Op&& apply, std::size_t count, const EigOptions& opts = {},
                          std::size_t block_dim = 1) {
  detail::require(count >= 1 && count < dim, "top_eigenpairs: need 1 <= count < dimension");
  detail::require(block_dim >= 1 && dim % block_dim == 0, "top_eigenpairs: block size must divide the dimension");
  detail::require(opts.tol > 0.0, "top_eigenpairs: tolerance must be positive");
  const bool dense =
      opts.method == EigMethod::dense || (opts.method == EigMethod::automatic && dim <= opts.dense_threshold);
  if (dense) return detail::dense_eigenpairs(dim, apply, count, block_dim);
  return detail::krylov_eigenpairs(dim, apply, count, opts, block_dim);
}

inline Eigenspace top_eigenpairs(const Eigen::MatrixXd& x, std::size_t count, const EigOptions& opts = {},
                                 std::size_t block_dim = 1) {
  detail::require(x.rows() == x.cols(), "top_eigenpairs: matrix must be square");
  auto apply = [&x](const Eigen::MatrixXd& v, Eigen::MatrixXd& y) { y.noalias() = x * v; };
  return top_eigenpairs(static_cast<std::size_t>(x.rows()), apply, count, opts, block_dim);
}

/// Eigenpairs of an instance's observation matrix, with block_dim = d.
inline Eigenspace top_eigenpairs(const Instance& inst, std::size_t count, const EigOptions& opts = {}) {
  auto apply = [&inst](const Eigen::MatrixXd& v, Eigen::MatrixXd& y) { inst.apply(v, y); };
  return top_eigenpairs(inst.dim(), apply, count, opts, inst.d());
}

}  // namespace permsync
