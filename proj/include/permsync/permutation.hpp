#pragma once

// Permutations of [d], rounding of real d x d matrices onto the permutation
// group, and the normalized Hamming loss modulo a global permutation.
//
// Matrix convention: the permutation with images (i_0, ..., i_{d-1}) has the
// matrix P with P(i_j, j) = 1, so P e_j = e_{i_j} and compose(a, b) has the
// matrix A * B.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "permsync/error.hpp"
#include "permsync/rng.hpp"

namespace permsync {

using SquareMatrix = Eigen::MatrixXd;

class Permutation {
 public:
  Permutation() = default;

  explicit Permutation(std::vector<int> images) : images_(std::move(images)) {
    std::vector<char> seen(images_.size(), 0);
    for (int v : images_) {
      detail::require(v >= 0 && static_cast<std::size_t>(v) < images_.size() && !seen[v],
                      "permutation images must be a bijection of {0..d-1}");
      seen[v] = 1;
    }
  }

  static Permutation identity(std::size_t d) {
    std::vector<int> images(d);
    std::iota(images.begin(), images.end(), 0);
    return Permutation(std::move(images), Unchecked{});
  }

  std::size_t size() const noexcept { return images_.size(); }
  int operator[](std::size_t i) const { return images_[i]; }
  const std::vector<int>& images() const noexcept { return images_; }

  bool is_identity() const {
    for (std::size_t i = 0; i < images_.size(); ++i)
      if (images_[i] != static_cast<int>(i)) return false;
    return true;
  }

  /// Dense 0/1 view, P(images[j], j) = 1.
  SquareMatrix matrix() const {
    const auto d = static_cast<Eigen::Index>(images_.size());
    SquareMatrix m = SquareMatrix::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j) m(images_[j], j) = 1.0;
    return m;
  }

  /// "[i0,i1,...]", 0-based.
  std::string to_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < images_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(images_[i]);
    }
    return s + "]";
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation& a, const Permutation& b) {
    return a.images_ <=> b.images_;
  }

 private:
  struct Unchecked {};
  Permutation(std::vector<int> images, Unchecked) : images_(std::move(images)) {}

  std::vector<int> images_;

  friend Permutation compose(const Permutation&, const Permutation&);
  friend Permutation inverse(const Permutation&);
};

/// compose(a, b)[j] = a[b[j]]; matrix(compose(a, b)) = matrix(a) * matrix(b).
inline Permutation compose(const Permutation& a, const Permutation& b) {
  detail::require(a.size() == b.size(), "compose: dimension mismatch");
  std::vector<int> out(a.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = a.images_[b.images_[j]];
  return Permutation(std::move(out), Permutation::Unchecked{});
}

inline Permutation inverse(const Permutation& a) {
  std::vector<int> out(a.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[a.images_[j]] = static_cast<int>(j);
  return Permutation(std::move(out), Permutation::Unchecked{});
}

/// Fisher-Yates shuffle of the identity.
template <class Rng>
Permutation sample_uniform(std::size_t d, Rng& rng) {
  detail::require(d >= 1, "sample_uniform: d must be positive");
  std::vector<int> images(d);
  std::iota(images.begin(), images.end(), 0);
  for (std::size_t i = d - 1; i > 0; --i) {
    std::size_t j;
    if constexpr (requires { rng.below(std::uint64_t{1}); }) {
      j = static_cast<std::size_t>(rng.below(i + 1));
    } else {
      // Unbiased rejection on a generic 64-bit generator.
      const std::uint64_t bound = i + 1;
      const std::uint64_t limit = Rng::max() - Rng::max() % bound;
      std::uint64_t x = rng();
      while (x >= limit) x = rng();
      j = static_cast<std::size_t>(x % bound);
    }
    std::swap(images[i], images[j]);
  }
  return Permutation(std::move(images));
}

/// <P, q> for the permutation matrix P, summed over columns in order.
inline double assignment_score(const SquareMatrix& q, std::span<const int> images) {
  double s = 0.0;
  for (std::size_t j = 0; j < images.size(); ++j)
    s += q(images[j], static_cast<Eigen::Index>(j));
  return s;
}

/// Two assignments whose scores differ by at most this much are treated as
/// tied, and the lexicographically smallest images sequence wins.
inline double tie_tolerance(const SquareMatrix& q) {
  return 1e-12 * std::max(1.0, q.cwiseAbs().sum());
}

namespace detail {

/// Kuhn-Munkres on a square cost matrix (minimization). Returns row_of[col].
inline std::vector<int> hungarian_min(const SquareMatrix& cost) {
  const int n = static_cast<int>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> row_of(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    row_of[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = row_of[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const int j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n);
  for (int j = 1; j <= n; ++j) out[j - 1] = row_of[j] - 1;
  return out;
}

/// Maximum-score completion of a partial assignment. `images` holds the
/// fixed prefix for columns [0, prefix); the rest is overwritten.
inline void complete_assignment(const SquareMatrix& q, std::vector<int>& images, std::size_t prefix) {
  const std::size_t d = images.size();
  const std::size_t rest = d - prefix;
  if (rest == 0) return;
  std::vector<char> taken(d, 0);
  for (std::size_t j = 0; j < prefix; ++j) taken[images[j]] = 1;
  std::vector<int> rows;
  for (std::size_t r = 0; r < d; ++r)
    if (!taken[r]) rows.push_back(static_cast<int>(r));
  SquareMatrix sub(rest, rest);
  for (std::size_t a = 0; a < rest; ++a)
    for (std::size_t b = 0; b < rest; ++b) sub(a, b) = q(rows[a], prefix + b);
  // Maximization by negation with an offset keeping costs non-negative.
  const double offset = sub.maxCoeff();
  const SquareMatrix cost = SquareMatrix::Constant(rest, rest, offset) - sub;
  const auto row_of = hungarian_min(cost);
  for (std::size_t b = 0; b < rest; ++b) images[prefix + b] = rows[row_of[b]];
}

}  // namespace detail

/// argmax over permutation matrices P of <P, q>, equivalently the argmin of
/// ||P - q||_F. Ties (within tie_tolerance) resolve to the lexicographically
/// smallest images sequence.
inline Permutation project_to_permutation(const SquareMatrix& q) {
  detail::require(q.rows() == q.cols() && q.rows() >= 1,
                  "project_to_permutation: expected a non-empty square matrix");
  detail::require(q.allFinite(), "project_to_permutation: non-finite entry");
  const auto d = static_cast<std::size_t>(q.rows());
  if (d == 1) return Permutation::identity(1);

  std::vector<int> images(d, 0);
  detail::complete_assignment(q, images, 0);
  const double best = assignment_score(q, images);
  const double floor = best - tie_tolerance(q);

  // Walk columns left to right, fixing the smallest row that still admits an
  // optimal completion.
  std::vector<int> trial(d);
  for (std::size_t j = 0; j + 1 < d; ++j) {
    std::vector<char> taken(d, 0);
    for (std::size_t c = 0; c < j; ++c) taken[images[c]] = 1;
    for (std::size_t r = 0; r < d; ++r) {
      if (taken[r]) continue;
      if (static_cast<int>(r) == images[j]) break;  // current solution already optimal here
      std::copy(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(j), trial.begin());
      trial[j] = static_cast<int>(r);
      detail::complete_assignment(q, trial, j + 1);
      if (assignment_score(q, trial) >= floor) {
        images = trial;
        break;
      }
    }
  }
  return Permutation(std::move(images));
}

/// How the global alignment in hamming_loss is searched.
enum class AlignmentSearch {
  exhaustive,  // enumerate all d! global permutations; d <= 8
  mode,        // most frequent relative permutation; any d
};

inline constexpr std::size_t kExhaustiveAlignmentCap = 8;

/// min over P of (1/n) #{ j : est_j != truth_j * P^T }.
inline double hamming_loss(std::span<const Permutation> est, std::span<const Permutation> truth,
                           AlignmentSearch search = AlignmentSearch::exhaustive) {
  detail::require(!est.empty() && est.size() == truth.size(), "hamming_loss: length mismatch");
  const std::size_t d = truth[0].size();
  for (std::size_t j = 0; j < est.size(); ++j)
    detail::require(est[j].size() == d && truth[j].size() == d, "hamming_loss: dimension mismatch");
  const auto n = static_cast<double>(est.size());

  if (search == AlignmentSearch::mode) {
    // est_j = truth_j * P^{-1}  <=>  inverse(truth_j) * est_j = P^{-1}, so the
    // best alignment is the most frequent relative permutation.
    std::map<std::vector<int>, std::size_t> counts;
    std::size_t best = 0;
    for (std::size_t j = 0; j < est.size(); ++j)
      best = std::max(best, ++counts[compose(inverse(truth[j]), est[j]).images()]);
    return static_cast<double>(est.size() - best) / n;
  }

  detail::require(d <= kExhaustiveAlignmentCap,
                  "hamming_loss: d above the exhaustive cap; opt in to AlignmentSearch::mode");
  std::vector<int> p(d);
  std::iota(p.begin(), p.end(), 0);
  std::size_t best = 0;
  do {
    const Permutation p_inv = inverse(Permutation(p));
    std::size_t hits = 0;
    for (std::size_t j = 0; j < est.size(); ++j)
      if (est[j] == compose(truth[j], p_inv)) ++hits;
    best = std::max(best, hits);
  } while (std::next_permutation(p.begin(), p.end()));
  return static_cast<double>(est.size() - best) / n;
}

/// Parses "[i0,i1,...]" or a bare comma list.
inline Permutation parse_permutation(std::string_view text) {
  std::vector<int> images;
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(token, &pos);
    } catch (const std::exception&) {
      throw FormatError("bad permutation entry '" + token + "'");
    }
    if (pos != token.size()) throw FormatError("bad permutation entry '" + token + "'");
    images.push_back(v);
    token.clear();
  };
  for (char c : text) {
    if (c == '[' || c == ']' || c == ' ') continue;
    if (c == ',') {
      flush();
    } else {
      token += c;
    }
  }
  flush();
  try {
    return Permutation(std::move(images));
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
}

}  // namespace permsync
