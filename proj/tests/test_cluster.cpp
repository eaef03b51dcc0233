#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "permsync/cluster.hpp"
#include "permsync/model.hpp"
#include "permsync/spectrum.hpp"

using namespace permsync;

namespace {

ClusterConfig config(std::uint64_t seed, std::size_t restarts = 10) {
  ClusterConfig c;
  c.seed = seed;
  c.restarts = restarts;
  return c;
}

// Global k = 2 optimum by enumerating every labelling.
double exhaustive_two_means(const Eigen::MatrixXd& pts) {
  const auto m = pts.rows();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << m); ++mask) {
    Eigen::RowVectorXd mean[2] = {Eigen::RowVectorXd::Zero(pts.cols()), Eigen::RowVectorXd::Zero(pts.cols())};
    int count[2] = {0, 0};
    for (Eigen::Index i = 0; i < m; ++i) {
      const int g = (mask >> i) & 1u;
      mean[g] += pts.row(i);
      ++count[g];
    }
    mean[0] /= count[0];
    mean[1] /= count[1];
    double obj = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) obj += (pts.row(i) - mean[(mask >> i) & 1u]).squaredNorm();
    best = std::min(best, obj);
  }
  return best;
}

Eigenspace noiseless_eigenspace(std::size_t n, std::size_t d, TruthMode mode, std::uint64_t seed = 0) {
  ModelParams p;
  p.n = n;
  p.d = d;
  p.truth_mode = mode;
  p.seed = seed;
  return top_eigenpairs(generate(p), d);
}

}  // namespace

TEST(ClusterConfig, Validation) {
  ClusterConfig c;
  c.restarts = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.max_iters = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.rel_tol = -1;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(DMeans, RepeatedLocationsRecoveredExactly) {
  Eigen::MatrixXd pts(30, 2);
  const double locs[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  for (Eigen::Index i = 0; i < 30; ++i) pts.row(i) << locs[i % 3][0], locs[i % 3][1];
  const auto cl = d_means(pts, 3, config(1));
  EXPECT_EQ(cl.objective, 0.0);
  for (const auto& loc : locs) {
    bool found = false;
    for (Eigen::Index c = 0; c < 3; ++c) found |= cl.centers(c, 0) == loc[0] && cl.centers(c, 1) == loc[1];
    EXPECT_TRUE(found);
  }
}

TEST(DMeans, IdenticalPoints) {
  const Eigen::MatrixXd pts = Eigen::MatrixXd::Constant(12, 2, 0.5);
  const auto cl = d_means(pts, 3, config(2));
  EXPECT_EQ(cl.objective, 0.0);
  for (Eigen::Index c = 0; c < 3; ++c) EXPECT_EQ(cl.centers.row(c), pts.row(0));
  EXPECT_TRUE(cl.converged);
}

// Lloyd can stall in a local optimum, so unstructured inputs only need to hit
// the optimum most of the time; separated inputs must hit it every time.
TEST(DMeans, MatchesExhaustiveOptimumOnTinyInputs) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CounterRng rng(seed);
    Eigen::MatrixXd pts(8, 2);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
    const auto cl = d_means(pts, 2, config(seed));
    const double best = exhaustive_two_means(pts);
    EXPECT_GE(cl.objective, best - 1e-9);
    hits += cl.objective <= best + 1e-9;

    Eigen::MatrixXd sep = pts;
    sep.topRows(4).array() += 6.0;
    EXPECT_NEAR(d_means(sep, 2, config(seed)).objective, exhaustive_two_means(sep), 1e-9);
  }
  EXPECT_GE(hits, 45);
}

TEST(DMeans, ObjectiveConsistentAndCentersAreMeans) {
  CounterRng rng(5);
  Eigen::MatrixXd pts(200, 3);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal() + (i % 4 == 0 ? 4.0 : 0.0);
  const auto cl = d_means(pts, 3, config(5));
  EXPECT_NEAR(cl.objective, detail::kmeans_objective(pts, cl.centers, cl.labels), 1e-9 * cl.objective);
  for (Eigen::Index c = 0; c < 3; ++c) {
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(3);
    int count = 0;
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      if (cl.labels[i] == c) {
        sum += pts.row(i);
        ++count;
      }
    ASSERT_GT(count, 0);
    EXPECT_LE((cl.centers.row(c) - sum / count).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DMeans, LloydTraceIsMonotone) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed);
    Eigen::MatrixXd pts(300, 2);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
    const auto cl = d_means(pts, 4, config(seed, 1));
    for (std::size_t t = 1; t < cl.trace.size(); ++t) EXPECT_LE(cl.trace[t], cl.trace[t - 1] + 1e-12);
  }
}

TEST(DMeans, RestartDominance) {
  CounterRng rng(3);
  Eigen::MatrixXd pts(150, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
  const auto cl = d_means(pts, 5, config(3, 8));
  ASSERT_EQ(cl.restart_objectives.size(), 8u);
  for (double o : cl.restart_objectives) EXPECT_LE(cl.objective, o);
  EXPECT_EQ(cl.objective, cl.restart_objectives[cl.best_restart]);
  // Ties go to the lowest restart index.
  for (std::size_t r = 0; r < cl.best_restart; ++r) EXPECT_GT(cl.restart_objectives[r], cl.objective);
}

TEST(DMeans, Deterministic) {
  CounterRng rng(4);
  Eigen::MatrixXd pts(100, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
  const auto a = d_means(pts, 3, config(11));
  const auto b = d_means(pts, 3, config(11));
  EXPECT_EQ(a.centers, b.centers);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(DMeans, LabelGaugeFreedom) {
  CounterRng rng(6);
  Eigen::MatrixXd pts(60, 2);
  for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = rng.normal();
  const auto cl = d_means(pts, 3, config(6));
  const std::vector<int> relabel{2, 0, 1};
  Eigen::MatrixXd centers(3, 2);
  std::vector<int> labels(cl.labels.size());
  for (int c = 0; c < 3; ++c) centers.row(relabel[c]) = cl.centers.row(c);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = relabel[cl.labels[i]];
  EXPECT_NEAR(detail::kmeans_objective(pts, centers, labels), cl.objective, 1e-12);
}

TEST(DMeans, Errors) {
  EXPECT_THROW(d_means(Eigen::MatrixXd::Zero(2, 2), 3), InvalidArgument);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(4, 2);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(d_means(bad, 2), InvalidArgument);
}

TEST(BuildAnchor, NoiselessAnchorIsOrthogonal) {
  const auto es = noiseless_eigenspace(16, 2, TruthMode::all_identity);
  // The 32 rows take exactly two distinct values.
  std::vector<Eigen::RowVectorXd> distinct;
  for (Eigen::Index i = 0; i < es.u.rows(); ++i) {
    bool seen = false;
    for (const auto& v : distinct) seen |= (v - es.u.row(i)).cwiseAbs().maxCoeff() < 1e-10;
    if (!seen) distinct.push_back(es.u.row(i));
  }
  EXPECT_EQ(distinct.size(), 2u);
  const auto anchor = build_anchor(es, config(1));
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_LE((anchor.m.transpose() * anchor.m - id).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((anchor.m * anchor.m.transpose() - id).cwiseAbs().maxCoeff(), 1e-8);
  for (Eigen::Index r = 0; r < 2; ++r) EXPECT_NEAR(anchor.m.row(r).norm(), 1.0, 1e-8);
  EXPECT_FALSE(anchor.empty_cluster);
}

TEST(BuildAnchor, NoiselessRandomTruthRowsHaveUnitNorm) {
  const auto es = noiseless_eigenspace(20, 3, TruthMode::uniform_random, 4);
  const auto anchor = build_anchor(es, config(2));
  for (Eigen::Index r = 0; r < 3; ++r) EXPECT_NEAR(anchor.m.row(r).norm(), 1.0, 1e-8);
  EXPECT_NEAR(anchor.clustering_objective, 0.0, 1e-12);
}

TEST(BuildAnchor, OneDimensionalCollapse) {
  const auto es = noiseless_eigenspace(9, 1, TruthMode::all_identity);
  const auto anchor = build_anchor(es, config(3));
  ASSERT_EQ(anchor.m.rows(), 1);
  EXPECT_NEAR(std::abs(anchor.m(0, 0)), 1.0, 1e-8);
  EXPECT_NEAR(anchor.m(0, 0), std::sqrt(9.0) * es.u.mean(), 1e-12);
}

TEST(BuildAnchor, ScaleIsRootN) {
  const auto es = noiseless_eigenspace(25, 2, TruthMode::uniform_random, 7);
  const auto cl = d_means(es.u, 2, config(9));
  const auto anchor = build_anchor(es, config(9));
  EXPECT_EQ(anchor.m, 5.0 * cl.centers);
}
