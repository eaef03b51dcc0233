#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "permsync/cluster.hpp"
#include "permsync/model.hpp"
#include "permsync/spectrum.hpp"
#include "permsync/sync.hpp"

using namespace permsync;

namespace {

ModelParams params(std::size_t n, std::size_t d, double p, double sigma, std::uint64_t seed,
                   TruthMode mode = TruthMode::uniform_random) {
  ModelParams m;
  m.n = n;
  m.d = d;
  m.p = p;
  m.sigma = sigma;
  m.seed = seed;
  m.truth_mode = mode;
  return m;
}

EigOptions eig_seed(std::uint64_t seed) {
  EigOptions o;
  o.seed = seed;
  return o;
}

ClusterConfig cluster_seed(std::uint64_t seed) {
  ClusterConfig c;
  c.seed = seed;
  return c;
}

Eigen::MatrixXd random_orthogonal(Eigen::Index d, std::uint64_t seed) {
  CounterRng rng(seed);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

}  // namespace

TEST(Method, Names) {
  EXPECT_EQ(parse_method("vanilla"), Method::vanilla);
  EXPECT_EQ(parse_method("anchored"), Method::anchored);
  EXPECT_EQ(to_string(Method::anchored), "anchored");
  EXPECT_THROW(parse_method("other"), InvalidArgument);
}

TEST(Vanilla, NoiselessExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = generate(params(8, 2, 1.0, 0.0, seed));
    const auto est = vanilla_estimate(top_eigenpairs(inst, 2));
    EXPECT_TRUE(est.perms[0].is_identity());
    EXPECT_EQ(hamming_loss(est.perms, inst.truth()), 0.0);
  }
}

TEST(Vanilla, SingleObject) {
  Eigenspace es;
  es.u = random_orthogonal(3, 1);
  es.lambdas = {1, 1, 1};
  es.residuals = {0, 0, 0};
  es.block_dim = 3;
  const auto est = vanilla_estimate(es);
  ASSERT_EQ(est.perms.size(), 1u);
  EXPECT_TRUE(est.perms[0].is_identity());
}

TEST(Vanilla, MatchesDefinition) {
  const Instance inst = generate(params(30, 3, 0.5, 1.0, 4));
  const auto es = top_eigenpairs(inst, 3);
  const auto est = vanilla_estimate(es);
  for (std::size_t j = 1; j < 30; ++j)
    EXPECT_EQ(est.perms[j], project_to_permutation(block_row(es, j) * block_row(es, 0).transpose()));
}

TEST(Anchored, NoiselessExact) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = generate(params(16, 2, 1.0, 0.0, seed));
    const auto es = top_eigenpairs(inst, 2);
    const auto est = anchored_estimate(es, build_anchor(es, cluster_seed(seed)));
    EXPECT_EQ(hamming_loss(est.perms, inst.truth()), 0.0);
  }
}

TEST(Anchored, MatchesDefinitionWithoutSpecialFirstBlock) {
  const Instance inst = generate(params(30, 3, 0.5, 1.0, 5));
  const auto es = top_eigenpairs(inst, 3);
  const auto anchor = build_anchor(es, cluster_seed(5));
  const auto est = anchored_estimate(es, anchor);
  for (std::size_t j = 0; j < 30; ++j)
    EXPECT_EQ(est.perms[j], project_to_permutation(block_row(es, j) * anchor.m.transpose()));
}

TEST(Anchored, DegenerateAnchorReproducesVanilla) {
  const Instance inst = generate(params(12, 3, 1.0, 0.0, 2, TruthMode::all_identity));
  const auto es = top_eigenpairs(inst, 3);
  Anchor anchor;
  anchor.m = std::sqrt(12.0) * block_row(es, 0);
  const auto anchored = anchored_estimate(es, anchor);
  const auto vanilla = vanilla_estimate(es);
  EXPECT_EQ(hamming_loss(anchored.perms, vanilla.perms), 0.0);
}

TEST(Anchored, RejectsMismatchedAnchor) {
  const auto es = top_eigenpairs(generate(params(10, 2, 1.0, 0.0, 1)), 2);
  Anchor anchor;
  anchor.m = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(anchored_estimate(es, anchor), InvalidArgument);
}

TEST(Estimators, Deterministic) {
  const Instance inst = generate(params(60, 2, 0.5, 2.0, 3));
  const auto a = top_eigenpairs(inst, 2, eig_seed(1));
  const auto b = top_eigenpairs(inst, 2, eig_seed(1));
  EXPECT_EQ(vanilla_estimate(a).perms, vanilla_estimate(b).perms);
  EXPECT_EQ(anchored_estimate(a, build_anchor(a, cluster_seed(2))).perms,
            anchored_estimate(b, build_anchor(b, cluster_seed(2))).perms);
}

TEST(Estimators, GaugeInvariance) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = generate(params(80, 3, 0.5, 2.5, seed));
    const auto es = top_eigenpairs(inst, 3);
    Eigenspace rotated = es;
    rotated.u = es.u * random_orthogonal(3, seed + 100);
    const auto& truth = inst.truth();
    EXPECT_EQ(hamming_loss(vanilla_estimate(es).perms, truth), hamming_loss(vanilla_estimate(rotated).perms, truth));
    const auto cfg = cluster_seed(seed);
    EXPECT_EQ(hamming_loss(anchored_estimate(es, build_anchor(es, cfg)).perms, truth),
              hamming_loss(anchored_estimate(rotated, build_anchor(rotated, cfg)).perms, truth));
  }
}

TEST(Anchored, RelabelingObjectsPermutesEstimates) {
  const Instance inst = generate(params(40, 2, 0.5, 2.0, 8));
  const auto es = top_eigenpairs(inst, 2);
  const auto anchor = build_anchor(es, cluster_seed(8));
  const auto est = anchored_estimate(es, anchor);
  std::vector<std::size_t> pi(40);
  std::iota(pi.begin(), pi.end(), 0);
  std::reverse(pi.begin(), pi.end());
  Eigenspace moved = es;
  std::vector<Permutation> moved_truth(40);
  for (std::size_t j = 0; j < 40; ++j) {
    moved.u.middleRows(static_cast<Eigen::Index>(2 * j), 2) = block_row(es, pi[j]);
    moved_truth[j] = inst.truth()[pi[j]];
  }
  const auto moved_est = anchored_estimate(moved, anchor);
  for (std::size_t j = 0; j < 40; ++j) EXPECT_EQ(moved_est.perms[j], est.perms[pi[j]]);
  EXPECT_EQ(hamming_loss(moved_est.perms, moved_truth), hamming_loss(est.perms, inst.truth()));
}

TEST(PopulationEigenspace, IdentityTruth) {
  const std::vector<Permutation> truth(9, Permutation::identity(2));
  const Eigen::MatrixXd u = population_eigenspace(truth);
  for (Eigen::Index j = 0; j < 9; ++j)
    EXPECT_EQ(u.middleRows(2 * j, 2), Eigen::MatrixXd::Identity(2, 2) / 3.0);
  EXPECT_LE((u.transpose() * u - Eigen::MatrixXd::Identity(2, 2)).norm(), 1e-15);
}

TEST(Diagnostics, NoiselessIsExact) {
  const Instance inst = generate(params(50, 3, 1.0, 0.0, 6));
  const auto es = top_eigenpairs(inst, 3);
  const auto anchor = build_anchor(es, cluster_seed(6));
  const auto diag = compute_diagnostics(es, inst.truth(), &anchor);
  EXPECT_LE(diag.global_err, 1e-7);
  EXPECT_LE(diag.blockwise_err, 1e-7);
  EXPECT_LE(diag.h_orth_defect, 1e-7);
  ASSERT_TRUE(diag.anchor_err.has_value());
  EXPECT_LE(*diag.anchor_err, 1e-7);
  ASSERT_TRUE(diag.gap.has_value());
  EXPECT_NEAR(*diag.gap, 50.0, 1e-8);
}

TEST(Diagnostics, AgainstDirectComputation) {
  const Instance inst = generate(params(40, 2, 0.5, 1.5, 7));
  const auto es = top_eigenpairs(inst, 2);
  const auto anchor = build_anchor(es, cluster_seed(7));
  const auto diag = compute_diagnostics(es, inst.truth(), &anchor);

  Eigen::MatrixXd u_star = Eigen::MatrixXd::Zero(80, 2);
  for (Eigen::Index j = 0; j < 40; ++j) u_star.middleRows(2 * j, 2) = inst.truth()[j].matrix() / std::sqrt(40.0);
  const Eigen::MatrixXd h = es.u.transpose() * u_star;
  EXPECT_LE((diag.h - h).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::MatrixXd diff = es.u * h - u_star;
  EXPECT_NEAR(diag.global_err, Eigen::JacobiSVD<Eigen::MatrixXd>(diff).singularValues()(0), 1e-12);
  double block_max = 0.0;
  for (Eigen::Index j = 0; j < 40; ++j)
    block_max = std::max(block_max, Eigen::JacobiSVD<Eigen::MatrixXd>(diff.middleRows(2 * j, 2)).singularValues()(0));
  EXPECT_NEAR(diag.blockwise_err, block_max, 1e-12);

  // Polar factor of H is the nearest orthogonal matrix in operator norm.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd polar = svd.matrixU() * svd.matrixV().transpose();
  EXPECT_NEAR(diag.h_orth_defect, Eigen::JacobiSVD<Eigen::MatrixXd>(h - polar).singularValues()(0), 1e-12);

  Eigen::MatrixXd swap(2, 2);
  swap << 0, 1, 1, 0;
  const double direct = std::min((anchor.m - h.transpose()).norm(), (anchor.m - swap * h.transpose()).norm());
  EXPECT_NEAR(*diag.anchor_err, direct, 1e-12);
  EXPECT_NEAR(*diag.gap, es.lambdas[1] - *es.next_lambda, 0.0);
}

TEST(Diagnostics, BlockwiseBoundedByGlobal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = generate(params(60, 2, 0.5, 3.0, seed));
    const auto es = top_eigenpairs(inst, 2);
    const auto diag = compute_diagnostics(es, inst.truth());
    EXPECT_LE(diag.blockwise_err, diag.global_err);
    EXPECT_GE(diag.blockwise_err, 0.0);
    EXPECT_GE(diag.h_orth_defect, 0.0);
    EXPECT_FALSE(diag.anchor_err.has_value());
  }
}

TEST(Diagnostics, RequiresMatchingTruth) {
  const Instance inst = generate(params(10, 2, 1.0, 0.0, 1));
  const auto es = top_eigenpairs(inst, 2);
  EXPECT_THROW(compute_diagnostics(es, {}), InvalidArgument);
  const std::vector<Permutation> short_truth(inst.truth().begin(), inst.truth().begin() + 5);
  EXPECT_THROW(compute_diagnostics(es, short_truth), InvalidArgument);
}

TEST(Diagnostics, AnchorCloseToRotationAtModerateNoise) {
  const Instance inst = generate(params(1024, 2, 0.5, 0.3, 10));
  const auto es = top_eigenpairs(inst, 2, eig_seed(10));
  const auto anchor = build_anchor(es, cluster_seed(10));
  const auto diag = compute_diagnostics(es, inst.truth(), &anchor);
  EXPECT_LE(*diag.anchor_err, 0.2);
}

TEST(Diagnostics, ErrorsShrinkAsNGrows) {
  // Recorded trend: both errors decrease when n quadruples.
  double global[2] = {0, 0}, block[2] = {0, 0};
  const std::size_t ns[2] = {256, 1024};
  for (int i = 0; i < 2; ++i)
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Instance inst = generate(params(ns[i], 2, 0.5, 0.5, seed));
      const auto diag = compute_diagnostics(top_eigenpairs(inst, 2), inst.truth());
      EXPECT_LE(diag.blockwise_err, diag.global_err);
      global[i] += diag.global_err;
      block[i] += diag.blockwise_err;
    }
  EXPECT_LT(global[1], global[0]);
  EXPECT_LT(block[1], block[0]);
}
