// Apache License, Version 2.0, refer to LICENSE.txt

#include <catch2/catch_amalgamated.hpp>
#include <latproc/init.hpp>

#include "helpers.hpp"

using namespace latproc;
using latproc::testing::dir;
using latproc::testing::toy_scenario;
using Catch::Approx;

namespace {

// Jaccard similarity between two vertex subsets.
double jaccard(const VertexSubset& a, const VertexSubset& b) {
  std::vector<int> inter, uni;
  std::set_intersection(a.members.begin(), a.members.end(), b.members.begin(),
                        b.members.end(), std::back_inserter(inter));
  std::set_union(a.members.begin(), a.members.end(), b.members.begin(),
                 b.members.end(), std::back_inserter(uni));
  return uni.empty() ? 0.0 : static_cast<double>(inter.size()) / uni.size();
}

ScenarioConfig orthogonal_scenario(int n, double lambda, EdgeMode mode,
                                   std::uint64_t seed) {
  ScenarioConfig sc = toy_scenario(n, lambda, mode, seed);
  sc.alpha0 = dir({1e6, 1e-6, 1e-6});
  sc.alpha1 = dir({1e-6, 1e6, 1e-6});
  return sc;
}

}  // namespace

TEST_CASE("augment_diagonal fixed points", "[init]") {
  SECTION("zero matrix stays zero") {
    MultiAdjacency a{Mat::Zero(5, 5), ChangeWindow{0.0, 1.0}};
    CHECK(augment_diagonal(a, 2).isZero(0.0));
  }

  SECTION("complete multigraph converges to the rank-1 diagonal") {
    const int n = 8;
    const double c = 3.0;
    MultiAdjacency a{c * (Mat::Ones(n, n) - Mat::Identity(n, n)),
                     ChangeWindow{0.0, 1.0}};
    Mat atilde = augment_diagonal(a, 1, 1e-10);
    for (int i = 0; i < n; ++i) CHECK(atilde(i, i) == Approx(c).margin(1e-6));
    // Off-diagonal entries are untouched, bit for bit.
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) CHECK(atilde(i, j) == a.counts(i, j));
      }
    }
  }

  SECTION("per-iteration diagonal change decreases") {
    ScenarioConfig sc = toy_scenario(12, 60.0, EdgeMode::unattributed, 7);
    sc.alpha1 = sc.alpha0;
    EventLog log = simulate(sc);
    MultiAdjacency a = build_multiadjacency(log, ChangeWindow{0.0, log.T});
    // Negative tolerance: the iteration count is exactly max_iters.
    std::vector<double> deltas;
    Mat prev = augment_diagonal(a, 2, -1.0, 1);
    for (int iters = 2; iters <= 6; ++iters) {
      Mat next = augment_diagonal(a, 2, -1.0, iters);
      deltas.push_back((next.diagonal() - prev.diagonal()).cwiseAbs().maxCoeff());
      prev = next;
    }
    for (std::size_t i = 1; i < deltas.size(); ++i) {
      CHECK(deltas[i] <= deltas[i - 1] + 1e-12);
    }
  }

  SECTION("non-symmetric input is rejected") {
    Mat bad = Mat::Zero(3, 3);
    bad(0, 1) = 1.0;
    CHECK_THROWS_AS(augment_diagonal({bad, ChangeWindow{0.0, 1.0}}, 1),
                    invalid_input);
  }
}

TEST_CASE("ls_positions recovers exact low-rank structure", "[init]") {
  // Orthogonal rows with distinct norms: vertices 1-3 live on the first
  // component, 4-6 on the second, so the eigendecomposition returns the
  // planted configuration up to sign.
  Mat x_true = Mat::Zero(2, 6);
  x_true(0, 0) = 0.5;
  x_true(0, 1) = 0.4;
  x_true(0, 2) = 0.3;
  x_true(1, 3) = 0.45;
  x_true(1, 4) = 0.35;
  x_true(1, 5) = 0.20;
  const double b = 2.0;
  Mat atilde = b * (x_true.transpose() * x_true);

  auto positions = ls_positions(atilde, b, 2);
  REQUIRE(positions.size() == 6);
  Mat x_hat(2, 6);
  for (int j = 0; j < 6; ++j) {
    x_hat.col(j) = positions[static_cast<std::size_t>(j)].coords();
  }
  CHECK((b * (x_hat.transpose() * x_hat) - atilde).norm() < 1e-8);

  CHECK_THROWS_AS(ls_positions(atilde, b, 7), invalid_input);
  CHECK_THROWS_AS(ls_positions(atilde, 0.0, 2), invalid_input);
}

TEST_CASE("ls_positions beats a random-search oracle", "[init]") {
  Rng rng = make_rng(91);
  ScenarioConfig sc = toy_scenario(6, 40.0, EdgeMode::unattributed, 5);
  EventLog log = simulate(sc);
  MultiAdjacency a = build_multiadjacency(log, ChangeWindow{0.0, log.T});
  Mat atilde = augment_diagonal(a, 2);
  const double b = sc.lambda * log.T / 15.0;

  Mat x_hat(2, 6);
  auto positions = ls_positions(atilde, b, 2);
  for (int j = 0; j < 6; ++j) {
    x_hat.col(j) = positions[static_cast<std::size_t>(j)].coords();
  }
  const double objective =
      (b * (x_hat.transpose() * x_hat) - atilde).squaredNorm();

  double best_random = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial) {
    Mat x(2, 6);
    for (int j = 0; j < 6; ++j) {
      x.col(j) = latproc::testing::random_position(2, rng).coords();
    }
    best_random = std::min(
        best_random, (b * (x.transpose() * x) - atilde).squaredNorm());
  }
  CHECK(objective <= best_random);
}

TEST_CASE("ls_positions of the zero matrix is the origin", "[init]") {
  auto positions = ls_positions(Mat::Zero(4, 4), 1.0, 2);
  for (const auto& p : positions) CHECK(p.coords().isZero(0.0));
}

TEST_CASE("ls_positions output stays inside the simplex", "[init]") {
  for (int trial = 0; trial < 20; ++trial) {
    ScenarioConfig sc =
        toy_scenario(10, 30.0 + 10.0 * trial, EdgeMode::unattributed,
                     static_cast<std::uint64_t>(trial));
    EventLog log = simulate(sc);
    MultiAdjacency a = build_multiadjacency(log, ChangeWindow{0.0, log.T});
    Mat atilde = augment_diagonal(a, 2);
    auto positions = ls_positions(atilde, 0.5 + trial * 0.2, 2);
    for (const auto& p : positions) {
      CHECK(p.coords().minCoeff() >= 0.0);
      CHECK(p.coords().sum() <= 1.0);
    }
  }
}

TEST_CASE("candidate segments tile the horizon", "[init]") {
  ScenarioConfig sc = toy_scenario(10, 80.0, EdgeMode::attributed, 3);
  EventLog log = simulate(sc);
  InitConfig cfg;
  cfg.r = 5;
  auto candidates = candidate_subsets(log, cfg, sc.lambda);
  REQUIRE(candidates.size() == 5);  // dense log: every segment has events
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    CHECK(candidates[j].segment.tau1 ==
          Approx(static_cast<double>(j) * log.T / 5.0));
    CHECK(candidates[j].segment.tau2 ==
          Approx(static_cast<double>(j + 1) * log.T / 5.0));
    CHECK_NOTHROW(validate_subset(candidates[j].subset, log.n));
  }

  InitConfig bad;
  bad.r = 1;
  CHECK_THROWS_AS(candidate_subsets(log, bad, sc.lambda), invalid_input);
}

TEST_CASE("planted subgroups are found in window segments", "[init]") {
  for (EdgeMode mode : {EdgeMode::attributed, EdgeMode::unattributed}) {
    int hits = 0;
    const int seeds = 10;
    for (int seed = 0; seed < seeds; ++seed) {
      ScenarioConfig sc = orthogonal_scenario(
          20, 120.0, mode, 1000 + static_cast<std::uint64_t>(seed));
      EventLog log = simulate(sc);
      InitConfig cfg;  // r = 5: segment 3 = (40, 60] lies inside (30, 70)
      auto candidates = candidate_subsets(log, cfg, sc.lambda);
      for (const auto& cand : candidates) {
        if (cand.segment.tau1 >= 30.0 && cand.segment.tau2 <= 70.0 &&
            jaccard(cand.subset, sc.subset) >= 0.8) {
          ++hits;
          break;
        }
      }
    }
    INFO((mode == EdgeMode::attributed ? "attributed" : "unattributed"));
    CHECK(hits >= seeds - 2);
  }
}

TEST_CASE("best_start picks the argmax candidate", "[init]") {
  ScenarioConfig sc = orthogonal_scenario(20, 120.0, EdgeMode::attributed, 55);
  EventLog log = simulate(sc);

  SECTION("singleton candidate is returned unchanged") {
    std::vector<SubsetCandidate> one = {
        {ChangeWindow{40.0, 60.0}, VertexSubset::of({1, 2, 3, 4})}};
    StartPoint sp = best_start(log, one, sc.lambda);
    CHECK(sp.window.tau1 == 40.0);
    CHECK(sp.window.tau2 == 60.0);
    CHECK(sp.subset.members == one[0].subset.members);
    CHECK_FALSE(sp.fallback);
  }

  SECTION("returned likelihood dominates every candidate") {
    auto candidates = candidate_subsets(log, InitConfig{}, sc.lambda);
    REQUIRE(!candidates.empty());
    StartPoint sp = best_start(log, candidates, sc.lambda);
    for (const auto& cand : candidates) {
      std::vector<SubsetCandidate> single = {cand};
      StartPoint other = best_start(log, single, sc.lambda);
      CHECK(sp.loglik >= other.loglik - 1e-9);
    }
  }

  SECTION("true planted candidate is selected across seeds") {
    int chosen = 0;
    const int seeds = 20;
    for (int seed = 0; seed < seeds; ++seed) {
      ScenarioConfig plant = orthogonal_scenario(
          20, 120.0, EdgeMode::attributed,
          7000 + static_cast<std::uint64_t>(seed));
      EventLog data = simulate(plant);
      std::vector<SubsetCandidate> candidates = {
          {ChangeWindow{0.0, 20.0}, VertexSubset::of({5, 9, 13})},
          {ChangeWindow{40.0, 60.0}, plant.subset},  // the truth
          {ChangeWindow{60.0, 80.0}, VertexSubset::of({2, 11, 17, 19})},
      };
      StartPoint sp = best_start(data, candidates, plant.lambda);
      if (sp.subset.members == plant.subset.members && sp.window.tau1 == 40.0) {
        ++chosen;
      }
    }
    CHECK(chosen >= 16);
  }

  SECTION("empty candidate list falls back, flagged") {
    StartPoint sp = best_start(log, {}, sc.lambda);
    CHECK(sp.fallback);
    CHECK(sp.window.tau1 == Approx(log.T / 4.0));
    CHECK(sp.window.tau2 == Approx(3.0 * log.T / 4.0));
    CHECK(sp.subset.size() == log.n / 10);
    CHECK_NOTHROW(validate_subset(sp.subset, log.n));
  }
}
