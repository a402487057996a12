// Apache License, Version 2.0, refer to LICENSE.txt

#include <catch2/catch_amalgamated.hpp>
#include <latproc/core.hpp>
#include <latproc/dirichlet.hpp>

#include "helpers.hpp"

using namespace latproc;
using latproc::testing::dir;
using latproc::testing::random_position;
using latproc::testing::vec;
using Catch::Approx;

TEST_CASE("dot_product on fixed pairs", "[core]") {
  CHECK(dot_product(LatentPosition(vec({1, 0})), LatentPosition(vec({0, 1}))) ==
        0.0);
  CHECK(dot_product(LatentPosition(vec({0.5, 0.5})),
                    LatentPosition(vec({0.5, 0.5}))) == Approx(0.5));
  CHECK(dot_product(LatentPosition(vec({0.6, 0.3})),
                    LatentPosition(vec({0.2, 0.4}))) == Approx(0.24));
  CHECK_THROWS_AS(
      dot_product(LatentPosition(vec({0.5, 0.5})), LatentPosition(vec({1.0}))),
      invalid_input);
}

TEST_CASE("attribute_probs on fixed pairs", "[core]") {
  Vec p = attribute_probs(LatentPosition(vec({0.6, 0.3})),
                          LatentPosition(vec({0.2, 0.4})));
  REQUIRE(p.size() == 3);
  CHECK(p[0] == Approx(0.76));
  CHECK(p[1] == Approx(0.12));
  CHECK(p[2] == Approx(0.12));

  p = attribute_probs(LatentPosition(vec({0, 0})), LatentPosition(vec({0.5, 0.5})));
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 0.0);
  CHECK(p[2] == 0.0);

  p = attribute_probs(LatentPosition(vec({1, 0})), LatentPosition(vec({1, 0})));
  CHECK(p[0] == 0.0);
  CHECK(p[1] == 1.0);
  CHECK(p[2] == 0.0);
}

TEST_CASE("simplex validation and clamping", "[core]") {
  CHECK_THROWS_AS(LatentPosition(vec({-0.01, 0.5})), invalid_input);
  CHECK_THROWS_AS(LatentPosition(vec({0.7, 0.5})), invalid_input);
  // Boundary slack within tolerance is accepted and clamped.
  LatentPosition p(vec({-1e-13, 0.5}));
  CHECK(p.coords()[0] == 0.0);
  LatentPosition q(vec({0.5, 0.5 + 1e-13}));
  CHECK(q.coords().sum() <= 1.0);

  CHECK_THROWS_AS(DirichletParams(vec({1.0, 0.0, 1.0})), invalid_input);
  CHECK_THROWS_AS(DirichletParams(vec({1.0, -2.0, 1.0})), invalid_input);
  CHECK_THROWS_AS(DirichletParams(vec({1.0})), invalid_input);
}

TEST_CASE("dot_product and attribute_probs invariants", "[core]") {
  Rng rng = make_rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const int K = 1 + static_cast<int>(trial % 5);
    LatentPosition x = random_position(K, rng);
    LatentPosition y = random_position(K, rng);
    const double d = dot_product(x, y);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    Vec p = attribute_probs(x, y);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.sum() == Approx(1.0).margin(1e-12));
    CHECK(p[0] == Approx(1.0 - d).margin(1e-12));
  }
}

TEST_CASE("sample_latent matches Dirichlet moments", "[core]") {
  Rng rng = make_rng(11);
  const int draws = 1000000;

  SECTION("uniform alpha: mean -> alpha_k / alpha_bar") {
    DirichletParams a = dir({1, 1, 1});
    Vec mean = Vec::Zero(2);
    for (int i = 0; i < draws; ++i) mean += sample_latent(a, rng).coords();
    mean /= draws;
    // Component variance 1*2/(9*4) = 1/18; 3 standard errors.
    const double tol = 3.0 * std::sqrt((1.0 / 18.0) / draws);
    CHECK(mean[0] == Approx(1.0 / 3.0).margin(tol));
    CHECK(mean[1] == Approx(1.0 / 3.0).margin(tol));
  }

  SECTION("huge alpha_1 concentrates at the simplex vertex") {
    DirichletParams a = dir({1e6, 1, 1});
    Vec mean = Vec::Zero(2);
    for (int i = 0; i < 2000; ++i) mean += sample_latent(a, rng).coords();
    mean /= 2000;
    CHECK(mean[0] > 0.999);
    CHECK(mean[1] < 1e-3);
  }

  SECTION("alpha (2,2,2): component variance 2/63") {
    DirichletParams a = dir({2, 2, 2});
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double x = sample_latent(a, rng).coords()[0];
      s1 += x;
      s2 += x * x;
    }
    const double var = s2 / draws - (s1 / draws) * (s1 / draws);
    CHECK(var == Approx(2.0 / 63.0).margin(3e-4));
  }
}

TEST_CASE("expected_dot closed form and Monte Carlo", "[core]") {
  CHECK(expected_dot(dir({1, 1, 1}), dir({1, 1, 1})) == Approx(2.0 / 9.0));

  // Degenerate at a shared simplex vertex.
  CHECK(expected_dot(dir({1e12, 1e-6}), dir({1e12, 1e-6})) == Approx(1.0));
  // Mass on the (K+1)st component is excluded from the dot product.
  CHECK(expected_dot(dir({1e-6, 1e-6, 1e9}), dir({1e-6, 1e-6, 1e9})) ==
        Approx(0.0).margin(1e-12));

  Rng rng = make_rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    DirichletParams a = latproc::testing::random_dirichlet(3, rng);
    DirichletParams b = latproc::testing::random_dirichlet(3, rng);
    const int draws = 1000000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double d =
          dot_product(sample_latent(a, rng), sample_latent(b, rng));
      sum += d;
      sumsq += d * d;
    }
    const double mc = sum / draws;
    const double sd = std::sqrt(sumsq / draws - mc * mc);
    CHECK(expected_dot(a, b) == Approx(mc).margin(3.0 * sd / std::sqrt(draws)));
  }
}

TEST_CASE("event log validation", "[core]") {
  EventLog log;
  log.n = 3;
  log.T = 10.0;
  log.K = 2;
  log.mode = EdgeMode::attributed;
  log.events = {{1.0, 1, 2, 1}, {2.0, 2, 3, 2}};
  CHECK_NOTHROW(validate_event_log(log));

  EventLog bad = log;
  bad.events[0].u = bad.events[0].v;
  CHECK_THROWS_AS(validate_event_log(bad), invalid_input);
  bad = log;
  bad.events[0].t = 3.0;  // unsorted
  CHECK_THROWS_AS(validate_event_log(bad), invalid_input);
  bad = log;
  bad.events[1].attr = 3;
  CHECK_THROWS_AS(validate_event_log(bad), invalid_input);

  CHECK_THROWS_AS(validate_window(ChangeWindow{5.0, 5.0}, 10.0), invalid_input);
  CHECK_THROWS_AS(validate_window(ChangeWindow{-1.0, 5.0}, 10.0), invalid_input);
  CHECK_THROWS_AS(validate_subset(VertexSubset::of({1, 2, 3}), 3), invalid_input);
  CHECK_THROWS_AS(validate_subset(VertexSubset::of({}), 3), invalid_input);
  CHECK_NOTHROW(validate_subset(VertexSubset::of({3, 1}), 4));
}
