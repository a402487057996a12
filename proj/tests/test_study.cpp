// Apache License, Version 2.0, refer to LICENSE.txt

#include <catch2/catch_amalgamated.hpp>
#include <latproc/study.hpp>

#include "helpers.hpp"

using namespace latproc;
using Catch::Approx;

namespace {

ScenarioConfig scenario_by_name(const std::string& name) {
  for (const auto& sc : paper_scenarios()) {
    if (sc.name == name) return sc;
  }
  throw std::runtime_error("missing scenario " + name);
}

}  // namespace

TEST_CASE("single-replicate rows are the replicate's own values", "[study]") {
  ScenarioConfig sc = scenario_by_name("sep-large-n50");
  StudyConfig cfg;
  cfg.master_seed = 99;
  auto rows = run_study({sc}, 1, cfg);
  REQUIRE(rows.size() == 1);
  const StudyRow& r = rows[0];
  CHECK(r.replicates == 1);
  CHECK(r.failures == 0);
  CHECK(r.n == 50);
  CHECK(r.m == 10);
  CHECK((r.power == 0.0 || r.power == 1.0));
  CHECK(r.avg_edges_per_pair > 0.0);
  if (r.power == 1.0) {
    CHECK(r.sensitivity >= 0.0);
    CHECK(r.sensitivity <= 1.0);
    CHECK(r.specificity >= 0.0);
    CHECK(r.specificity <= 1.0);
    CHECK(r.cp_error >= 0.0);
  } else {
    CHECK(std::isnan(r.sensitivity));
  }
}

TEST_CASE("study results are deterministic in the master seed", "[study]") {
  ScenarioConfig sc = scenario_by_name("sep-large-n50");
  StudyConfig cfg;
  cfg.master_seed = 4242;
  cfg.em.max_iters = 20;
  auto a = run_study({sc}, 3, cfg);
  auto b = run_study({sc}, 3, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].power == b[i].power);
    CHECK((a[i].sensitivity == b[i].sensitivity ||
           (std::isnan(a[i].sensitivity) && std::isnan(b[i].sensitivity))));
    CHECK(a[i].avg_edges_per_pair == b[i].avg_edges_per_pair);
  }

  // Worker threads only change scheduling, not results.
  StudyConfig threaded = cfg;
  threaded.threads = 2;
  auto c = run_study({sc}, 3, threaded);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].power == c[i].power);
    CHECK(a[i].avg_edges_per_pair == c[i].avg_edges_per_pair);
  }
}

TEST_CASE("null scenario rarely rejects", "[study]") {
  ScenarioConfig sc = scenario_by_name("sep-large-n50");
  sc.alpha1 = sc.alpha0;  // no planted change
  StudyConfig cfg;
  cfg.master_seed = 7;
  cfg.em.max_iters = 40;
  auto rows = run_study({sc}, 10, cfg);
  REQUIRE(rows.size() == 1);
  CHECK(std::isfinite(rows[0].power));
  CHECK(rows[0].power < 0.5);
}

TEST_CASE("power is non-decreasing in the separation angle", "[study]") {
  // Three scenarios at n = 50 and a shared lambda; 50 replicates each.
  // One inversion within two Monte Carlo standard errors is allowed.
  std::vector<ScenarioConfig> scenarios = {
      scenario_by_name("sep-small-n50"),
      scenario_by_name("sep-medium-n50"),
      scenario_by_name("sep-large-n50"),
  };
  StudyConfig cfg;
  cfg.master_seed = 2026;
  cfg.lambda_grid = {130.0};
  const int reps = 50;
  auto rows = run_study(scenarios, reps, cfg);
  REQUIRE(rows.size() == 3);
  INFO("powers: " << rows[0].power << " " << rows[1].power << " "
                  << rows[2].power);
  int inversions = 0;
  for (int i = 1; i < 3; ++i) {
    if (rows[static_cast<std::size_t>(i)].power <
        rows[static_cast<std::size_t>(i) - 1].power) {
      ++inversions;
      const double p = rows[static_cast<std::size_t>(i) - 1].power;
      const double se = std::sqrt(std::max(p * (1.0 - p), 0.25 / reps) / reps);
      CHECK(rows[static_cast<std::size_t>(i)].power >= p - 2.0 * se);
    }
  }
  CHECK(inversions <= 1);
}
