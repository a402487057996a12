// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include "latproc/generator.hpp"
#include "latproc/selection.hpp"

namespace latproc {

struct StudyConfig {
  int replicates = 50;
  std::vector<double> lambda_grid;  // empty: use each scenario's lambda
  EMConfig em;
  std::uint64_t master_seed = 1;
  int threads = 1;
};

// Aggregated metrics for one scenario x lambda grid point.
// sensitivity/specificity/cp_error are averaged over the replicates
// that rejected homogeneity; NaN when none did.
struct StudyRow {
  std::string scenario;
  int n = 0;
  int m = 0;
  double lambda = 0.0;
  double avg_edges_per_pair = 0.0;
  double power = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double cp_error = 0.0;
  int replicates = 0;
  int failures = 0;
};

namespace detail {

struct ReplicateOutcome {
  bool ok = false;
  bool rejected = false;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double cp_error = 0.0;
  double edges_per_pair = 0.0;
};

inline ReplicateOutcome run_replicate(const ScenarioConfig& scenario,
                                      const EMConfig& em_template,
                                      std::uint64_t seed) {
  ReplicateOutcome out;
  ScenarioConfig sc = scenario;
  sc.seed = seed;
  const EventLog log = simulate(sc);
  out.edges_per_pair =
      log.size() / latproc::detail::choose2(static_cast<double>(sc.n));
  if (log.size() < 2) return out;  // counted as a failure upstream

  const double unit = em_template.time_unit > 0.0 ? em_template.time_unit
                                                  : log.T / 100.0;
  EMConfig em = em_template;
  em.lambda = fix_lambda(log, unit);

  Rng rng = make_rng(seed, 1);
  const HomogeneousFit hom = fit_homogeneous(log, em.lambda);
  const FitResult het = fit(log, em, rng);
  const SelectionReport rep = bic_compare(log, hom, het);

  out.ok = true;
  out.rejected = rep.decision == Decision::heterogeneous;
  if (out.rejected) {
    const auto truth_mask = sc.subset.mask(sc.n);
    const auto est_mask = het.model.subset.mask(sc.n);
    int hit = 0, correct_out = 0;
    for (int v = 1; v <= sc.n; ++v) {
      if (truth_mask[static_cast<std::size_t>(v)]) {
        hit += est_mask[static_cast<std::size_t>(v)] ? 1 : 0;
      } else {
        correct_out += est_mask[static_cast<std::size_t>(v)] ? 0 : 1;
      }
    }
    out.sensitivity = static_cast<double>(hit) / sc.subset.size();
    out.specificity =
        static_cast<double>(correct_out) / (sc.n - sc.subset.size());
    out.cp_error = (std::abs(sc.window.tau1 - het.model.window.tau1) +
                    std::abs(sc.window.tau2 - het.model.window.tau2)) /
                   2.0;
  }
  return out;
}

}  // namespace detail

/*
 * The simulation protocol: for every scenario x lambda grid point,
 * generate `replicates` independent datasets, fit the homogeneous and
 * heterogeneous models, and aggregate rejection power plus the
 * subset/window recovery metrics.  Replicate seeds derive from the
 * master seed by counter, so results are reproducible and replicates
 * may run in parallel.
 */
inline std::vector<StudyRow> run_study(const std::vector<ScenarioConfig>& scenarios,
                                       int replicates, const StudyConfig& cfg) {
  if (replicates < 1) throw invalid_input("run_study: replicates >= 1");
  std::vector<StudyRow> rows;
  std::uint64_t grid_index = 0;
  for (const ScenarioConfig& base : scenarios) {
    std::vector<double> lambdas =
        cfg.lambda_grid.empty() ? std::vector<double>{base.lambda} : cfg.lambda_grid;
    for (double lambda : lambdas) {
      ScenarioConfig sc = base;
      sc.lambda = lambda;

      std::vector<detail::ReplicateOutcome> outcomes(
          static_cast<std::size_t>(replicates));
      auto worker = [&](int lo, int hi) {
        for (int r = lo; r < hi; ++r) {
          const std::uint64_t seed =
              mix_seed(cfg.master_seed, grid_index * 1000003ULL +
                                            static_cast<std::uint64_t>(r));
          try {
            outcomes[static_cast<std::size_t>(r)] =
                detail::run_replicate(sc, cfg.em, seed);
          } catch (const std::exception&) {
            outcomes[static_cast<std::size_t>(r)] = {};
          }
        }
      };
      const int threads = std::max(1, cfg.threads);
      if (threads == 1) {
        worker(0, replicates);
      } else {
        std::vector<std::thread> pool;
        const int chunk = (replicates + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
          const int lo = t * chunk;
          const int hi = std::min(replicates, lo + chunk);
          if (lo < hi) pool.emplace_back(worker, lo, hi);
        }
        for (auto& th : pool) th.join();
      }

      StudyRow row;
      row.scenario = sc.name;
      row.n = sc.n;
      row.m = sc.subset.size();
      row.lambda = lambda;
      row.replicates = replicates;
      int ok = 0, rejected = 0;
      double edges = 0.0, sens = 0.0, spec = 0.0, cp = 0.0;
      for (const auto& oc : outcomes) {
        if (!oc.ok) {
          ++row.failures;
          continue;
        }
        ++ok;
        edges += oc.edges_per_pair;
        if (oc.rejected) {
          ++rejected;
          sens += oc.sensitivity;
          spec += oc.specificity;
          cp += oc.cp_error;
        }
      }
      row.avg_edges_per_pair = ok > 0 ? edges / ok : 0.0;
      row.power = ok > 0 ? static_cast<double>(rejected) / ok : 0.0;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.sensitivity = rejected > 0 ? sens / rejected : nan;
      row.specificity = rejected > 0 ? spec / rejected : nan;
      row.cp_error = rejected > 0 ? cp / rejected : nan;
      rows.push_back(std::move(row));
      ++grid_index;
    }
  }
  return rows;
}

}  // namespace latproc
