// Apache License, Version 2.0, refer to LICENSE.txt
//
// Brute-force likelihood oracle used by the tests.  It re-derives the
// marginal log-likelihood from the generative description: per-event
// edge/attribute probabilities are estimated by Monte Carlo over latent
// draws (never from the closed-form mean ratios the library uses), and
// the unobserved-opportunity part is summed explicitly as a truncated
// Poisson series per exposure class.

#pragma once

#include <cmath>
#include <latproc/dirichlet.hpp>
#include <latproc/generator.hpp>

namespace latproc::testing {

struct McTable {
  // rows: endpoint-group pairs (0,0), (0,1), (1,1); cols: attributes.
  Mat attr;      // 3 x K estimates of E[x^(k) y^(k)]
  Vec q;         // 3 realization probabilities (row sums)
};

inline McTable mc_table(const DirichletParams& a0, const DirichletParams& a1,
                        int draws, Rng& rng) {
  const int K = a0.K();
  McTable t;
  t.attr = Mat::Zero(3, K);
  t.q = Vec::Zero(3);
  const DirichletParams* pairs[3][2] = {{&a0, &a0}, {&a0, &a1}, {&a1, &a1}};
  for (int row = 0; row < 3; ++row) {
    for (int s = 0; s < draws; ++s) {
      const Vec x = sample_dirichlet(*pairs[row][0], rng);
      const Vec y = sample_dirichlet(*pairs[row][1], rng);
      for (int k = 0; k < K; ++k) t.attr(row, k) += x[k] * y[k];
    }
    t.attr.row(row) /= static_cast<double>(draws);
    t.q[row] = t.attr.row(row).sum();
  }
  return t;
}

// log sum_{M=0}^{cap} (1-q)^(M-Nbar) gamma^M e^(-gamma) / M!, the
// printed Poisson series for one exposure class.
inline double log_poisson_series(double gamma, double q, double nbar) {
  if (gamma <= 0.0) return 0.0;  // no exposure: only the empty term
  const double log1mq = std::log1p(-q);
  const int cap = static_cast<int>(
      std::ceil(gamma + 12.0 * std::sqrt(gamma) + nbar + 60.0));
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(static_cast<std::size_t>(cap) + 1);
  for (int M = 0; M <= cap; ++M) {
    const double t = (M - nbar) * log1mq + M * std::log(gamma) - gamma -
                     std::lgamma(M + 1.0);
    terms[static_cast<std::size_t>(M)] = t;
    max_term = std::max(max_term, t);
  }
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - max_term);
  return max_term + std::log(sum);
}

/*
 * Full oracle: classifies each observed event by its endpoint groups
 * (re-deriving the indicators from scratch), looks its probability up
 * in the Monte Carlo table, and adds the per-class Poisson series for
 * the unobserved opportunities.  Proportionality constants are dropped
 * exactly as in the library evaluation.
 */
inline double oracle_loglik(const EventLog& log, const ChangeWindow& window,
                            const VertexSubset& subset,
                            const DirichletParams& a0, const DirichletParams& a1,
                            double lambda, int draws, Rng& rng) {
  const McTable table = mc_table(a0, a1, draws, rng);

  std::vector<bool> member(static_cast<std::size_t>(log.n) + 1, false);
  for (int v : subset.members) member[static_cast<std::size_t>(v)] = true;

  double nbar[3] = {0.0, 0.0, 0.0};
  double ll = 0.0;
  for (const EdgeEvent& e : log.events) {
    const bool s = e.t > window.tau1 && e.t <= window.tau2;
    const int gu = (s && member[static_cast<std::size_t>(e.u)]) ? 1 : 0;
    const int gv = (s && member[static_cast<std::size_t>(e.v)]) ? 1 : 0;
    const int cls = gu + gv;
    nbar[cls] += 1.0;
    const double p = log.attributed() ? table.attr(cls, e.attr - 1)
                                      : table.q[cls];
    ll += std::log(p);
  }

  // Exposure rates re-derived from the generative description: class-0
  // pairs are exposed out of the window plus the non-anomalous pair
  // fraction inside it.
  const double all_pairs = log.n * (log.n - 1) / 2.0;
  const int m = subset.size();
  const double out_pairs = (log.n - m) * (log.n - m - 1) / 2.0;
  const double anom_pairs = m * (m - 1) / 2.0;
  const double len = window.tau2 - window.tau1;
  double gamma[3];
  gamma[0] = lambda * (log.T - len + len * out_pairs / all_pairs);
  gamma[2] = lambda * len * anom_pairs / all_pairs;
  gamma[1] = lambda * log.T - gamma[0] - gamma[2];

  for (int cls = 0; cls < 3; ++cls) {
    ll += log_poisson_series(gamma[cls], table.q[cls], nbar[cls]);
  }
  return ll;
}

}  // namespace latproc::testing
