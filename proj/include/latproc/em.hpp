// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "latproc/dirichlet.hpp"
#include "latproc/init.hpp"
#include "latproc/likelihood.hpp"
#include "latproc/nelder_mead.hpp"

namespace latproc {

// Gradient-ascent controls for the unattributed M-step.
struct StepConfig {
  double initial_step = 0.1;
  double backtrack = 0.5;
  int max_inner = 20;
  int max_sweeps = 40;
  double position_floor = 1e-6;
};

struct EMConfig {
  int num_candidates = 5000;  // candidate intervals per E-step
  double xi = 0.5;            // membership threshold
  int max_iters = 100;
  double rel_tol = 1e-4;
  StepConfig step;
  double membership_prior = 0.5;
  double lambda = 0.0;     // 0: fix from the data via fix_lambda
  double time_unit = 0.0;  // 0: T/100
  InitConfig init;
};

struct TraceEntry {
  double tau1 = 0.0, tau2 = 0.0;
  int subset_size = 0;
  double loglik = kNegInf;
};

struct FitDiagnostics {
  int degenerate_esteps = 0;
  int membership_fixups = 0;
  int mstep_fallbacks = 0;
  int mstep_skips = 0;
};

struct FitResult {
  PartitionModel model;
  double loglik = kNegInf;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceEntry> trace;
  FitDiagnostics diagnostics;
};

// Resolves the rate/mean non-identifiability: lambda is pinned to 1.5x
// the maximum number of events observed in any bin of length `unit`,
// expressed per time unit.
inline double fix_lambda(const EventLog& log, double unit) {
  if (log.events.empty()) throw invalid_input("fix_lambda: empty log");
  if (!(unit > 0.0)) throw invalid_input("fix_lambda: unit must be positive");
  const int bins = std::max(1, static_cast<int>(std::ceil(log.T / unit)));
  std::vector<int> count(static_cast<std::size_t>(bins), 0);
  for (const EdgeEvent& e : log.events) {
    // Bin b covers ((b-1)*unit, b*unit]; t = 0 lands in the first bin.
    int b = static_cast<int>(std::ceil(e.t / unit)) - 1;
    b = std::clamp(b, 0, bins - 1);
    ++count[static_cast<std::size_t>(b)];
  }
  const int max_count = *std::max_element(count.begin(), count.end());
  return 1.5 * static_cast<double>(max_count) / unit;
}

// ---------------------------------------------------------------------------
// E-step: change window.

struct WindowEstimate {
  ChangeWindow window;
  bool degenerate = false;
};

/*
 * Stochastic approximation to E[(tau1, tau2) | data]: samples
 * cfg.num_candidates pairs uniformly on (0,T)^2, orders each, weights
 * them by the conditional likelihood (log-sum-exp normalized) and
 * returns the weighted mean.  If every candidate has zero posterior
 * mass the current window is kept and flagged.
 */
inline WindowEstimate estep_window(const EventLog& log, const VertexSubset& subset,
                                   const DirichletParams& alpha0,
                                   const DirichletParams& alpha1, double lambda,
                                   const EMConfig& cfg, Rng& rng,
                                   const ChangeWindow& current = ChangeWindow{}) {
  if (cfg.num_candidates < 1) throw invalid_input("estep_window: Z >= 1 required");
  const WindowScanner scanner(log, subset, lambda);
  const LikelihoodTerms lt = likelihood_terms(alpha0, alpha1);
  const bool attributed = log.attributed();

  std::uniform_real_distribution<double> unif(0.0, log.T);
  std::vector<double> t1(static_cast<std::size_t>(cfg.num_candidates));
  std::vector<double> t2(static_cast<std::size_t>(cfg.num_candidates));
  std::vector<double> logw(static_cast<std::size_t>(cfg.num_candidates));
  double max_logw = kNegInf;
  for (int z = 0; z < cfg.num_candidates; ++z) {
    double a = unif(rng), b = unif(rng);
    if (b < a) std::swap(a, b);
    if (a == b) b = std::nextafter(b, log.T);  // degenerate draw
    t1[static_cast<std::size_t>(z)] = a;
    t2[static_cast<std::size_t>(z)] = b;
    const SufficientStats st = scanner.stats(ChangeWindow{a, b});
    const double ll = attributed ? loglik_attributed_terms(st, lt)
                                 : loglik_unattributed_terms(st, lt);
    logw[static_cast<std::size_t>(z)] = ll;
    max_logw = std::max(max_logw, ll);
  }
  if (!std::isfinite(max_logw)) return {current, true};

  double wsum = 0.0, e1 = 0.0, e2 = 0.0;
  for (int z = 0; z < cfg.num_candidates; ++z) {
    const double w = std::exp(logw[static_cast<std::size_t>(z)] - max_logw);
    wsum += w;
    e1 += w * t1[static_cast<std::size_t>(z)];
    e2 += w * t2[static_cast<std::size_t>(z)];
  }
  ChangeWindow est{e1 / wsum, e2 / wsum};
  if (!(est.tau1 < est.tau2)) return {current, true};
  return {est, false};
}

// ---------------------------------------------------------------------------
// E-step: membership.

/*
 * Posterior membership probability for each vertex: the likelihood
 * ratio of including vs excluding the vertex, holding all other
 * memberships fixed, combined with a flat prior.  Incident events are
 * re-classified incrementally, so one sweep costs O(N + n).
 */
inline std::vector<double> membership_probabilities(
    const EventLog& log, const ChangeWindow& window, const VertexSubset& prev,
    const DirichletParams& alpha0, const DirichletParams& alpha1, double lambda,
    double prior = 0.5) {
  validate_window(window, log.T);
  const auto mask = prev.mask(log.n);
  const LikelihoodTerms lt = likelihood_terms(alpha0, alpha1);
  const bool attributed = log.attributed();

  // Base counts under `prev`.
  SufficientStats base = compute_stats(log, window, prev, lambda);

  // In-window events incident to each vertex, as (other-endpoint
  // membership, attribute).
  std::vector<std::vector<std::pair<std::uint8_t, int>>> incident(
      static_cast<std::size_t>(log.n) + 1);
  for (const EdgeEvent& e : log.events) {
    if (!window.contains(e.t)) continue;
    incident[static_cast<std::size_t>(e.u)].push_back(
        {mask[static_cast<std::size_t>(e.v)], e.attr});
    incident[static_cast<std::size_t>(e.v)].push_back(
        {mask[static_cast<std::size_t>(e.u)], e.attr});
  }

  const int m_prev = prev.size();
  std::vector<double> probs(static_cast<std::size_t>(log.n) + 1, 0.0);
  SufficientStats st = base;
  for (int i = 1; i <= log.n; ++i) {
    const int c = mask[static_cast<std::size_t>(i)];
    double lls[2];  // 0: i excluded, 1: i included
    for (int assume = 0; assume < 2; ++assume) {
      st = base;
      if (assume != c) {
        for (const auto& [w, attr] : incident[static_cast<std::size_t>(i)]) {
          const int from = c + w, to = assume + w;
          (from == 0 ? st.nbar0 : from == 1 ? st.nbar1 : st.nbar2) -= 1.0;
          (to == 0 ? st.nbar0 : to == 1 ? st.nbar1 : st.nbar2) += 1.0;
          if (attributed) {
            (from == 0 ? st.n0 : from == 1 ? st.n1 : st.n2)[attr - 1] -= 1.0;
            (to == 0 ? st.n0 : to == 1 ? st.n1 : st.n2)[attr - 1] += 1.0;
          }
        }
      }
      const int m = m_prev - c + assume;
      exposure_rates(log.n, m, log.T, lambda, window.length(), st.gamma0,
                     st.gamma1, st.gamma2);
      lls[assume] = attributed ? loglik_attributed_terms(st, lt)
                               : loglik_unattributed_terms(st, lt);
    }
    double p;
    if (lls[1] == kNegInf && lls[0] == kNegInf) {
      p = prior;
    } else if (lls[1] == kNegInf) {
      p = 0.0;
    } else if (lls[0] == kNegInf) {
      p = 1.0;
    } else {
      double delta = lls[1] - lls[0];
      // Exact ties (alpha0 = alpha1) reduce to rounding noise between
      // the two evaluation orders; snap those to the prior.
      if (std::abs(delta) < 1e-9 * (1.0 + std::abs(lls[0]))) delta = 0.0;
      p = 1.0 / (1.0 + ((1.0 - prior) / prior) * std::exp(-delta));
    }
    probs[static_cast<std::size_t>(i)] = p;
  }
  probs.erase(probs.begin());  // 0-based: probs[v-1]
  return probs;
}

struct MembershipEstimate {
  VertexSubset subset;
  std::vector<double> probs;  // probs[v-1]
  bool fixed_up = false;
};

inline MembershipEstimate estep_membership(const EventLog& log,
                                           const ChangeWindow& window,
                                           const VertexSubset& prev,
                                           const DirichletParams& alpha0,
                                           const DirichletParams& alpha1,
                                           double lambda, const EMConfig& cfg) {
  MembershipEstimate out;
  out.probs = membership_probabilities(log, window, prev, alpha0, alpha1, lambda,
                                       cfg.membership_prior);
  std::vector<int> members;
  for (int v = 1; v <= log.n; ++v) {
    if (out.probs[static_cast<std::size_t>(v) - 1] > cfg.xi) members.push_back(v);
  }
  // Keep the subset proper: flip the single best/worst vertex if the
  // threshold empties or fills it.  When every probability ties there
  // is no vertex to prefer and the previous membership is kept.
  const auto [pmin, pmax] = std::minmax_element(out.probs.begin(), out.probs.end());
  const bool no_information = *pmin == *pmax;
  if (members.empty()) {
    out.fixed_up = true;
    if (no_information) {
      out.subset = prev;
      return out;
    }
    members.push_back(
        static_cast<int>(pmax - out.probs.begin()) + 1);
  } else if (static_cast<int>(members.size()) == log.n) {
    out.fixed_up = true;
    if (no_information) {
      out.subset = prev;
      return out;
    }
    std::erase(members, static_cast<int>(pmin - out.probs.begin()) + 1);
  }
  out.subset = VertexSubset::of(std::move(members));
  return out;
}

// ---------------------------------------------------------------------------
// M-step, attributed (closed-form updates with numerical fallback).

namespace detail {

// Softmax-with-remainder parameterization of the open simplex interior.
inline Vec rho_from_logits(const Vec& w) {
  const double m = std::max(0.0, w.maxCoeff());
  double den = std::exp(-m);
  Vec e(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    e[k] = std::exp(w[k] - m);
    den += e[k];
  }
  return e / den;
}

inline Vec logits_from_rho(Vec rho) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < rho.size(); ++k) {
    rho[k] = std::max(rho[k], 1e-9);
    sum += rho[k];
  }
  if (sum > 1.0 - 1e-9) rho *= (1.0 - 1e-9) / sum;
  const double rem = 1.0 - rho.sum();
  Vec w(rho.size());
  for (Eigen::Index k = 0; k < rho.size(); ++k) w[k] = std::log(rho[k] / rem);
  return w;
}

// Numerical maximization of the likelihood over one group's mean
// vector, the other held fixed.  `group` selects rho0 (0) or rho1 (1).
inline Vec maximize_block_mean(const SufficientStats& st, bool attributed,
                               const Vec& start, const Vec& other, int group,
                               int max_evals = 4000) {
  auto objective = [&](const Vec& w) {
    const Vec rho = rho_from_logits(w);
    return group == 0 ? loglik_means(st, attributed, rho, other)
                      : loglik_means(st, attributed, other, rho);
  };
  NelderMeadResult res =
      nelder_mead_maximize(objective, logits_from_rho(start), 0.5, max_evals);
  // One refinement pass from the found point.
  res = nelder_mead_maximize(objective, res.x, 0.05, max_evals / 2);
  return rho_from_logits(res.x);
}

// Gradient of the attributed likelihood w.r.t. one group's mean vector.
inline Vec block_gradient_attributed(const SufficientStats& st, const Vec& rho0,
                                     const Vec& rho1, int group) {
  const int K = static_cast<int>(rho0.size());
  const double q0 = rho0.squaredNorm();
  const double q1 = rho0.dot(rho1);
  const double q2 = rho1.squaredNorm();
  Vec g(K);
  for (int k = 0; k < K; ++k) {
    if (group == 0) {
      g[k] = (2.0 * st.n0[k] + st.n1[k]) / std::max(rho0[k], 1e-300) -
             2.0 * rho0[k] * (st.gamma0 - st.nbar0) / (1.0 - q0) -
             rho1[k] * (st.gamma1 - st.nbar1) / (1.0 - q1);
    } else {
      g[k] = (2.0 * st.n2[k] + st.n1[k]) / std::max(rho1[k], 1e-300) -
             2.0 * rho1[k] * (st.gamma2 - st.nbar2) / (1.0 - q2) -
             rho0[k] * (st.gamma1 - st.nbar1) / (1.0 - q1);
    }
  }
  return g;
}

}  // namespace detail

// Printed closed-form update for the baseline group.  Returns nullopt
// when any resulting component is nonpositive or non-finite.
inline std::optional<DirichletParams> closed_form_alpha0(
    const SufficientStats& st, const DirichletParams& alpha0_prev,
    const DirichletParams& alpha1_prev) {
  const int K = alpha0_prev.K();
  const double abar0 = alpha0_prev.total();
  const Vec mu1 = alpha1_prev.mean();
  if (!(st.gamma0 > 0.0) || st.nbar0 <= 0.0) return std::nullopt;
  Vec alpha(K + 1);
  double head_sum = 0.0;
  for (int k = 0; k < K; ++k) {
    const double b = st.gamma1 * mu1[k];
    const double disc = b * b + 8.0 * st.gamma0 * (st.n0[k] + st.n1[k]);
    alpha[k] = abar0 * (std::sqrt(disc) - b) / (2.0 * st.gamma0);
    head_sum += alpha[k];
  }
  alpha[K] = abar0 * (std::sqrt(head_sum) / (st.nbar0 / st.gamma0) - head_sum);
  for (int k = 0; k <= K; ++k) {
    if (!(alpha[k] > 0.0) || !std::isfinite(alpha[k])) return std::nullopt;
  }
  return DirichletParams(alpha);
}

// Printed closed-form update for the anomalous group.
inline std::optional<DirichletParams> closed_form_alpha1(
    const SufficientStats& st, const DirichletParams& alpha0_prev,
    const DirichletParams& alpha1_prev) {
  const int K = alpha1_prev.K();
  const double abar1 = alpha1_prev.total();
  const Vec mu0 = alpha0_prev.mean();
  if (!(st.gamma2 > 0.0) || !(st.gamma1 != 0.0) || st.nbar1 <= 0.0) {
    return std::nullopt;
  }
  Vec alpha(K + 1);
  double head_sum = 0.0;
  for (int k = 0; k < K; ++k) {
    const double b = st.gamma1 * mu0[k];
    const double disc = b * b + 8.0 * st.gamma2 * (st.n2[k] + st.n1[k]);
    alpha[k] = abar1 * (std::sqrt(disc) - b) / (2.0 * st.gamma2);
    head_sum += alpha[k];
  }
  alpha[K] = abar1 * (std::sqrt(head_sum) / (st.nbar1 / st.gamma1) - head_sum);
  for (int k = 0; k <= K; ++k) {
    if (!(alpha[k] > 0.0) || !std::isfinite(alpha[k])) return std::nullopt;
  }
  return DirichletParams(alpha);
}

struct MStepResult {
  DirichletParams alpha0;
  DirichletParams alpha1;
  bool fallback0 = false;
  bool fallback1 = false;
  bool skipped1 = false;
};

/*
 * Conditional maximization over the two Dirichlet parameter blocks.
 * Each printed closed-form candidate is accepted only if it passes a
 * stationarity (gradient) check and does not lower the likelihood;
 * otherwise the block falls back to a numerical coordinate
 * maximization.  The likelihood never decreases.
 */
inline MStepResult mstep_attributed(const SufficientStats& st,
                                    const DirichletParams& alpha0_prev,
                                    const DirichletParams& alpha1_prev) {
  MStepResult out{alpha0_prev, alpha1_prev};
  const Vec rho0_prev = alpha0_prev.mean_latent();
  const Vec rho1_prev = alpha1_prev.mean_latent();

  auto accept_block = [&](int group, const std::optional<DirichletParams>& cand,
                          const Vec& prev_rho, const Vec& other_rho,
                          bool& fellback) -> Vec {
    const double ll_prev = group == 0
                               ? loglik_means(st, true, prev_rho, other_rho)
                               : loglik_means(st, true, other_rho, prev_rho);
    if (cand) {
      const Vec rho = cand->mean_latent();
      const double ll = group == 0 ? loglik_means(st, true, rho, other_rho)
                                   : loglik_means(st, true, other_rho, rho);
      if (std::isfinite(ll) && ll >= ll_prev) {
        const Vec g = group == 0
                          ? detail::block_gradient_attributed(st, rho, other_rho, 0)
                          : detail::block_gradient_attributed(st, other_rho, rho, 1);
        const double scale = 1.0 + std::abs(ll);
        if (g.cwiseAbs().maxCoeff() <= 1e-3 * scale) return rho;
      }
    }
    fellback = true;
    Vec rho = detail::maximize_block_mean(st, true, prev_rho, other_rho, group);
    const double ll = group == 0 ? loglik_means(st, true, rho, other_rho)
                                 : loglik_means(st, true, other_rho, rho);
    if (!(ll >= ll_prev)) rho = prev_rho;  // safeguard: never decrease
    return rho;
  };

  // Both blocks condition on the previous iterate, as printed.
  const auto cand0 = closed_form_alpha0(st, alpha0_prev, alpha1_prev);
  const Vec rho0_new = accept_block(0, cand0, rho0_prev, rho1_prev, out.fallback0);

  Vec rho1_new = rho1_prev;
  if (st.gamma2 <= 0.0) {
    out.skipped1 = true;  // no anomalous exposure: alpha1 not updatable
  } else {
    const auto cand1 = closed_form_alpha1(st, alpha0_prev, alpha1_prev);
    rho1_new = accept_block(1, cand1, rho1_prev, rho0_prev, out.fallback1);
  }

  // Keep the previous concentration scale; the likelihood pins only the
  // mean vectors.
  out.alpha0 = alpha_from_mean(rho0_new, alpha0_prev.total());
  out.alpha1 = alpha_from_mean(rho1_new, alpha1_prev.total());

  // Joint safeguard (M-step monotonicity).
  const double ll_new = loglik_means(st, true, out.alpha0.mean_latent(),
                                     out.alpha1.mean_latent());
  const double ll_prev = loglik_means(st, true, rho0_prev, rho1_prev);
  if (!(ll_new >= ll_prev - 1e-9)) {
    out.alpha0 = alpha0_prev;
    out.alpha1 = alpha1_prev;
  }
  return out;
}

// ---------------------------------------------------------------------------
// M-step, unattributed (latent-position gradient ascent).

namespace detail {

// Splits the multiadjacency by the printed indicator: Acheck collects
// events that are out-of-window or fully outside the subset; Adot is
// the remainder.
inline void split_multiadjacency(const EventLog& log, const ChangeWindow& window,
                                 const VertexSubset& subset, Mat& a_check,
                                 Mat& a_dot) {
  a_check = Mat::Zero(log.n, log.n);
  a_dot = Mat::Zero(log.n, log.n);
  const auto mask = subset.mask(log.n);
  for (const EdgeEvent& e : log.events) {
    const bool s = window.contains(e.t);
    const bool baseline =
        !s || (!mask[static_cast<std::size_t>(e.u)] &&
               !mask[static_cast<std::size_t>(e.v)]);
    Mat& target = baseline ? a_check : a_dot;
    target(e.u - 1, e.v - 1) += 1.0;
    target(e.v - 1, e.u - 1) += 1.0;
  }
}

// Per-vertex ascent objective: edge terms against the relevant
// multiadjacency slice plus the truncated Dirichlet density term.
// Scaled by 1/N as printed.
inline double vertex_objective(const Mat& x, const Mat& adj, int i,
                               const Vec& eta, double scale) {
  const Eigen::Index n = x.cols();
  double g = 0.0;
  for (Eigen::Index u = 0; u < n; ++u) {
    if (u == i || adj(i, u) == 0.0) continue;
    const double d = x.col(i).dot(x.col(u));
    if (d <= 0.0) return kNegInf;
    g += adj(i, u) * std::log(d);
  }
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    if (x(k, i) <= 0.0) return kNegInf;
    g += (eta[k] - 1.0) * std::log(x(k, i));
  }
  return g / scale;
}

// Analytic gradient of vertex_objective w.r.t. x.col(i).
inline Vec vertex_gradient(const Mat& x, const Mat& adj, int i, const Vec& eta,
                           double scale) {
  const Eigen::Index n = x.cols();
  Vec g = Vec::Zero(x.rows());
  for (Eigen::Index u = 0; u < n; ++u) {
    if (u == i || adj(i, u) == 0.0) continue;
    const double d = std::max(x.col(i).dot(x.col(u)), 1e-300);
    g += (adj(i, u) / d) * x.col(u);
  }
  for (Eigen::Index k = 0; k < x.rows(); ++k) {
    g[k] += (eta[k] - 1.0) / std::max(x(k, i), 1e-300);
  }
  return g / scale;
}

// Projects a column into the simplex interior with the given floor.
inline void project_interior(Vec& col, double floor) {
  double sum = 0.0;
  for (Eigen::Index k = 0; k < col.size(); ++k) {
    col[k] = std::max(col[k], floor);
    sum += col[k];
  }
  const double cap = 1.0 - floor;
  if (sum > cap) col *= cap / sum;
}

}  // namespace detail

/*
 * Appendix-style conditional maximization for the unattributed case:
 * latent positions are hill-climbed per vertex along the analytic
 * gradient (backtracking line search, simplex-interior projection)
 * against Adot for subset vertices and Acheck for the rest; Dirichlet
 * MLEs are refreshed from the positions after every sweep.  The
 * returned parameters never lower the marginal likelihood relative to
 * the previous iterate.
 */
inline MStepResult mstep_unattributed(const EventLog& log,
                                      const ChangeWindow& window,
                                      const VertexSubset& subset,
                                      const DirichletParams& alpha0_prev,
                                      const DirichletParams& alpha1_prev,
                                      double lambda, const EMConfig& cfg) {
  const int K = log.K;
  const int n = log.n;
  Mat a_check, a_dot;
  detail::split_multiadjacency(log, window, subset, a_check, a_dot);

  // Least-squares start from the full-log multiadjacency.
  MultiAdjacency full = build_multiadjacency(log, ChangeWindow{0.0, log.T});
  Mat atilde = augment_diagonal(full, K, cfg.init.tolerance);
  const double b = lambda * log.T / detail::choose2(n);
  Mat x = ls_positions_matrix(atilde, b, K);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Vec col = x.col(j);
    detail::project_interior(col, cfg.step.position_floor);
    x.col(j) = col;
  }

  const auto mask = subset.mask(n);
  const double scale = std::max<double>(log.size(), 1.0);
  DirichletParams a0 = alpha0_prev;
  DirichletParams a1 = alpha1_prev;
  Vec mean0 = a0.mean_latent(), mean1 = a1.mean_latent();

  auto refresh_mles = [&]() {
    std::vector<int> in, out;
    for (int v = 1; v <= n; ++v) {
      (mask[static_cast<std::size_t>(v)] ? in : out).push_back(v - 1);
    }
    auto mle_of = [&](const std::vector<int>& idx, const DirichletParams& keep,
                      Vec& group_mean) -> DirichletParams {
      if (idx.empty()) return keep;
      Mat pts(static_cast<Eigen::Index>(idx.size()), K + 1);
      group_mean = Vec::Zero(K);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const Vec col = x.col(idx[r]);
        pts.row(static_cast<Eigen::Index>(r)).head(K) = col.transpose();
        pts(static_cast<Eigen::Index>(r), K) = std::max(1.0 - col.sum(), 1e-10);
        group_mean += col;
      }
      group_mean /= static_cast<double>(idx.size());
      return dirichlet_mle(pts);
    };
    a0 = mle_of(out, a0, mean0);
    a1 = mle_of(in, a1, mean1);
  };

  // The marginal likelihood depends on the parameters only through the
  // group means, and the per-vertex ascent objective carries no
  // exposure counterweight, so successive sweeps can overshoot.  Every
  // sweep iterate is therefore scored as a candidate (both the
  // log-moment MLE and the empirical group means, whose Dirichlet mean
  // is unaffected by boundary-floored components) and the best pair is
  // returned; the previous iterate is the floor.
  const SufficientStats st = compute_stats(log, window, subset, lambda);
  MStepResult out{alpha0_prev, alpha1_prev};
  double best = loglik_means(st, false, alpha0_prev.mean_latent(),
                             alpha1_prev.mean_latent());
  bool improved = false;
  auto consider = [&]() {
    const DirichletParams a0_mom = alpha_from_mean(mean0, a0.total());
    const DirichletParams a1_mom = alpha_from_mean(mean1, a1.total());
    const DirichletParams* cand0[] = {&a0, &a0_mom};
    const DirichletParams* cand1[] = {&a1, &a1_mom};
    for (const DirichletParams* c0 : cand0) {
      for (const DirichletParams* c1 : cand1) {
        const double ll =
            loglik_means(st, false, c0->mean_latent(), c1->mean_latent());
        if (ll > best) {
          best = ll;
          out.alpha0 = *c0;
          out.alpha1 = *c1;
          improved = true;
        }
      }
    }
  };

  refresh_mles();
  consider();  // the least-squares start itself

  double prev_obj = kNegInf;
  for (int sweep = 0; sweep < cfg.step.max_sweeps; ++sweep) {
    for (int i = 0; i < n; ++i) {
      const bool anom = mask[static_cast<std::size_t>(i) + 1];
      const Mat& adj = anom ? a_dot : a_check;
      const Vec eta = (anom ? a1 : a0).alpha().head(K);
      Vec col = x.col(i);
      detail::project_interior(col, cfg.step.position_floor);
      x.col(i) = col;
      Vec grad = detail::vertex_gradient(x, adj, i, eta, scale);
      if (!grad.allFinite()) continue;
      const double g0 = detail::vertex_objective(x, adj, i, eta, scale);
      double step = cfg.step.initial_step;
      for (int inner = 0; inner < cfg.step.max_inner; ++inner) {
        Vec trial = x.col(i) + step * grad;
        detail::project_interior(trial, cfg.step.position_floor);
        Vec saved = x.col(i);
        x.col(i) = trial;
        const double g = detail::vertex_objective(x, adj, i, eta, scale);
        if (g > g0) break;
        x.col(i) = saved;
        step *= cfg.step.backtrack;
      }
    }
    refresh_mles();
    consider();

    double obj = 0.0;
    for (int i = 0; i < n; ++i) {
      const bool anom = mask[static_cast<std::size_t>(i) + 1];
      obj += detail::vertex_objective(x, anom ? a_dot : a_check, i,
                                      (anom ? a1 : a0).alpha().head(K), scale);
    }
    if (std::isfinite(prev_obj) &&
        std::abs(obj - prev_obj) < cfg.rel_tol * (1.0 + std::abs(prev_obj))) {
      break;
    }
    prev_obj = obj;
  }

  if (!improved) out.fallback0 = out.fallback1 = true;
  return out;
}

// ---------------------------------------------------------------------------
// Full fits.

struct HomogeneousFit {
  DirichletParams alpha;
  double loglik = kNegInf;
};

/*
 * Single-group maximum likelihood.  Unattributed: the likelihood
 * depends on alpha only through q = |rho|^2, maximized exactly at
 * q = N / (lambda T); the reported mean direction comes from the
 * least-squares positions.  Attributed: numerical maximization over
 * the mean vector from a moment start.
 */
inline HomogeneousFit fit_homogeneous(const EventLog& log, double lambda) {
  if (!(lambda > 0.0)) throw invalid_input("fit_homogeneous: lambda > 0 required");
  const int K = log.K;
  const double N = static_cast<double>(log.size());
  const double lt_total = lambda * log.T;

  if (!log.attributed()) {
    const double qhat = std::clamp(N / lt_total, 1e-8, 0.95);
    Vec dir = Vec::Constant(K, 1.0);
    if (N > 0.0) {
      MultiAdjacency full = build_multiadjacency(log, ChangeWindow{0.0, log.T});
      Mat atilde = augment_diagonal(full, K);
      Mat x = ls_positions_matrix(atilde, lt_total / detail::choose2(log.n), K);
      Vec mean = x.rowwise().mean();
      if (mean.norm() > 1e-12) dir = mean;
    }
    dir /= dir.norm();
    Vec rho = std::sqrt(qhat) * dir;
    // Keep the mean inside the open simplex; rescaling trades exactness
    // of q for feasibility only in extreme corners.
    double sum = rho.sum();
    if (sum > 1.0 - 1e-6) rho *= (1.0 - 1e-6) / sum;
    for (int k = 0; k < K; ++k) rho[k] = std::max(rho[k], 1e-9);
    DirichletParams alpha = alpha_from_mean(rho);
    return {alpha, loglik_homogeneous(log, alpha, lambda)};
  }

  Vec counts = Vec::Zero(K);
  for (const EdgeEvent& e : log.events) counts[e.attr - 1] += 1.0;
  const double qhat = std::clamp(N / lt_total, 1e-8, 0.81);
  Vec rho0(K);
  for (int k = 0; k < K; ++k) {
    const double p = (counts[k] + 0.5) / (N + 0.5 * K);
    rho0[k] = std::sqrt(qhat * p);
  }
  auto objective = [&](const Vec& w) {
    const Vec rho = detail::rho_from_logits(w);
    DirichletParams alpha = alpha_from_mean(rho);
    return loglik_homogeneous(log, alpha, lambda);
  };
  NelderMeadResult res =
      nelder_mead_maximize(objective, detail::logits_from_rho(rho0), 0.5, 4000);
  res = nelder_mead_maximize(objective, res.x, 0.05, 2000);
  DirichletParams alpha = alpha_from_mean(detail::rho_from_logits(res.x));
  return {alpha, loglik_homogeneous(log, alpha, lambda)};
}

/*
 * The stochastic conditional EM loop: window E-step, membership
 * E-step, then the mode-specific M-step, iterated until the membership
 * stabilizes, the window stops moving and the parameters settle (or
 * max_iters).  Returns the best-likelihood iterate, not the last one.
 */
inline FitResult fit(const EventLog& log, const EMConfig& cfg, Rng& rng,
                     const std::optional<StartPoint>& init = std::nullopt) {
  validate_event_log(log);
  if (log.events.empty()) throw invalid_input("fit: empty log");
  const double unit = cfg.time_unit > 0.0 ? cfg.time_unit : log.T / 100.0;
  const double lambda = cfg.lambda > 0.0 ? cfg.lambda : fix_lambda(log, unit);

  StartPoint start = init ? *init
                          : best_start(log, candidate_subsets(log, cfg.init, lambda),
                                       lambda);

  ChangeWindow window = start.window;
  VertexSubset subset = start.subset;
  DirichletParams a0 = start.alpha0;
  DirichletParams a1 = start.alpha1;

  FitResult result{PartitionModel{a0, a1, window, subset, lambda}};
  result.loglik = kNegInf;

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    WindowEstimate we =
        estep_window(log, subset, a0, a1, lambda, cfg, rng, window);
    if (we.degenerate) ++result.diagnostics.degenerate_esteps;
    const ChangeWindow new_window = we.window;

    MembershipEstimate me =
        estep_membership(log, new_window, subset, a0, a1, lambda, cfg);
    if (me.fixed_up) ++result.diagnostics.membership_fixups;

    const SufficientStats st = compute_stats(log, new_window, me.subset, lambda);
    MStepResult ms =
        log.attributed()
            ? mstep_attributed(st, a0, a1)
            : mstep_unattributed(log, new_window, me.subset, a0, a1, lambda, cfg);
    if (ms.fallback0 || ms.fallback1) ++result.diagnostics.mstep_fallbacks;
    if (ms.skipped1) ++result.diagnostics.mstep_skips;

    const double ll = loglik_from_stats(st, log, ms.alpha0, ms.alpha1);
    result.trace.push_back(
        {new_window.tau1, new_window.tau2, me.subset.size(), ll});
    if (ll > result.loglik) {
      result.loglik = ll;
      result.model = PartitionModel{ms.alpha0, ms.alpha1, new_window, me.subset,
                                    lambda};
    }

    const bool subset_stable = me.subset.members == subset.members;
    const bool window_stable =
        std::abs(new_window.tau1 - window.tau1) < cfg.rel_tol * log.T &&
        std::abs(new_window.tau2 - window.tau2) < cfg.rel_tol * log.T;
    double alpha_change = 0.0;
    for (int k = 0; k <= log.K; ++k) {
      alpha_change = std::max(
          alpha_change, std::abs(ms.alpha0.alpha()[k] - a0.alpha()[k]) /
                            (1.0 + std::abs(a0.alpha()[k])));
      alpha_change = std::max(
          alpha_change, std::abs(ms.alpha1.alpha()[k] - a1.alpha()[k]) /
                            (1.0 + std::abs(a1.alpha()[k])));
    }

    window = new_window;
    subset = me.subset;
    a0 = ms.alpha0;
    a1 = ms.alpha1;

    if (subset_stable && window_stable && alpha_change < cfg.rel_tol) {
      result.converged = true;
      break;
    }
  }
  result.iterations = static_cast<int>(result.trace.size());
  return result;
}

}  // namespace latproc
