// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "latproc/core.hpp"

namespace latproc {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-event indicators: s_i (event inside the window), y_i (u_i in the
// subset), z_i (v_i in the subset).
struct IndicatorView {
  std::vector<std::uint8_t> s, y, z;
};

inline IndicatorView compute_indicators(const EventLog& log,
                                        const ChangeWindow& window,
                                        const VertexSubset& subset) {
  const auto mask = subset.mask(log.n);
  IndicatorView ind;
  const std::size_t N = log.events.size();
  ind.s.resize(N);
  ind.y.resize(N);
  ind.z.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    const EdgeEvent& e = log.events[i];
    ind.s[i] = window.contains(e.t) ? 1 : 0;
    ind.y[i] = mask[static_cast<std::size_t>(e.u)];
    ind.z[i] = mask[static_cast<std::size_t>(e.v)];
  }
  return ind;
}

/*
 * Event counts and opportunity exposures classified by how many of an
 * event's endpoint draws come from the anomalous distribution:
 * class 0 (none), 1 (exactly one), 2 (both).  In attributed mode n0/n1/n2
 * hold per-attribute counts; the scalar totals are always filled.
 */
struct SufficientStats {
  Vec n0, n1, n2;  // length K (attributed mode), empty otherwise
  double nbar0 = 0.0, nbar1 = 0.0, nbar2 = 0.0;
  double gamma0 = 0.0, gamma1 = 0.0, gamma2 = 0.0;
};

namespace detail {

inline double choose2(double x) { return x < 2.0 ? 0.0 : x * (x - 1.0) / 2.0; }

}  // namespace detail

// Expected opportunity counts per class for a window of length `len`
// and subset size m: baseline pairs are exposed for the whole horizon
// outside the window plus the non-anomalous pair fraction inside it,
//   gamma0 = lambda * (T - len * (1 - C(n-m,2)/C(n,2))),
// the within-subset fraction gives gamma2, and gamma1 is the cross-pair
// remainder, so gamma0+gamma1+gamma2 = lambda*T with gamma1 >= 0 for
// every m <= n.  (The bracketing of gamma0 differs from one printed
// account of it, which drops the out-of-window exposure; that variant
// sends gamma0 below the observed class-0 count for wide windows and
// makes the evaluation degenerate.)
inline void exposure_rates(int n, int m, double T, double lambda, double len,
                           double& gamma0, double& gamma1, double& gamma2) {
  const double all_pairs = detail::choose2(static_cast<double>(n));
  const double frac_out = detail::choose2(static_cast<double>(n - m)) / all_pairs;
  const double frac_anom = detail::choose2(static_cast<double>(m)) / all_pairs;
  gamma0 = lambda * (T - len * (1.0 - frac_out));
  gamma2 = lambda * len * frac_anom;
  gamma1 = lambda * T - gamma0 - gamma2;
}

inline SufficientStats compute_stats(const EventLog& log,
                                     const ChangeWindow& window,
                                     const VertexSubset& subset, double lambda) {
  if (!(lambda > 0.0)) throw invalid_input("compute_stats: lambda must be positive");
  validate_window(window, log.T);
  validate_subset(subset, log.n);

  SufficientStats st;
  if (log.attributed()) {
    st.n0 = Vec::Zero(log.K);
    st.n1 = Vec::Zero(log.K);
    st.n2 = Vec::Zero(log.K);
  }
  const IndicatorView ind = compute_indicators(log, window, subset);
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const int cls = ind.s[i] ? ind.y[i] + ind.z[i] : 0;
    if (cls == 0) {
      st.nbar0 += 1.0;
    } else if (cls == 1) {
      st.nbar1 += 1.0;
    } else {
      st.nbar2 += 1.0;
    }
    if (log.attributed()) {
      const int k = log.events[i].attr - 1;
      (cls == 0 ? st.n0 : cls == 1 ? st.n1 : st.n2)[k] += 1.0;
    }
  }
  exposure_rates(log.n, subset.size(), log.T, lambda, window.length(), st.gamma0,
                 st.gamma1, st.gamma2);
  return st;
}

/*
 * Parameter-side quantities shared by the likelihood forms: log mean
 * components for both groups and the three class-level realization
 * probabilities
 *   q0 = sum_k (a0_k/abar0)^2,  q1 = sum_k a0_k a1_k/(abar0 abar1),
 *   q2 = sum_k (a1_k/abar1)^2.
 */
struct LikelihoodTerms {
  Vec log_rho0, log_rho1;  // length K; -inf where the mean is zero
  double q[3] = {0, 0, 0};
  double log1mq[3] = {0, 0, 0};
  bool degenerate = false;  // some q_j >= 1
};

inline LikelihoodTerms likelihood_terms(const DirichletParams& alpha0,
                                        const DirichletParams& alpha1) {
  if (alpha0.K() != alpha1.K()) {
    throw invalid_input("likelihood: alpha dimension mismatch");
  }
  LikelihoodTerms lt;
  const Vec r0 = alpha0.mean_latent();
  const Vec r1 = alpha1.mean_latent();
  const int K = alpha0.K();
  lt.log_rho0.resize(K);
  lt.log_rho1.resize(K);
  for (int k = 0; k < K; ++k) {
    lt.log_rho0[k] = r0[k] > 0.0 ? std::log(r0[k]) : kNegInf;
    lt.log_rho1[k] = r1[k] > 0.0 ? std::log(r1[k]) : kNegInf;
  }
  lt.q[0] = r0.squaredNorm();
  lt.q[1] = r0.dot(r1);
  lt.q[2] = r1.squaredNorm();
  for (int j = 0; j < 3; ++j) {
    if (lt.q[j] >= 1.0) {
      lt.degenerate = true;
      lt.log1mq[j] = kNegInf;
    } else {
      lt.log1mq[j] = std::log1p(-lt.q[j]);
    }
  }
  return lt;
}

// Attributed log-likelihood from precomputed terms.  Proportionality
// constants are dropped (fixed at zero).
inline double loglik_attributed_terms(const SufficientStats& st,
                                      const LikelihoodTerms& lt) {
  if (lt.degenerate) return kNegInf;
  double ll = 0.0;
  const int K = static_cast<int>(lt.log_rho0.size());
  for (int k = 0; k < K; ++k) {
    const double c0 = 2.0 * st.n0[k] + st.n1[k];
    const double c1 = 2.0 * st.n2[k] + st.n1[k];
    if (c0 > 0.0) {
      if (lt.log_rho0[k] == kNegInf) return kNegInf;
      ll += c0 * lt.log_rho0[k];
    }
    if (c1 > 0.0) {
      if (lt.log_rho1[k] == kNegInf) return kNegInf;
      ll += c1 * lt.log_rho1[k];
    }
  }
  ll += (st.gamma0 - st.nbar0) * lt.log1mq[0];
  ll += (st.gamma1 - st.nbar1) * lt.log1mq[1];
  ll += (st.gamma2 - st.nbar2) * lt.log1mq[2];
  return ll;
}

// Unattributed log-likelihood from precomputed terms.
inline double loglik_unattributed_terms(const SufficientStats& st,
                                        const LikelihoodTerms& lt) {
  if (lt.degenerate) return kNegInf;
  double ll = 0.0;
  const double nbar[3] = {st.nbar0, st.nbar1, st.nbar2};
  const double gamma[3] = {st.gamma0, st.gamma1, st.gamma2};
  for (int j = 0; j < 3; ++j) {
    if (nbar[j] > 0.0) {
      if (lt.q[j] <= 0.0) return kNegInf;
      ll += nbar[j] * std::log(lt.q[j]);
    }
    ll += (gamma[j] - nbar[j]) * lt.log1mq[j];
  }
  return ll;
}

// Likelihood evaluated directly on the truncated group means.  The
// marginalized likelihood depends on the Dirichlet parameters only
// through these mean vectors, which is what the M-step optimizes.
inline double loglik_means(const SufficientStats& st, bool attributed,
                           const Vec& rho0, const Vec& rho1) {
  LikelihoodTerms lt;
  const int K = static_cast<int>(rho0.size());
  lt.log_rho0.resize(K);
  lt.log_rho1.resize(K);
  for (int k = 0; k < K; ++k) {
    lt.log_rho0[k] = rho0[k] > 0.0 ? std::log(rho0[k]) : kNegInf;
    lt.log_rho1[k] = rho1[k] > 0.0 ? std::log(rho1[k]) : kNegInf;
  }
  lt.q[0] = rho0.squaredNorm();
  lt.q[1] = rho0.dot(rho1);
  lt.q[2] = rho1.squaredNorm();
  for (int j = 0; j < 3; ++j) {
    if (lt.q[j] >= 1.0) {
      lt.degenerate = true;
      lt.log1mq[j] = kNegInf;
    } else {
      lt.log1mq[j] = std::log1p(-lt.q[j]);
    }
  }
  return attributed ? loglik_attributed_terms(st, lt)
                    : loglik_unattributed_terms(st, lt);
}

inline double loglik_attributed(const SufficientStats& st, const EventLog& log,
                                const ChangeWindow& window,
                                const VertexSubset& subset,
                                const DirichletParams& alpha0,
                                const DirichletParams& alpha1) {
  (void)window;
  (void)subset;
  if (!log.attributed()) {
    throw invalid_input("loglik_attributed: log is not attributed");
  }
  if (alpha0.K() != log.K) throw invalid_input("loglik_attributed: K mismatch");
  return loglik_attributed_terms(st, likelihood_terms(alpha0, alpha1));
}

inline double loglik_unattributed(const SufficientStats& st, const EventLog& log,
                                  const ChangeWindow& window,
                                  const VertexSubset& subset,
                                  const DirichletParams& alpha0,
                                  const DirichletParams& alpha1) {
  (void)window;
  (void)subset;
  if (log.attributed()) {
    throw invalid_input("loglik_unattributed: log is attributed");
  }
  return loglik_unattributed_terms(st, likelihood_terms(alpha0, alpha1));
}

inline double loglik_from_stats(const SufficientStats& st, const EventLog& log,
                                const DirichletParams& alpha0,
                                const DirichletParams& alpha1) {
  const LikelihoodTerms lt = likelihood_terms(alpha0, alpha1);
  return log.attributed() ? loglik_attributed_terms(st, lt)
                          : loglik_unattributed_terms(st, lt);
}

// Single-group likelihood: the heterogeneous form with alpha0 = alpha1,
// where the choice of window/subset cancels (all q_j coincide).
inline double loglik_homogeneous(const EventLog& log, const DirichletParams& alpha,
                                 double lambda) {
  if (!(lambda > 0.0)) {
    throw invalid_input("loglik_homogeneous: lambda must be positive");
  }
  if (alpha.K() != log.K) throw invalid_input("loglik_homogeneous: K mismatch");
  const Vec rho = alpha.mean_latent();
  const double q = rho.squaredNorm();
  if (q >= 1.0) return kNegInf;
  const double N = static_cast<double>(log.size());
  double ll = (lambda * log.T - N) * std::log1p(-q);
  if (log.attributed()) {
    Vec counts = Vec::Zero(log.K);
    for (const EdgeEvent& e : log.events) counts[e.attr - 1] += 1.0;
    for (int k = 0; k < log.K; ++k) {
      if (counts[k] > 0.0) {
        if (rho[k] <= 0.0) return kNegInf;
        ll += 2.0 * counts[k] * std::log(rho[k]);
      }
    }
  } else if (N > 0.0) {
    if (q <= 0.0) return kNegInf;
    ll += N * std::log(q);
  }
  return ll;
}

/*
 * Precomputed prefix sums over the time-sorted events for a fixed
 * subset, so that sufficient statistics for any candidate window cost
 * O(log N) instead of O(N).  Used by the stochastic E-step.
 */
class WindowScanner {
 public:
  WindowScanner(const EventLog& log, const VertexSubset& subset, double lambda)
      : n_(log.n),
        m_(subset.size()),
        T_(log.T),
        lambda_(lambda),
        K_(log.K),
        attributed_(log.attributed()) {
    const std::size_t N = log.events.size();
    times_.resize(N);
    const auto mask = subset.mask(log.n);
    // cum_[c] holds prefix counts for endpoint-class c (y+z of the
    // event), flattened as (N+1) x K; totals in cum_total_.
    for (int c = 0; c < 3; ++c) {
      cum_total_[c].assign(N + 1, 0);
      if (attributed_) cum_[c].assign((N + 1) * static_cast<std::size_t>(K_), 0);
    }
    for (std::size_t i = 0; i < N; ++i) {
      const EdgeEvent& e = log.events[i];
      times_[i] = e.t;
      const int c = mask[static_cast<std::size_t>(e.u)] +
                    mask[static_cast<std::size_t>(e.v)];
      for (int cc = 0; cc < 3; ++cc) {
        cum_total_[cc][i + 1] = cum_total_[cc][i] + (cc == c ? 1 : 0);
        if (attributed_) {
          for (int k = 0; k < K_; ++k) {
            cum_[cc][(i + 1) * K_ + k] =
                cum_[cc][i * K_ + k] +
                (cc == c && e.attr - 1 == k ? 1 : 0);
          }
        }
      }
    }
  }

  int total_events() const { return static_cast<int>(times_.size()); }

  // Sufficient statistics for the half-open window (tau1, tau2].
  SufficientStats stats(const ChangeWindow& w) const {
    SufficientStats st;
    const auto lo = static_cast<std::size_t>(
        std::upper_bound(times_.begin(), times_.end(), w.tau1) - times_.begin());
    const auto hi = static_cast<std::size_t>(
        std::upper_bound(times_.begin(), times_.end(), w.tau2) - times_.begin());
    const double N = static_cast<double>(times_.size());
    const double in1 = static_cast<double>(cum_total_[1][hi] - cum_total_[1][lo]);
    const double in2 = static_cast<double>(cum_total_[2][hi] - cum_total_[2][lo]);
    st.nbar1 = in1;
    st.nbar2 = in2;
    st.nbar0 = N - in1 - in2;
    if (attributed_) {
      st.n0.resize(K_);
      st.n1.resize(K_);
      st.n2.resize(K_);
      for (int k = 0; k < K_; ++k) {
        const double tot0 = static_cast<double>(cum_[0][times_.size() * K_ + k]);
        const double tot1 = static_cast<double>(cum_[1][times_.size() * K_ + k]);
        const double tot2 = static_cast<double>(cum_[2][times_.size() * K_ + k]);
        const double w1 = static_cast<double>(cum_[1][hi * K_ + k] - cum_[1][lo * K_ + k]);
        const double w2 = static_cast<double>(cum_[2][hi * K_ + k] - cum_[2][lo * K_ + k]);
        st.n1[k] = w1;
        st.n2[k] = w2;
        st.n0[k] = tot0 + (tot1 - w1) + (tot2 - w2);
      }
    }
    exposure_rates(n_, m_, T_, lambda_, w.length(), st.gamma0, st.gamma1,
                   st.gamma2);
    return st;
  }

 private:
  int n_, m_;
  double T_, lambda_;
  int K_;
  bool attributed_;
  std::vector<double> times_;
  std::vector<int> cum_[3];
  std::vector<int> cum_total_[3];
};

}  // namespace latproc
