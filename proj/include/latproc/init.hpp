// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "latproc/clustering.hpp"
#include "latproc/likelihood.hpp"

namespace latproc {

// Symmetric per-pair edge counts over an interval; zero diagonal.
struct MultiAdjacency {
  Mat counts;
  ChangeWindow interval;
};

struct InitConfig {
  int r = 5;                 // number of equal time segments
  int K = 0;                 // latent dimension; 0 means "use log.K"
  int kmeans_restarts = 10;
  double tolerance = 1e-8;
  std::uint64_t seed = 0x1f2e3d4c5b6a7980ULL;  // clustering restarts
};

inline MultiAdjacency build_multiadjacency(const EventLog& log,
                                           const ChangeWindow& interval) {
  MultiAdjacency a;
  a.interval = interval;
  a.counts = Mat::Zero(log.n, log.n);
  for (const EdgeEvent& e : log.events) {
    if (interval.contains(e.t)) {
      a.counts(e.u - 1, e.v - 1) += 1.0;
      a.counts(e.v - 1, e.u - 1) += 1.0;
    }
  }
  return a;
}

/*
 * Diagonal augmentation: off-diagonal entries are kept bit-identical to
 * A; the diagonal starts at rowsum/(n-1) and is iterated to the
 * diagonal of the rank-K truncated eigendecomposition until the change
 * drops below `tol` (at most `max_iters` rounds).
 */
inline Mat augment_diagonal(const MultiAdjacency& a, int K, double tol = 1e-8,
                            int max_iters = 50) {
  const Eigen::Index n = a.counts.rows();
  if (a.counts.cols() != n || !a.counts.isApprox(a.counts.transpose())) {
    throw invalid_input("augment_diagonal: input must be symmetric");
  }
  if (K < 1 || K > n) throw invalid_input("augment_diagonal: bad rank K");

  Mat atilde = a.counts;
  for (Eigen::Index i = 0; i < n; ++i) {
    atilde(i, i) = n > 1 ? a.counts.row(i).sum() / static_cast<double>(n - 1) : 0.0;
  }
  for (int it = 0; it < max_iters; ++it) {
    Eigen::SelfAdjointEigenSolver<Mat> es(atilde);
    if (es.info() != Eigen::Success) {
      throw numerical_error("augment_diagonal: eigendecomposition failed");
    }
    // Eigenvalues come back ascending; the top K live at the tail.
    double max_change = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double d = 0.0;
      for (int k = 0; k < K; ++k) {
        const Eigen::Index idx = n - 1 - k;
        const double v = es.eigenvectors()(i, idx);
        d += es.eigenvalues()(idx) * v * v;
      }
      max_change = std::max(max_change, std::abs(d - atilde(i, i)));
      atilde(i, i) = d;
    }
    if (max_change < tol) break;
  }
  return atilde;
}

namespace detail {

// Column-wise projection into S: negatives clamped, columns with sum
// above 1 rescaled to 1 - 1e-6.
inline void project_columns_to_simplex(Mat& x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
      x(k, j) = std::max(x(k, j), 0.0);
      sum += x(k, j);
    }
    if (sum > 1.0) x.col(j) *= (1.0 - 1e-6) / sum;
  }
}

}  // namespace detail

/*
 * Least-squares latent positions: minimizes ||b X^T X - A_tilde||_F^2
 * over K x n matrices via the rank-K truncated eigendecomposition of
 * A_tilde / b (top-K nonnegative eigenvalues), then projects each
 * column into the simplex.
 */
inline Mat ls_positions_matrix(const Mat& a_tilde, double b, int K) {
  const Eigen::Index n = a_tilde.rows();
  if (K > n) throw invalid_input("ls_positions: K exceeds vertex count");
  if (!(b > 0.0)) throw invalid_input("ls_positions: b must be positive");

  Eigen::SelfAdjointEigenSolver<Mat> es(a_tilde / b);
  if (es.info() != Eigen::Success) {
    throw numerical_error("ls_positions: eigendecomposition failed");
  }
  Mat x = Mat::Zero(K, n);
  for (int k = 0; k < K; ++k) {
    const Eigen::Index idx = n - 1 - k;
    const double ev = es.eigenvalues()(idx);
    if (ev <= 0.0) continue;  // negative directions contribute nothing
    Vec v = es.eigenvectors().col(idx);
    if (v.sum() < 0.0) v = -v;  // fix the sign ambiguity
    x.row(k) = std::sqrt(ev) * v.transpose();
  }
  detail::project_columns_to_simplex(x);
  return x;
}

inline std::vector<LatentPosition> ls_positions(const Mat& a_tilde, double b,
                                                int K) {
  Mat x = ls_positions_matrix(a_tilde, b, K);
  std::vector<LatentPosition> out;
  out.reserve(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out.emplace_back(Vec(x.col(j)));
  }
  return out;
}

// A candidate starting subset found in one time segment.
struct SubsetCandidate {
  ChangeWindow segment;
  VertexSubset subset;
};

namespace detail {

inline VertexSubset smaller_cluster(const std::vector<int>& labels) {
  std::vector<int> c0, c1;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 0 ? c0 : c1).push_back(static_cast<int>(i) + 1);
  }
  if (c0.empty() || c1.empty()) return VertexSubset{};
  if (c0.size() == c1.size()) return VertexSubset::of(c1);
  return VertexSubset::of(c0.size() < c1.size() ? c0 : c1);
}

}  // namespace detail

/*
 * Segment the horizon into r equal intervals and produce one candidate
 * subset per nonempty segment: 2-means on least-squares latent
 * positions (unattributed) or fuzzy 2-means on per-vertex attribute
 * proportion vectors (attributed).  The smaller cluster is emitted.
 */
inline std::vector<SubsetCandidate> candidate_subsets(const EventLog& log,
                                                      const InitConfig& cfg,
                                                      double lambda) {
  if (cfg.r < 2) throw invalid_input("candidate_subsets: r >= 2 required");
  const int K = cfg.K > 0 ? cfg.K : log.K;
  Rng rng = make_rng(cfg.seed);
  std::vector<SubsetCandidate> out;

  for (int j = 1; j <= cfg.r; ++j) {
    ChangeWindow seg{(j - 1) * log.T / cfg.r, j * log.T / cfg.r};
    int seg_events = 0;
    for (const EdgeEvent& e : log.events) {
      if (seg.contains(e.t)) ++seg_events;
    }
    if (seg_events == 0) continue;

    Clustering2 clusters;
    if (log.attributed()) {
      Mat props = Mat::Zero(log.n, log.K);
      Vec totals = Vec::Zero(log.n);
      for (const EdgeEvent& e : log.events) {
        if (!seg.contains(e.t)) continue;
        props(e.u - 1, e.attr - 1) += 1.0;
        props(e.v - 1, e.attr - 1) += 1.0;
        totals[e.u - 1] += 1.0;
        totals[e.v - 1] += 1.0;
      }
      for (int i = 0; i < log.n; ++i) {
        // Vertices with no events keep the all-zeros vector.
        if (totals[i] > 0.0) props.row(i) /= totals[i];
      }
      clusters = cmeans2(props, rng);
    } else {
      MultiAdjacency a = build_multiadjacency(log, seg);
      Mat atilde = augment_diagonal(a, K, cfg.tolerance);
      const double b = lambda * seg.length() / detail::choose2(log.n);
      Mat x = ls_positions_matrix(atilde, b, K);
      clusters = kmeans2(x.transpose(), cfg.kmeans_restarts, rng);
    }

    VertexSubset subset = detail::smaller_cluster(clusters.labels);
    if (subset.size() == 0 || subset.size() >= log.n) continue;
    out.push_back({seg, std::move(subset)});
  }
  return out;
}

// Builds valid Dirichlet parameters whose truncated mean is `rho`
// (floored into the open simplex).  Concentration is arbitrary: the
// marginal event likelihood depends on the mean only.
inline DirichletParams alpha_from_mean(Vec rho, double concentration = 0.0) {
  const int K = static_cast<int>(rho.size());
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    rho[k] = std::clamp(rho[k], 1e-9, 1.0);
    sum += rho[k];
  }
  if (sum > 1.0 - 1e-6) {
    rho *= (1.0 - 1e-6) / sum;
    sum = 1.0 - 1e-6;
  }
  const double c = concentration > 0.0 ? concentration : K + 1.0;
  Vec alpha(K + 1);
  alpha.head(K) = c * rho;
  alpha[K] = c * (1.0 - sum);
  return DirichletParams(alpha);
}

namespace detail {

// Method-of-moments group means from candidate sufficient statistics
// (attributed mode): class realization rates q_hat = Nbar/gamma and
// attribute profiles give rho_k = sqrt(q_hat * p_k).
inline std::pair<Vec, Vec> moment_means_attributed(const SufficientStats& st,
                                                   int K) {
  auto qhat = [](double nbar, double gamma) {
    if (gamma <= 0.0 || nbar <= 0.0) return 0.01;
    return std::clamp(nbar / gamma, 1e-4, 0.81);
  };
  auto profile = [K](const Vec& counts, double total) {
    Vec p(K);
    for (int k = 0; k < K; ++k) p[k] = (counts[k] + 0.5) / (total + 0.5 * K);
    return p;
  };
  const double q0 = qhat(st.nbar0, st.gamma0);
  Vec rho0 = (q0 * profile(st.n0, st.nbar0).array()).sqrt().matrix();

  Vec rho1;
  if (st.nbar2 >= 3.0) {
    const double q2 = qhat(st.nbar2, st.gamma2);
    rho1 = (q2 * profile(st.n2, st.nbar2).array()).sqrt().matrix();
  } else if (st.nbar1 >= 3.0) {
    // Cross events: P(k) = rho0_k rho1_k / q1.
    const double q1 = qhat(st.nbar1, st.gamma1);
    Vec p = profile(st.n1, st.nbar1);
    rho1.resize(K);
    for (int k = 0; k < K; ++k) {
      rho1[k] = q1 * p[k] / std::max(rho0[k], 1e-4);
    }
  } else {
    rho1 = rho0;
  }
  return {rho0, rho1};
}

}  // namespace detail

struct StartPoint {
  ChangeWindow window;
  VertexSubset subset;
  DirichletParams alpha0;
  DirichletParams alpha1;
  double loglik = kNegInf;
  bool fallback = false;
};

/*
 * Evaluates every (segment, subset) candidate under method-of-moments
 * parameter estimates and returns the highest-likelihood combination.
 * Ties keep the earliest candidate.  An empty candidate list falls back
 * to the central half-window and a pseudo-random n/10 subset.
 */
inline StartPoint best_start(const EventLog& log,
                             const std::vector<SubsetCandidate>& candidates,
                             double lambda) {
  std::optional<StartPoint> best;
  for (const SubsetCandidate& cand : candidates) {
    SufficientStats st = compute_stats(log, cand.segment, cand.subset, lambda);
    DirichletParams a0 = alpha_from_mean(Vec::Constant(log.K, 0.2));
    DirichletParams a1 = a0;
    if (log.attributed()) {
      auto [rho0, rho1] = detail::moment_means_attributed(st, log.K);
      a0 = alpha_from_mean(rho0);
      a1 = alpha_from_mean(rho1);
    } else {
      MultiAdjacency a = build_multiadjacency(log, cand.segment);
      Mat atilde = augment_diagonal(a, log.K);
      const double b = lambda * cand.segment.length() / detail::choose2(log.n);
      Mat x = ls_positions_matrix(atilde, b, log.K);
      const auto mask = cand.subset.mask(log.n);
      Vec rho0 = Vec::Zero(log.K), rho1 = Vec::Zero(log.K);
      int c0 = 0, c1 = 0;
      for (int v = 1; v <= log.n; ++v) {
        if (mask[static_cast<std::size_t>(v)]) {
          rho1 += x.col(v - 1);
          ++c1;
        } else {
          rho0 += x.col(v - 1);
          ++c0;
        }
      }
      if (c0 > 0) rho0 /= c0;
      if (c1 > 0) rho1 /= c1;
      a0 = alpha_from_mean(rho0);
      a1 = alpha_from_mean(rho1);
    }
    const double ll = loglik_from_stats(st, log, a0, a1);
    if (!best || ll > best->loglik) {
      best = StartPoint{cand.segment, cand.subset, a0, a1, ll, false};
    }
  }
  if (best) return *best;

  // No usable candidate: central half-window, pseudo-random subset.
  Rng rng = make_rng(0x5ca1ab1e);
  const int m = std::max(1, std::min(log.n - 1, log.n / 10));
  std::vector<int> ids(static_cast<std::size_t>(log.n));
  for (int v = 1; v <= log.n; ++v) ids[static_cast<std::size_t>(v) - 1] = v;
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(m));
  StartPoint fb{ChangeWindow{log.T / 4.0, 3.0 * log.T / 4.0},
                VertexSubset::of(ids),
                alpha_from_mean(Vec::Constant(log.K, 0.2)),
                alpha_from_mean(Vec::Constant(log.K, 0.2)),
                kNegInf,
                true};
  SufficientStats st = compute_stats(log, fb.window, fb.subset, lambda);
  fb.loglik = loglik_from_stats(st, log, fb.alpha0, fb.alpha1);
  return fb;
}

}  // namespace latproc
