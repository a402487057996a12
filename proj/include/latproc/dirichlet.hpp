// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>

#include "latproc/core.hpp"

namespace latproc {

// Draws the full (K+1)-dimensional Dirichlet vector.
inline Vec sample_dirichlet(const DirichletParams& params, Rng& rng) {
  const Vec& a = params.alpha();
  Vec g(a.size());
  double sum = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    std::gamma_distribution<double> gamma(a[k], 1.0);
    g[k] = gamma(rng);
    sum += g[k];
  }
  if (sum <= 0.0) {
    // All gammas underflowed (tiny alphas); fall back to the mean.
    return params.mean();
  }
  return g / sum;
}

// First K components of a Dirichlet draw — the latent position law.
inline LatentPosition sample_latent(const DirichletParams& params, Rng& rng) {
  Vec full = sample_dirichlet(params, rng);
  return LatentPosition(full.head(params.K()));
}

namespace detail {

// psi^{-1} via Newton iterations, initialized as in Minka (2000).
inline double inverse_digamma(double y) {
  double x = y >= -2.22 ? std::exp(y) + 0.5 : -1.0 / (y - boost::math::digamma(1.0));
  for (int it = 0; it < 30; ++it) {
    double f = boost::math::digamma(x) - y;
    double step = f / boost::math::trigamma(x);
    x -= step;
    if (x <= 0.0) x = 1e-12;
    if (std::abs(step) < 1e-12 * (1.0 + std::abs(x))) break;
  }
  return x;
}

}  // namespace detail

/*
 * Maximum-likelihood Dirichlet parameters from a sample of full
 * (K+1)-dimensional simplex points (rows of `points`), via the standard
 * fixed-point iteration on E[log x_k]:
 *     psi(alpha_k) = psi(alpha_bar) + mean log x_k.
 * Components are floored away from zero before the log.
 */
inline DirichletParams dirichlet_mle(const Mat& points, int max_iters = 200,
                                     double tol = 1e-8) {
  if (points.rows() < 1) throw invalid_input("dirichlet_mle: empty sample");
  const Eigen::Index d = points.cols();
  Vec log_mean = Vec::Zero(d);
  Vec mean = Vec::Zero(d);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      double x = std::max(points(i, k), 1e-10);
      log_mean[k] += std::log(x);
      mean[k] += x;
    }
  }
  log_mean /= static_cast<double>(points.rows());
  mean /= static_cast<double>(points.rows());
  mean /= mean.sum();

  // Moment-matched starting point.
  Vec alpha = mean * static_cast<double>(d);
  for (int it = 0; it < max_iters; ++it) {
    double psi_total = boost::math::digamma(alpha.sum());
    Vec next(d);
    double delta = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      next[k] = detail::inverse_digamma(psi_total + log_mean[k]);
      if (!(next[k] > 0.0) || !std::isfinite(next[k])) next[k] = 1e-8;
      delta = std::max(delta, std::abs(next[k] - alpha[k]) / (1.0 + std::abs(alpha[k])));
    }
    alpha = next;
    if (delta < tol) break;
  }
  return DirichletParams(alpha);
}

}  // namespace latproc
