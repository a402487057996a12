// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <limits>
#include <vector>

#include "latproc/core.hpp"

namespace latproc {

struct Clustering2 {
  std::vector<int> labels;  // 0 or 1 per row of the input
  double inertia = std::numeric_limits<double>::infinity();
};

// Lloyd 2-means with random restarts; best within-cluster SS kept.
// Rows of `points` are observations.
inline Clustering2 kmeans2(const Mat& points, int restarts, Rng& rng,
                           int max_iters = 100) {
  const Eigen::Index n = points.rows();
  Clustering2 best;
  best.labels.assign(static_cast<std::size_t>(n), 0);
  if (n < 2) return best;

  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  for (int r = 0; r < restarts; ++r) {
    Eigen::Index i0 = pick(rng), i1 = pick(rng);
    int guard = 0;
    while ((points.row(i0) - points.row(i1)).squaredNorm() == 0.0 && guard++ < 50) {
      i1 = pick(rng);
    }
    Mat centers(2, points.cols());
    centers.row(0) = points.row(i0);
    centers.row(1) = points.row(i1);

    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (int it = 0; it < max_iters; ++it) {
      bool changed = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        double d0 = (points.row(i) - centers.row(0)).squaredNorm();
        double d1 = (points.row(i) - centers.row(1)).squaredNorm();
        int lab = d1 < d0 ? 1 : 0;
        if (lab != labels[static_cast<std::size_t>(i)]) {
          labels[static_cast<std::size_t>(i)] = lab;
          changed = true;
        }
      }
      Mat sums = Mat::Zero(2, points.cols());
      int counts[2] = {0, 0};
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
        ++counts[labels[static_cast<std::size_t>(i)]];
      }
      for (int c = 0; c < 2; ++c) {
        if (counts[c] > 0) centers.row(c) = sums.row(c) / counts[c];
      }
      if (!changed) break;
    }

    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      inertia += (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)]))
                     .squaredNorm();
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.labels = labels;
    }
  }
  return best;
}

// Fuzzy c-means with 2 centers; labels assigned by maximum membership.
inline Clustering2 cmeans2(const Mat& points, Rng& rng, double fuzzifier = 2.0,
                           int max_iters = 200, double tol = 1e-6) {
  const Eigen::Index n = points.rows();
  Clustering2 out;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  if (n < 2) return out;

  const double expo = 2.0 / (fuzzifier - 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Mat u(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    double a = unif(rng);
    u(i, 0) = a;
    u(i, 1) = 1.0 - a;
  }

  Mat centers(2, points.cols());
  for (int it = 0; it < max_iters; ++it) {
    for (int c = 0; c < 2; ++c) {
      Vec num = Vec::Zero(points.cols());
      double den = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        double w = std::pow(u(i, c), fuzzifier);
        num += w * points.row(i).transpose();
        den += w;
      }
      if (den > 0.0) centers.row(c) = (num / den).transpose();
    }
    double shift = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double d0 = std::max((points.row(i) - centers.row(0)).squaredNorm(), 1e-30);
      double d1 = std::max((points.row(i) - centers.row(1)).squaredNorm(), 1e-30);
      double ratio = std::pow(d0 / d1, expo / 2.0);
      double u0 = 1.0 / (1.0 + ratio);
      shift = std::max(shift, std::abs(u0 - u(i, 0)));
      u(i, 0) = u0;
      u(i, 1) = 1.0 - u0;
    }
    if (shift < tol) break;
  }

  double inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.labels[static_cast<std::size_t>(i)] = u(i, 1) > u(i, 0) ? 1 : 0;
    inertia += (points.row(i) - centers.row(out.labels[static_cast<std::size_t>(i)]))
                   .squaredNorm();
  }
  out.inertia = inertia;
  return out;
}

}  // namespace latproc
