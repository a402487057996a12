// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <latproc/core.hpp>
#include <latproc/generator.hpp>

namespace latproc::testing {

inline Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline DirichletParams dir(std::initializer_list<double> xs) {
  return DirichletParams(vec(xs));
}

// Random point strictly inside S, away from the boundary.
inline LatentPosition random_position(int K, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  Vec x(K);
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    x[k] = unif(rng);
    sum += x[k];
  }
  x *= unif(rng) * 0.9 / sum;
  return LatentPosition(x);
}

inline DirichletParams random_dirichlet(int K, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.2, 5.0);
  Vec a(K + 1);
  for (int k = 0; k <= K; ++k) a[k] = unif(rng);
  return DirichletParams(a);
}

// Small planted scenario used across module tests.
inline ScenarioConfig toy_scenario(int n, double lambda, EdgeMode mode,
                                   std::uint64_t seed) {
  std::vector<int> subset;
  for (int v = 1; v <= std::max(2, n / 5); ++v) subset.push_back(v);
  return ScenarioConfig{"toy",
                        n,
                        100.0,
                        2,
                        lambda,
                        dir({4.4, 0.8, 2.8}),
                        dir({0.8, 4.4, 2.8}),
                        ChangeWindow{30.0, 70.0},
                        VertexSubset::of(subset),
                        mode,
                        seed};
}

}  // namespace latproc::testing
