// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "latproc/common.hpp"

namespace latproc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Tolerance accepted at the simplex boundary before clamping.
inline constexpr double kSimplexTol = 1e-12;

enum class EdgeMode { attributed, unattributed };

/*
 * A point in the latent space S = { x in R_+^K : sum_k x_k <= 1 }.
 * Only the first K components are stored; the (K+1)st is implicit
 * (1 - sum).  Inputs within kSimplexTol of the boundary are accepted
 * and clamped; anything further out is rejected.
 */
class LatentPosition {
 public:
  explicit LatentPosition(Vec coords) : coords_(std::move(coords)) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < coords_.size(); ++k) {
      double c = coords_[k];
      if (!(c >= -kSimplexTol)) {
        throw invalid_input("LatentPosition: negative component");
      }
      coords_[k] = std::max(c, 0.0);
      sum += coords_[k];
    }
    if (!(sum <= 1.0 + kSimplexTol)) {
      throw invalid_input("LatentPosition: component sum exceeds 1");
    }
    if (sum > 1.0) coords_ *= 1.0 / sum;
  }

  const Vec& coords() const { return coords_; }
  int dim() const { return static_cast<int>(coords_.size()); }

 private:
  Vec coords_;
};

/*
 * Concentration parameters of a (K+1)-dimensional Dirichlet
 * distribution.  The (K+1)st component absorbs the simplex remainder.
 * Nonpositive entries are rejected at construction.
 */
class DirichletParams {
 public:
  explicit DirichletParams(Vec alpha) : alpha_(std::move(alpha)) {
    if (alpha_.size() < 2) {
      throw invalid_input("DirichletParams: need at least 2 components");
    }
    for (Eigen::Index k = 0; k < alpha_.size(); ++k) {
      if (!(alpha_[k] > 0.0) || !std::isfinite(alpha_[k])) {
        throw invalid_input("DirichletParams: all alpha_k must be positive");
      }
    }
  }

  const Vec& alpha() const { return alpha_; }
  int K() const { return static_cast<int>(alpha_.size()) - 1; }
  double total() const { return alpha_.sum(); }

  // Mean of the full (K+1)-dimensional Dirichlet.
  Vec mean() const { return alpha_ / alpha_.sum(); }

  // Mean of the truncation to the first K components (the latent
  // position distribution).
  Vec mean_latent() const { return alpha_.head(K()) / alpha_.sum(); }

 private:
  Vec alpha_;
};

// One observed edge event.  attr == 0 means "no attribute" (the
// unattributed case); otherwise attr is in {1..K}.
struct EdgeEvent {
  double t = 0.0;
  int u = 0;
  int v = 0;
  int attr = 0;
};

// Time-sorted collection of realized edge events on vertices {1..n}
// observed over (0, T).
struct EventLog {
  std::vector<EdgeEvent> events;
  int n = 0;
  double T = 0.0;
  int K = 0;
  EdgeMode mode = EdgeMode::unattributed;

  int size() const { return static_cast<int>(events.size()); }
  bool attributed() const { return mode == EdgeMode::attributed; }
};

inline void validate_event_log(const EventLog& log) {
  if (log.n < 2) throw invalid_input("EventLog: need n >= 2 vertices");
  if (!(log.T > 0.0)) throw invalid_input("EventLog: horizon T must be positive");
  if (log.K < 1) throw invalid_input("EventLog: K must be >= 1");
  double prev = 0.0;
  for (const EdgeEvent& e : log.events) {
    if (!(e.t >= 0.0) || !(e.t <= log.T)) {
      throw invalid_input("EventLog: event time outside [0, T]");
    }
    if (e.t < prev) throw invalid_input("EventLog: events not sorted by time");
    prev = e.t;
    if (e.u < 1 || e.u > log.n || e.v < 1 || e.v > log.n) {
      throw invalid_input("EventLog: vertex id outside {1..n}");
    }
    if (e.u == e.v) throw invalid_input("EventLog: self-loop");
    if (log.mode == EdgeMode::attributed) {
      if (e.attr < 1 || e.attr > log.K) {
        throw invalid_input("EventLog: attribute outside {1..K}");
      }
    }
  }
}

// Candidate anomalous interval (tau1, tau2], 0 <= tau1 < tau2 <= T.
struct ChangeWindow {
  double tau1 = 0.0;
  double tau2 = 0.0;

  double length() const { return tau2 - tau1; }
  // Half-open membership: events exactly at tau1 are outside, at tau2
  // inside.  Deterministic tie-breaking; measure zero under the model.
  bool contains(double t) const { return t > tau1 && t <= tau2; }
};

inline void validate_window(const ChangeWindow& w, double T) {
  if (!(w.tau1 >= 0.0 && w.tau1 < w.tau2 && w.tau2 <= T)) {
    throw invalid_input("ChangeWindow: need 0 <= tau1 < tau2 <= T");
  }
}

// Nonempty proper subset of {1..n}, stored sorted.
struct VertexSubset {
  std::vector<int> members;

  static VertexSubset of(std::vector<int> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return VertexSubset{std::move(ids)};
  }

  int size() const { return static_cast<int>(members.size()); }

  bool contains(int v) const {
    return std::binary_search(members.begin(), members.end(), v);
  }

  // 1-based membership mask; mask[v] != 0 iff v is a member.
  std::vector<std::uint8_t> mask(int n) const {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(n) + 1, 0);
    for (int v : members) m[static_cast<std::size_t>(v)] = 1;
    return m;
  }
};

inline void validate_subset(const VertexSubset& s, int n) {
  if (s.members.empty()) throw invalid_input("VertexSubset: empty");
  if (s.size() >= n) throw invalid_input("VertexSubset: must be a proper subset");
  int prev = 0;
  for (int v : s.members) {
    if (v < 1 || v > n) throw invalid_input("VertexSubset: id outside {1..n}");
    if (v <= prev) throw invalid_input("VertexSubset: not sorted/unique");
    prev = v;
  }
}

// A fitted two-component model: baseline alpha0, anomalous alpha1 over
// `window` x `subset`, with the fixed opportunity rate lambda.
struct PartitionModel {
  DirichletParams alpha0;
  DirichletParams alpha1;
  ChangeWindow window;
  VertexSubset subset;
  double lambda = 0.0;
};

// ---------------------------------------------------------------------------
// Dot-product kernel.

inline double dot_product(const LatentPosition& x, const LatentPosition& y) {
  if (x.dim() != y.dim()) throw invalid_input("dot_product: dimension mismatch");
  double d = x.coords().dot(y.coords());
  return std::clamp(d, 0.0, 1.0);
}

// Probabilities (p0, p1, ..., pK) of drawing attribute k at an
// opportunity between positions x and y; p0 is the no-edge probability.
inline Vec attribute_probs(const LatentPosition& x, const LatentPosition& y) {
  if (x.dim() != y.dim()) {
    throw invalid_input("attribute_probs: dimension mismatch");
  }
  const int K = x.dim();
  Vec p(K + 1);
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    p[k + 1] = x.coords()[k] * y.coords()[k];
    sum += p[k + 1];
  }
  p[0] = std::max(1.0 - sum, 0.0);
  return p;
}

// Expectation of X_u . X_v for independent draws X_u ~ Dir(a), X_v ~ Dir(b)
// (first K components); equals the dot product of the truncated means.
inline double expected_dot(const DirichletParams& a, const DirichletParams& b) {
  if (a.K() != b.K()) throw invalid_input("expected_dot: dimension mismatch");
  return a.mean_latent().dot(b.mean_latent());
}

}  // namespace latproc
