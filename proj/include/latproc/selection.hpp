// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <array>
#include <string>
#include <vector>

#include "latproc/em.hpp"

namespace latproc {

enum class Decision { homogeneous, heterogeneous };

struct SelectionConfig {
  int max_depth = 3;    // recursion depth below the root comparison
  int min_events = 50;  // regions with fewer events are not split
  EMConfig em;
};

// One accepted heterogeneous partition, with enough provenance to map
// its window back to the original time axis.
struct AcceptedPartition {
  PartitionModel model;  // window in region-local time
  std::string provenance;
  double bic_hom = 0.0;
  double bic_het = 0.0;
  double delta_bic = 0.0;  // bic_het - bic_hom (negative: accepted)
  // The fitted window mapped to original time; more than one piece when
  // the region is a concatenation of disjoint intervals.
  std::vector<std::pair<double, double>> window_original;
  std::vector<double> membership_probs;  // probs[v-1]
  int region_events = 0;
};

struct SelectionReport {
  double bic_hom = 0.0;
  double bic_het = 0.0;
  Decision decision = Decision::homogeneous;
  std::vector<AcceptedPartition> partitions;
  std::string stopped_reason;
};

// BIC = -2 loglik + p ln N with N the observed event count; the
// heterogeneous model spends 2(K+1) + 2 parameters (alpha0, alpha1,
// tau1, tau2), membership indicators excluded.
inline SelectionReport bic_compare(const EventLog& log, const HomogeneousFit& hom,
                                   const FitResult& het) {
  SelectionReport rep;
  const double N = static_cast<double>(log.size());
  if (N == 0.0) {
    rep.decision = Decision::homogeneous;
    rep.stopped_reason = "no events";
    return rep;
  }
  const double p_hom = log.K + 1.0;
  const double p_het = 2.0 * (log.K + 1.0) + 2.0;
  rep.bic_hom = -2.0 * hom.loglik + p_hom * std::log(N);
  rep.bic_het = -2.0 * het.loglik + p_het * std::log(N);
  rep.decision =
      rep.bic_het < rep.bic_hom ? Decision::heterogeneous : Decision::homogeneous;
  return rep;
}

namespace detail {

// A region of the original log: events re-timed onto a concatenated
// local axis, plus the piecewise map back to original time.
struct Region {
  EventLog log;
  // Pieces (local_lo, local_hi, orig_lo): local t maps to
  // orig_lo + (t - local_lo).
  std::vector<std::array<double, 3>> pieces;
  std::string provenance;
};

inline Region root_region(const EventLog& log) {
  return Region{log, {{0.0, log.T, 0.0}}, "root"};
}

// Restricts a region to a set of disjoint local intervals (half-open
// (lo, hi]) and re-times events onto their concatenation.
inline Region slice_region(const Region& parent,
                           const std::vector<std::pair<double, double>>& keep,
                           const std::string& suffix) {
  Region out;
  out.provenance = parent.provenance + "/" + suffix;
  out.log.n = parent.log.n;
  out.log.K = parent.log.K;
  out.log.mode = parent.log.mode;

  double offset = 0.0;
  std::vector<std::array<double, 3>> local_shift;  // (lo, hi, new_lo)
  for (const auto& [lo, hi] : keep) {
    if (!(hi > lo)) continue;
    local_shift.push_back({lo, hi, offset});
    // Compose with the parent pieces for the original-time map.
    for (const auto& p : parent.pieces) {
      const double a = std::max(lo, p[0]);
      const double b = std::min(hi, p[1]);
      if (b > a) {
        out.pieces.push_back({offset + (a - lo), offset + (b - lo),
                              p[2] + (a - p[0])});
      }
    }
    offset += hi - lo;
  }
  out.log.T = offset;

  for (const EdgeEvent& e : parent.log.events) {
    for (const auto& s : local_shift) {
      if (e.t > s[0] && e.t <= s[1]) {
        EdgeEvent moved = e;
        moved.t = s[2] + (e.t - s[0]);
        out.log.events.push_back(moved);
        break;
      }
    }
  }
  std::stable_sort(out.log.events.begin(), out.log.events.end(),
                   [](const EdgeEvent& a, const EdgeEvent& b) { return a.t < b.t; });
  return out;
}

// Maps a region-local window to original-time pieces.
inline std::vector<std::pair<double, double>> map_window(
    const Region& region, const ChangeWindow& w) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : region.pieces) {
    const double a = std::max(w.tau1, p[0]);
    const double b = std::min(w.tau2, p[1]);
    if (b > a) out.push_back({p[2] + (a - p[0]), p[2] + (b - p[0])});
  }
  return out;
}

inline void recurse_partition(const Region& region, const SelectionConfig& cfg,
                              Rng& rng, int depth, SelectionReport& report,
                              std::vector<std::string>& stops) {
  if (region.log.size() < std::max(cfg.min_events, 1)) {
    stops.push_back(region.provenance + ": too few events");
    return;
  }
  const double unit =
      cfg.em.time_unit > 0.0 ? cfg.em.time_unit : region.log.T / 100.0;
  const double lambda = fix_lambda(region.log, unit);

  EMConfig em = cfg.em;
  em.lambda = lambda;
  const HomogeneousFit hom = fit_homogeneous(region.log, lambda);
  const FitResult het = fit(region.log, em, rng);
  const SelectionReport node = bic_compare(region.log, hom, het);

  if (depth == 0) {
    report.bic_hom = node.bic_hom;
    report.bic_het = node.bic_het;
    report.decision = node.decision;
  }
  if (node.decision == Decision::homogeneous) {
    stops.push_back(depth == 0 ? "root homogeneous"
                               : region.provenance + ": homogeneous");
    return;
  }

  AcceptedPartition part{het.model, region.provenance};
  part.bic_hom = node.bic_hom;
  part.bic_het = node.bic_het;
  part.delta_bic = node.bic_het - node.bic_hom;
  part.window_original = map_window(region, het.model.window);
  part.membership_probs = membership_probabilities(
      region.log, het.model.window, het.model.subset, het.model.alpha0,
      het.model.alpha1, lambda, cfg.em.membership_prior);
  part.region_events = region.log.size();
  report.partitions.push_back(std::move(part));

  if (depth + 1 > cfg.max_depth) {
    stops.push_back(region.provenance + ": depth limit");
    return;
  }
  const ChangeWindow w = het.model.window;
  Region outside = slice_region(
      region, {{0.0, w.tau1}, {w.tau2, region.log.T}}, "outside");
  Region inside = slice_region(region, {{w.tau1, w.tau2}}, "window");
  recurse_partition(outside, cfg, rng, depth + 1, report, stops);
  recurse_partition(inside, cfg, rng, depth + 1, report, stops);
}

}  // namespace detail

/*
 * Hierarchical partitioning: fit and compare on the full log; when the
 * heterogeneous model is accepted, recurse independently on the time
 * complement and on the detected window, refitting lambda per region.
 * Stops on a homogeneous decision, small regions, or the depth limit.
 */
inline SelectionReport iterative_partition(const EventLog& log,
                                           const SelectionConfig& cfg, Rng& rng) {
  validate_event_log(log);
  SelectionReport report;
  std::vector<std::string> stops;
  detail::recurse_partition(detail::root_region(log), cfg, rng, 0, report, stops);
  std::string joined;
  for (std::size_t i = 0; i < stops.size(); ++i) {
    if (i) joined += "; ";
    joined += stops[i];
  }
  report.stopped_reason = joined;
  return report;
}

}  // namespace latproc
