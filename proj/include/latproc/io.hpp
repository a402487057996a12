// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "latproc/selection.hpp"
#include "latproc/study.hpp"

namespace latproc {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

// Shortest round-trip representation of a double.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

struct IngestResult {
  EventLog log;
  std::vector<std::string> labels;  // labels[id-1], first-appearance order
  std::vector<std::string> warnings;
};

/*
 * Reads the event CSV (header `t,u,v` or `t,u,v,k`).  Vertex labels are
 * interned to contiguous ids in first-appearance order; (u,v) and (v,u)
 * refer to the same undirected pair.  Self-loop rows are rejected with
 * a warning; malformed rows abort with the offending line number.
 */
inline IngestResult ingest_csv(std::istream& in, EdgeMode mode, int K,
                               std::optional<double> T_override = std::nullopt) {
  IngestResult res;
  std::string line;
  if (!std::getline(in, line)) throw data_error("ingest: empty input");
  auto header = detail::split_csv_line(line);
  const bool has_attr_col = header.size() == 4 && header[3] == "k";
  if (!((header.size() == 3 || has_attr_col) && header[0] == "t" &&
        header[1] == "u" && header[2] == "v")) {
    throw data_error("ingest: header must be `t,u,v` or `t,u,v,k`");
  }
  if (mode == EdgeMode::attributed && !has_attr_col) {
    throw data_error("ingest: attributed mode requires a `k` column");
  }
  if (mode == EdgeMode::unattributed && has_attr_col) {
    res.warnings.push_back("input has a `k` column; attributes ignored");
  }

  std::map<std::string, int> intern;
  auto id_of = [&](const std::string& label) {
    auto it = intern.find(label);
    if (it != intern.end()) return it->second;
    const int id = static_cast<int>(intern.size()) + 1;
    intern.emplace(label, id);
    res.labels.push_back(label);
    return id;
  };

  int max_attr = 0;
  long line_no = 1;
  double max_t = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw data_error("ingest: line " + std::to_string(line_no) +
                       ": expected " + std::to_string(header.size()) + " fields");
    }
    EdgeEvent e;
    try {
      std::size_t pos = 0;
      e.t = std::stod(fields[0], &pos);
      if (pos != fields[0].size()) throw std::invalid_argument("t");
    } catch (const std::exception&) {
      throw data_error("ingest: line " + std::to_string(line_no) +
                       ": bad time value `" + fields[0] + "`");
    }
    if (!(e.t >= 0.0) || !std::isfinite(e.t)) {
      throw data_error("ingest: line " + std::to_string(line_no) +
                       ": time must be finite and >= 0");
    }
    if (fields[1].empty() || fields[2].empty()) {
      throw data_error("ingest: line " + std::to_string(line_no) +
                       ": empty vertex label");
    }
    if (fields[1] == fields[2]) {
      res.warnings.push_back("line " + std::to_string(line_no) +
                             ": self-loop dropped");
      continue;
    }
    e.u = id_of(fields[1]);
    e.v = id_of(fields[2]);
    if (mode == EdgeMode::attributed) {
      try {
        std::size_t pos = 0;
        e.attr = std::stoi(fields[3], &pos);
        if (pos != fields[3].size()) throw std::invalid_argument("k");
      } catch (const std::exception&) {
        throw data_error("ingest: line " + std::to_string(line_no) +
                         ": bad attribute `" + fields[3] + "`");
      }
      if (e.attr < 1 || (K > 0 && e.attr > K)) {
        throw data_error("ingest: line " + std::to_string(line_no) +
                         ": attribute outside {1.." + std::to_string(K) + "}");
      }
      max_attr = std::max(max_attr, e.attr);
    }
    max_t = std::max(max_t, e.t);
    res.log.events.push_back(e);
  }

  std::stable_sort(res.log.events.begin(), res.log.events.end(),
                   [](const EdgeEvent& a, const EdgeEvent& b) { return a.t < b.t; });
  res.log.n = static_cast<int>(intern.size());
  res.log.mode = mode;
  res.log.K = K > 0 ? K : std::max(max_attr, 1);
  res.log.T = T_override ? *T_override : max_t * 1.0001;
  if (!(res.log.T > 0.0)) {
    throw data_error("ingest: cannot infer a positive horizon T");
  }
  return res;
}

inline IngestResult ingest_csv_file(const std::string& path, EdgeMode mode, int K,
                                    std::optional<double> T_override = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw data_error("ingest: cannot open " + path);
  return ingest_csv(in, mode, K, T_override);
}

// Writes the event CSV.  Without explicit labels, vertex ids are
// written as decimal strings.
inline void write_events_csv(std::ostream& out, const EventLog& log,
                             const std::vector<std::string>* labels = nullptr) {
  const bool attr = log.attributed();
  out << (attr ? "t,u,v,k\n" : "t,u,v\n");
  auto name = [&](int id) {
    return labels ? (*labels)[static_cast<std::size_t>(id) - 1]
                  : std::to_string(id);
  };
  for (const EdgeEvent& e : log.events) {
    out << detail::fmt_double(e.t) << ',' << name(e.u) << ',' << name(e.v);
    if (attr) out << ',' << e.attr;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// JSON serialization.

inline Json to_json(const DirichletParams& a) {
  Json j = Json::array();
  for (Eigen::Index k = 0; k < a.alpha().size(); ++k) j.push_back(a.alpha()[k]);
  return j;
}

inline Json to_json(const ScenarioConfig& sc) {
  return Json{{"name", sc.name},
              {"n", sc.n},
              {"T", sc.T},
              {"K", sc.K},
              {"lambda", sc.lambda},
              {"alpha0", to_json(sc.alpha0)},
              {"alpha1", to_json(sc.alpha1)},
              {"window", {sc.window.tau1, sc.window.tau2}},
              {"subset", sc.subset.members},
              {"mode", sc.mode == EdgeMode::attributed ? "attributed"
                                                       : "unattributed"},
              {"seed", sc.seed},
              {"phi", mean_angle(sc.alpha0, sc.alpha1)}};
}

inline Json detect_report_json(const SelectionReport& rep,
                               const std::vector<std::string>& labels,
                               const Json& resolved_config,
                               std::uint64_t seed) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = seed;
  j["config"] = resolved_config;
  j["bic_hom"] = rep.bic_hom;
  j["bic_het"] = rep.bic_het;
  j["decision"] = rep.decision == Decision::heterogeneous ? "heterogeneous"
                                                          : "homogeneous";
  j["stopped_reason"] = rep.stopped_reason;
  Json parts = Json::array();
  for (const AcceptedPartition& p : rep.partitions) {
    Json wins = Json::array();
    for (const auto& [a, b] : p.window_original) wins.push_back({a, b});
    Json members = Json::array();
    for (int v : p.model.subset.members) {
      members.push_back(labels[static_cast<std::size_t>(v) - 1]);
    }
    parts.push_back(Json{{"provenance", p.provenance},
                         {"window_local", {p.model.window.tau1, p.model.window.tau2}},
                         {"window_original", wins},
                         {"members", members},
                         {"alpha0", to_json(p.model.alpha0)},
                         {"alpha1", to_json(p.model.alpha1)},
                         {"lambda", p.model.lambda},
                         {"bic_hom", p.bic_hom},
                         {"bic_het", p.bic_het},
                         {"delta_bic", p.delta_bic},
                         {"region_events", p.region_events}});
  }
  j["partitions"] = parts;
  return j;
}

inline void write_membership_csv(std::ostream& out, const SelectionReport& rep,
                                 const std::vector<std::string>& labels) {
  out << "partition,vertex,probability\n";
  for (const AcceptedPartition& p : rep.partitions) {
    for (std::size_t i = 0; i < p.membership_probs.size(); ++i) {
      out << p.provenance << ',' << labels[i] << ','
          << detail::fmt_double(p.membership_probs[i]) << '\n';
    }
  }
}

inline void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows) {
  out << "scenario,n,m,lambda,avg_edges_per_pair,power,sensitivity,specificity,"
         "cp_error,replicates,failures\n";
  for (const StudyRow& r : rows) {
    out << r.scenario << ',' << r.n << ',' << r.m << ','
        << detail::fmt_double(r.lambda) << ','
        << detail::fmt_double(r.avg_edges_per_pair) << ','
        << detail::fmt_double(r.power) << ',' << detail::fmt_double(r.sensitivity)
        << ',' << detail::fmt_double(r.specificity) << ','
        << detail::fmt_double(r.cp_error) << ',' << r.replicates << ','
        << r.failures << '\n';
  }
}

inline Json study_rows_json(const std::vector<StudyRow>& rows,
                            const Json& resolved_config, std::uint64_t seed) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["seed"] = seed;
  j["config"] = resolved_config;
  Json out = Json::array();
  for (const StudyRow& r : rows) {
    out.push_back(Json{{"scenario", r.scenario},
                       {"n", r.n},
                       {"m", r.m},
                       {"lambda", r.lambda},
                       {"avg_edges_per_pair", r.avg_edges_per_pair},
                       {"power", r.power},
                       {"sensitivity", r.sensitivity},
                       {"specificity", r.specificity},
                       {"cp_error", r.cp_error},
                       {"replicates", r.replicates},
                       {"failures", r.failures}});
  }
  j["rows"] = out;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << text;
}

}  // namespace latproc
