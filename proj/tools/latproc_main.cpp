// Apache License, Version 2.0, refer to LICENSE.txt
//
// Command-line front end: data ingestion checks, change detection
// reports, stream simulation and the simulation study.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "latproc/io.hpp"

namespace {

using latproc::Json;

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  std::ifstream in(path);
  if (!in) throw latproc::invalid_input("cannot open config file: " + path);
  try {
    return Json::parse(in);
  } catch (const std::exception& e) {
    throw latproc::invalid_input(std::string("bad config file: ") + e.what());
  }
}

// CLI flags override config-file values, which override defaults.
template <typename T>
T pick(const CLI::App* cmd, const std::string& flag, const Json& cfg,
       std::initializer_list<const char*> path, const T& cli_value, T def) {
  if (cmd->count(flag) > 0) return cli_value;
  const Json* node = &cfg;
  for (const char* key : path) {
    if (!node->contains(key)) return def;
    node = &(*node)[key];
  }
  try {
    return node->get<T>();
  } catch (const std::exception&) {
    throw latproc::invalid_input("config: bad value for " + flag);
  }
}

latproc::EdgeMode parse_mode(const std::string& s) {
  if (s == "attributed") return latproc::EdgeMode::attributed;
  if (s == "unattributed") return latproc::EdgeMode::unattributed;
  throw latproc::invalid_input("mode must be `attributed` or `unattributed`");
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

// Accepts "1,2,5" and "1-10" range syntax.
std::vector<int> parse_id_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const int lo = std::stoi(item.substr(0, dash));
      const int hi = std::stoi(item.substr(dash + 1));
      for (int v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(std::stoi(item));
    }
  }
  return out;
}

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--out", opts.out, "output path prefix");
  cmd->add_option("--seed", opts.seed, "RNG seed");
}

struct ModelOpts {
  std::string mode = "attributed";
  int K = 2;
  double time_unit = 0.0;
  int candidates = 5000;
  double xi = 0.5;
  int max_iters = 100;
  double rel_tol = 1e-4;
  int segments = 5;
  int max_depth = 3;
  int min_events = 50;
  int threads = 1;
};

void add_model_opts(CLI::App* cmd, ModelOpts& m) {
  cmd->add_option("--mode", m.mode, "attributed | unattributed");
  cmd->add_option("--K", m.K, "attribute count / latent dimension");
  cmd->add_option("--time-unit", m.time_unit,
                  "bin length for rate fixing (default T/100)");
  cmd->add_option("--candidates", m.candidates, "E-step candidate intervals");
  cmd->add_option("--xi", m.xi, "membership threshold");
  cmd->add_option("--max-iters", m.max_iters, "EM iteration cap");
  cmd->add_option("--rel-tol", m.rel_tol, "EM convergence tolerance");
  cmd->add_option("--segments", m.segments, "initializer time segments");
  cmd->add_option("--depth", m.max_depth, "partition recursion depth");
  cmd->add_option("--min-events", m.min_events, "smallest splittable region");
  cmd->add_option("--threads", m.threads, "worker threads for studies");
}

struct Resolved {
  latproc::EdgeMode mode;
  int K;
  latproc::SelectionConfig selection;
  int threads;
  Json as_json;
};

Resolved resolve_model(const CLI::App* cmd, const ModelOpts& m, const Json& cfg,
                       std::uint64_t seed) {
  Resolved r;
  const std::string mode_s =
      pick<std::string>(cmd, "--mode", cfg, {"mode"}, m.mode, "attributed");
  r.mode = parse_mode(mode_s);
  r.K = pick(cmd, "--K", cfg, {"K"}, m.K, 2);
  r.selection.max_depth = pick(cmd, "--depth", cfg, {"selection", "max_depth"},
                               m.max_depth, 3);
  r.selection.min_events =
      pick(cmd, "--min-events", cfg, {"selection", "min_events"}, m.min_events, 50);
  r.selection.em.num_candidates =
      pick(cmd, "--candidates", cfg, {"em", "num_candidates"}, m.candidates, 5000);
  r.selection.em.xi = pick(cmd, "--xi", cfg, {"em", "xi"}, m.xi, 0.5);
  r.selection.em.max_iters =
      pick(cmd, "--max-iters", cfg, {"em", "max_iters"}, m.max_iters, 100);
  r.selection.em.rel_tol =
      pick(cmd, "--rel-tol", cfg, {"em", "rel_tol"}, m.rel_tol, 1e-4);
  r.selection.em.time_unit =
      pick(cmd, "--time-unit", cfg, {"time_unit"}, m.time_unit, 0.0);
  r.selection.em.init.r =
      pick(cmd, "--segments", cfg, {"init", "r"}, m.segments, 5);
  r.threads = pick(cmd, "--threads", cfg, {"threads"}, m.threads, 1);

  r.as_json = Json{
      {"mode", mode_s},
      {"K", r.K},
      {"time_unit", r.selection.em.time_unit},
      {"seed", seed},
      {"threads", r.threads},
      {"em",
       {{"num_candidates", r.selection.em.num_candidates},
        {"xi", r.selection.em.xi},
        {"max_iters", r.selection.em.max_iters},
        {"rel_tol", r.selection.em.rel_tol},
        {"membership_prior", r.selection.em.membership_prior}}},
      {"init",
       {{"r", r.selection.em.init.r},
        {"kmeans_restarts", r.selection.em.init.kmeans_restarts},
        {"tolerance", r.selection.em.init.tolerance}}},
      {"selection",
       {{"max_depth", r.selection.max_depth},
        {"min_events", r.selection.min_events}}}};
  return r;
}

latproc::ScenarioConfig find_scenario(const std::string& name) {
  for (const auto& sc : latproc::paper_scenarios()) {
    if (sc.name == name) return sc;
  }
  throw latproc::invalid_input("unknown scenario `" + name + "`");
}

int run(int argc, char** argv) {
  CLI::App app{"latproc: change detection in streaming networks via a "
               "latent dot-product process model"};
  app.require_subcommand(1);

  // --- ingest-check ---------------------------------------------------
  auto* cmd_ingest = app.add_subcommand(
      "ingest-check", "parse an event CSV and report a summary");
  CommonOpts ic_common;
  ModelOpts ic_model;
  std::string ic_input;
  double ic_T = 0.0;
  add_common(cmd_ingest, ic_common);
  add_model_opts(cmd_ingest, ic_model);
  cmd_ingest->add_option("-i,--input", ic_input, "event CSV")->required();
  cmd_ingest->add_option("--T", ic_T, "observation horizon override");

  // --- detect ----------------------------------------------------------
  auto* cmd_detect =
      app.add_subcommand("detect", "fit and report time-dependent partitions");
  CommonOpts dt_common;
  ModelOpts dt_model;
  std::string dt_input;
  double dt_T = 0.0;
  add_common(cmd_detect, dt_common);
  add_model_opts(cmd_detect, dt_model);
  cmd_detect->add_option("-i,--input", dt_input, "event CSV")->required();
  cmd_detect->add_option("--T", dt_T, "observation horizon override");

  // --- simulate ----------------------------------------------------------
  auto* cmd_sim = app.add_subcommand(
      "simulate", "generate an event stream plus a ground-truth sidecar");
  CommonOpts sm_common;
  std::string sm_scenario = "sep-large-n50";
  int sm_n = 0, sm_K = 0;
  double sm_T = 0.0, sm_lambda = 0.0;
  std::string sm_window, sm_subset, sm_alpha0, sm_alpha1, sm_mode;
  add_common(cmd_sim, sm_common);
  cmd_sim->add_option("--scenario", sm_scenario, "scenario template name");
  cmd_sim->add_option("--n", sm_n, "vertex count override");
  cmd_sim->add_option("--T", sm_T, "horizon override");
  cmd_sim->add_option("--K", sm_K, "attribute count override");
  cmd_sim->add_option("--lambda", sm_lambda, "opportunity rate override");
  cmd_sim->add_option("--window", sm_window, "change window `tau1,tau2`");
  cmd_sim->add_option("--subset", sm_subset, "anomalous ids, e.g. `1-10`");
  cmd_sim->add_option("--alpha0", sm_alpha0, "baseline Dirichlet, comma list");
  cmd_sim->add_option("--alpha1", sm_alpha1, "anomalous Dirichlet, comma list");
  cmd_sim->add_option("--mode", sm_mode, "attributed | unattributed");

  // --- study -------------------------------------------------------------
  auto* cmd_study = app.add_subcommand(
      "study", "replicate the simulation protocol over a scenario grid");
  CommonOpts st_common;
  ModelOpts st_model;
  std::string st_scenarios = "all";
  int st_replicates = 50;
  std::string st_grid;
  add_common(cmd_study, st_common);
  add_model_opts(cmd_study, st_model);
  cmd_study->add_option("--scenarios", st_scenarios,
                        "comma-separated scenario names, or `all`");
  cmd_study->add_option("--replicates", st_replicates, "replicates per point");
  cmd_study->add_option("--lambda-grid", st_grid, "comma-separated rates");

  // --- fit-hom -------------------------------------------------------------
  auto* cmd_hom = app.add_subcommand(
      "fit-hom", "fit the homogeneous (single-group) model only");
  CommonOpts fh_common;
  ModelOpts fh_model;
  std::string fh_input;
  double fh_T = 0.0;
  add_common(cmd_hom, fh_common);
  add_model_opts(cmd_hom, fh_model);
  cmd_hom->add_option("-i,--input", fh_input, "event CSV")->required();
  cmd_hom->add_option("--T", fh_T, "observation horizon override");

  CLI11_PARSE(app, argc, argv);

  if (cmd_ingest->parsed()) {
    const Json cfg = load_config(ic_common.config_path);
    const Resolved r = resolve_model(cmd_ingest, ic_model, cfg, ic_common.seed);
    std::optional<double> T;
    if (cmd_ingest->count("--T") > 0) T = ic_T;
    const auto res = latproc::ingest_csv_file(ic_input, r.mode, r.K, T);
    latproc::validate_event_log(res.log);
    Json j{{"schema_version", latproc::kSchemaVersion},
           {"n", res.log.n},
           {"events", res.log.size()},
           {"T", res.log.T},
           {"K", res.log.K},
           {"mode", res.log.attributed() ? "attributed" : "unattributed"},
           {"warnings", res.warnings}};
    const std::string text = j.dump(2) + "\n";
    if (ic_common.out.empty()) {
      std::cout << text;
    } else {
      latproc::write_text_file(ic_common.out, text);
    }
    return 0;
  }

  if (cmd_detect->parsed()) {
    const Json cfg = load_config(dt_common.config_path);
    Resolved r = resolve_model(cmd_detect, dt_model, cfg, dt_common.seed);
    if (dt_common.out.empty()) {
      throw latproc::invalid_input("detect: --out prefix is required");
    }
    std::optional<double> T;
    if (cmd_detect->count("--T") > 0) T = dt_T;
    const auto res = latproc::ingest_csv_file(dt_input, r.mode, r.K, T);
    latproc::validate_event_log(res.log);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";

    latproc::Rng rng = latproc::make_rng(dt_common.seed);
    const auto report = latproc::iterative_partition(res.log, r.selection, rng);

    r.as_json["input"] = dt_input;
    const Json j = latproc::detect_report_json(report, res.labels, r.as_json,
                                               dt_common.seed);
    latproc::write_text_file(dt_common.out + ".json", j.dump(2) + "\n");
    std::ostringstream membership;
    latproc::write_membership_csv(membership, report, res.labels);
    latproc::write_text_file(dt_common.out + "_membership.csv", membership.str());
    std::cout << "partitions: " << report.partitions.size() << "\n";
    return 0;
  }

  if (cmd_sim->parsed()) {
    if (sm_common.out.empty()) {
      throw latproc::invalid_input("simulate: --out prefix is required");
    }
    latproc::ScenarioConfig sc = find_scenario(sm_scenario);
    if (cmd_sim->count("--n") > 0) {
      sc.n = sm_n;
      sc.lambda = 2.5 * sc.n * (sc.n - 1) / 2.0 / (sc.T * 0.28);
    }
    if (cmd_sim->count("--T") > 0) sc.T = sm_T;
    if (cmd_sim->count("--K") > 0) sc.K = sm_K;
    if (cmd_sim->count("--lambda") > 0) sc.lambda = sm_lambda;
    if (cmd_sim->count("--window") > 0) {
      const auto w = parse_double_list(sm_window);
      if (w.size() != 2) throw latproc::invalid_input("--window needs two values");
      sc.window = {w[0], w[1]};
    }
    if (cmd_sim->count("--subset") > 0) {
      sc.subset = latproc::VertexSubset::of(parse_id_list(sm_subset));
    }
    auto parse_alpha = [](const std::string& s) {
      const auto v = parse_double_list(s);
      latproc::Vec a(static_cast<Eigen::Index>(v.size()));
      for (std::size_t i = 0; i < v.size(); ++i) {
        a[static_cast<Eigen::Index>(i)] = v[i];
      }
      return latproc::DirichletParams(a);
    };
    if (cmd_sim->count("--alpha0") > 0) sc.alpha0 = parse_alpha(sm_alpha0);
    if (cmd_sim->count("--alpha1") > 0) sc.alpha1 = parse_alpha(sm_alpha1);
    if (cmd_sim->count("--mode") > 0) sc.mode = parse_mode(sm_mode);
    sc.seed = sm_common.seed;
    latproc::validate_scenario(sc);

    const latproc::EventLog log = latproc::simulate(sc);
    std::ostringstream events;
    latproc::write_events_csv(events, log);
    latproc::write_text_file(sm_common.out + ".csv", events.str());
    Json truth{{"schema_version", latproc::kSchemaVersion},
               {"scenario", latproc::to_json(sc)},
               {"events", log.size()}};
    latproc::write_text_file(sm_common.out + "_truth.json", truth.dump(2) + "\n");
    std::cout << "events: " << log.size() << "\n";
    return 0;
  }

  if (cmd_study->parsed()) {
    const Json cfg = load_config(st_common.config_path);
    const Resolved r = resolve_model(cmd_study, st_model, cfg, st_common.seed);
    if (st_common.out.empty()) {
      throw latproc::invalid_input("study: --out prefix is required");
    }
    std::vector<latproc::ScenarioConfig> scenarios;
    if (st_scenarios == "all") {
      scenarios = latproc::paper_scenarios();
    } else {
      std::stringstream ss(st_scenarios);
      std::string name;
      while (std::getline(ss, name, ',')) {
        if (!name.empty()) scenarios.push_back(find_scenario(name));
      }
    }
    if (scenarios.empty()) throw latproc::invalid_input("study: no scenarios");

    latproc::StudyConfig scfg;
    scfg.em = r.selection.em;
    scfg.master_seed = st_common.seed;
    scfg.threads = r.threads;
    if (cmd_study->count("--lambda-grid") > 0) {
      scfg.lambda_grid = parse_double_list(st_grid);
    }
    const auto rows = latproc::run_study(scenarios, st_replicates, scfg);

    Json jcfg = r.as_json;
    jcfg["replicates"] = st_replicates;
    jcfg["scenarios"] = st_scenarios;
    std::ostringstream csv;
    latproc::write_study_csv(csv, rows);
    latproc::write_text_file(st_common.out + ".csv", csv.str());
    const Json j = latproc::study_rows_json(rows, jcfg, st_common.seed);
    latproc::write_text_file(st_common.out + ".json", j.dump(2) + "\n");
    std::cout << "rows: " << rows.size() << "\n";
    return 0;
  }

  if (cmd_hom->parsed()) {
    const Json cfg = load_config(fh_common.config_path);
    const Resolved r = resolve_model(cmd_hom, fh_model, cfg, fh_common.seed);
    std::optional<double> T;
    if (cmd_hom->count("--T") > 0) T = fh_T;
    const auto res = latproc::ingest_csv_file(fh_input, r.mode, r.K, T);
    latproc::validate_event_log(res.log);
    const double unit = r.selection.em.time_unit > 0.0 ? r.selection.em.time_unit
                                                       : res.log.T / 100.0;
    const double lambda = latproc::fix_lambda(res.log, unit);
    const auto hom = latproc::fit_homogeneous(res.log, lambda);
    Json j{{"schema_version", latproc::kSchemaVersion},
           {"lambda", lambda},
           {"alpha", latproc::to_json(hom.alpha)},
           {"expected_dot", latproc::expected_dot(hom.alpha, hom.alpha)},
           {"loglik", hom.loglik}};
    const std::string text = j.dump(2) + "\n";
    if (fh_common.out.empty()) {
      std::cout << text;
    } else {
      latproc::write_text_file(fh_common.out, text);
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const latproc::invalid_input& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const latproc::data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const latproc::numerical_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
