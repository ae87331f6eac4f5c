// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Implementations behind the hsbinn command-line tool. Each command resolves
// its configuration (defaults, then preset, then config file, then flags),
// writes its artifacts and a JSON manifest next to them.

#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hsbinn/hsbinn.hpp"

namespace hsbinn {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitNumeric = 3, kExitIo = 4 };

/// Maps an exception escaping a command to a process exit code.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const DomainError*>(&e)) return kExitUsage;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const IntegrationError*>(&e) ||
      dynamic_cast<const CalibrationError*>(&e))
    return kExitNumeric;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kExitIo;
  return kExitFailure;
}

/// Every tunable of the pipeline in one place.
struct RunConfig {
  TrainMode mode = TrainMode::hyper;
  ModelConstants constants;
  StimulusSpec stimulus;
  SolveConfig solver;
  TrainConfig train = paper_preset();
  DatasetSpec dataset;
  DrugConfig drug;
  double v0 = -85.0;  ///< initial voltage; gates start at their steady states

  StateVector u0() const { return resting_state(v0); }

  TrainSetup setup() const { return {mode, dataset, drug, train, stimulus, solver, constants, u0()}; }
};

inline json config_json(const RunConfig& c) {
  return {{"mode", c.mode},         {"constants", c.constants}, {"stimulus", c.stimulus}, {"solver", c.solver},
          {"train", c.train},       {"dataset", c.dataset},     {"drug", c.drug},         {"v0", c.v0}};
}

/// Overlays a config object (or a manifest carrying one under "config").
inline void apply_config_json(RunConfig& c, json j) {
  if (j.contains("command") && j.contains("config")) j = j["config"];
  detail::expect_keys(j, "config", {"mode", "constants", "stimulus", "solver", "train", "dataset", "drug", "v0"});
  detail::read(j, "mode", c.mode);
  detail::read(j, "constants", c.constants);
  detail::read(j, "stimulus", c.stimulus);
  detail::read(j, "solver", c.solver);
  detail::read(j, "train", c.train);
  detail::read(j, "dataset", c.dataset);
  detail::read(j, "drug", c.drug);
  detail::read(j, "v0", c.v0);
}

inline json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed for " + path);
}

/// Options shared by all commands; optional fields override the config.
struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
  std::string preset;  ///< "paper" | "desk" | "" (keep default)
  std::optional<long> iters;
  std::optional<std::size_t> q;
  std::optional<double> lr_plateau;
  std::optional<double> obs_fraction;
  std::optional<std::string> mode;
  std::optional<double> c, ic50_naf, ic50_cal, ic50_tof, ic50_kr;
  std::string invocation;  ///< command line, recorded in the manifest
};

/// Rescales the lr breakpoints when they do not fit into `iterations`.
inline void fit_schedule(TrainConfig& t, long previous_iterations) {
  if (t.lr.decay_end <= t.iterations) return;
  const double f = static_cast<double>(t.iterations) / static_cast<double>(previous_iterations);
  t.lr.plateau_end = static_cast<long>(std::floor(t.lr.plateau_end * f));
  t.lr.decay_end = std::max(t.lr.plateau_end + 1, static_cast<long>(std::floor(t.lr.decay_end * f)));
  t.lr.decay_end = std::min(t.lr.decay_end, t.iterations);
  if (t.lr.plateau_end >= t.lr.decay_end) t.lr.plateau_end = t.lr.decay_end - 1;
}

inline RunConfig resolve_config(const CommonOptions& o) {
  RunConfig c;
  if (o.preset == "desk") {
    c.train = desk_preset();
  } else if (!o.preset.empty() && o.preset != "paper") {
    throw DomainError("unknown preset '" + o.preset + "' (expected paper or desk)");
  }
  if (!o.config_path.empty()) apply_config_json(c, read_json_file(o.config_path));
  if (o.mode) {
    if (*o.mode == "hyper") c.mode = TrainMode::hyper;
    else if (*o.mode == "sbinn") c.mode = TrainMode::sbinn;
    else throw DomainError("unknown mode '" + *o.mode + "' (expected hyper or sbinn)");
  }
  if (o.seed) {
    c.train.seed = *o.seed;
    c.dataset.seed = *o.seed;
  }
  if (o.deterministic) c.train.deterministic = true;
  if (o.iters) {
    if (*o.iters < 1) throw DomainError("--iters must be >= 1");
    const long before = c.train.iterations;
    c.train.iterations = *o.iters;
    if (o.preset == "desk") {
      const auto keep = c.train;
      c.train = desk_preset(*o.iters);
      c.train.seed = keep.seed;
      c.train.deterministic = keep.deterministic;
    } else {
      fit_schedule(c.train, before);
    }
  }
  if (o.q) c.dataset.q = *o.q;
  if (o.lr_plateau) c.train.lr.plateau_lr = *o.lr_plateau;
  if (o.obs_fraction) c.train.obs_fraction = *o.obs_fraction;
  if (o.c) c.drug.c = *o.c;
  if (o.ic50_naf) c.drug.ic50_naf = *o.ic50_naf;
  if (o.ic50_cal) c.drug.ic50_cal = *o.ic50_cal;
  if (o.ic50_tof) c.drug.ic50_tof = *o.ic50_tof;
  if (o.ic50_kr) c.drug.ic50_kr = *o.ic50_kr;
  c.constants.validate();
  c.stimulus.validate();
  c.solver.validate();
  c.dataset.validate();
  c.drug.validate();
  return c;
}

struct Manifest {
  Manifest(std::string cmd, json cfg, std::uint64_t s, std::vector<std::string> files)
      : command(std::move(cmd)), config(std::move(cfg)), seed(s), artifacts(std::move(files)) {}

  std::string command;
  json config;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  json timings = json::object();
  json extra = json::object();
  std::string invocation;

  json to_json() const {
    json j = {{"command", command}, {"config", config},   {"seed", seed},
              {"artifacts", artifacts}, {"tool_version", kToolVersion}, {"timings", timings},
              {"invocation", invocation}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    return j;
  }
};

inline void write_manifest(const std::string& path, const Manifest& m) { write_text_file(path, m.to_json().dump(2) + "\n"); }

inline std::string format_g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_header() {
  std::string h = "t";
  for (auto n : kStateNames) h += "," + std::string(n);
  return h + "\n";
}

/// Canonical trajectory CSV: header t,V,f_CaL,...,h_KL; values as %.17g.
inline std::string trajectory_csv(std::span<const double> t, const MatrixXd& states) {
  std::string out = csv_header();
  for (std::size_t j = 0; j < t.size(); ++j) {
    out += format_g17(t[j]);
    for (int k = 0; k < kNumStates; ++k) out += "," + format_g17(states(k, static_cast<Eigen::Index>(j)));
    out += "\n";
  }
  return out;
}

inline MatrixXd trajectory_matrix(const Trajectory& tr) {
  MatrixXd m(kNumStates, tr.size());
  for (std::size_t j = 0; j < tr.size(); ++j)
    for (int k = 0; k < kNumStates; ++k) m(k, static_cast<Eigen::Index>(j)) = tr.y[j][k];
  return m;
}

inline std::string trajectory_csv(const Trajectory& tr) { return trajectory_csv(tr.t, trajectory_matrix(tr)); }

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline std::string manifest_path_for_file(const std::string& out) { return out + ".manifest.json"; }

inline std::string in_dir(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline std::string require_out(const CommonOptions& o, const char* what) {
  if (o.out.empty()) throw DomainError(std::string(what) + ": --out is required");
  return o.out;
}

}  // namespace detail

// ---------------------------------------------------------------- simulate

inline Manifest cmd_simulate(const CommonOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig c = resolve_config(o);
  const std::string out = detail::require_out(o, "simulate");
  const Trajectory tr = solve(c.drug, c.stimulus, c.solver, c.u0(), c.constants);
  write_text_file(out, trajectory_csv(tr));
  Manifest m{"simulate", config_json(c), c.train.seed, {out}};
  m.timings["solve_seconds"] = detail::seconds_since(t0);
  m.extra["solver_stats"] = {{"accepted", tr.stats.accepted}, {"rejected", tr.stats.rejected},
                             {"rhs_evals", tr.stats.rhs_evals}};
  m.invocation = o.invocation;
  write_manifest(detail::manifest_path_for_file(out), m);
  return m;
}

// --------------------------------------------------------------- calibrate

/// Finds the weakest pulse reaching `target_peak` and writes the resolved
/// config with that stimulus to --out.
inline Manifest cmd_calibrate(const CommonOptions& o, double target_peak) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig c = resolve_config(o);
  const std::string out = detail::require_out(o, "calibrate");
  const StimulusSpec threshold = calibrate_stimulus(target_peak, c.stimulus, c.solver, c.constants);
  c.stimulus = threshold;
  write_text_file(out, config_json(c).dump(2) + "\n");
  Manifest m{"calibrate", config_json(c), c.train.seed, {out}};
  m.timings["calibrate_seconds"] = detail::seconds_since(t0);
  m.extra["target_peak"] = target_peak;
  m.extra["amplitude"] = threshold.amplitude;
  m.invocation = o.invocation;
  write_manifest(detail::manifest_path_for_file(out), m);
  return m;
}

// ---------------------------------------------------------------- gen-data

inline Manifest cmd_gen_data(const CommonOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig c = resolve_config(o);
  const std::string dir = detail::require_out(o, "gen-data");
  std::filesystem::create_directories(dir);
  const auto configs = generate_dataset(c.dataset);
  auto rng = make_rng(c.train.seed, stream::observations);
  const double fraction = c.train.obs_fraction > 0.0 ? c.train.obs_fraction : 1.0;
  const TrainingData data =
      build_observations(configs, fraction, rng, c.train.sampling, c.stimulus, c.solver, c.u0(), c.constants);

  std::string cfg_csv = "index,c,ic50_naf,ic50_cal,ic50_tof,ic50_kr\n";
  for (std::size_t i = 0; i < data.configs.size(); ++i) {
    const auto a = data.configs[i].to_array();
    cfg_csv += std::to_string(i);
    for (double v : a) cfg_csv += "," + format_g17(v);
    cfg_csv += "\n";
  }
  std::string obs_csv = "config," + csv_header();
  for (const auto& ob : data.obs) {
    obs_csv += std::to_string(ob.config) + "," + format_g17(ob.t);
    for (double v : ob.y) obs_csv += "," + format_g17(v);
    obs_csv += "\n";
  }
  const std::string p_cfg = detail::in_dir(dir, "configs.csv"), p_obs = detail::in_dir(dir, "observations.csv");
  write_text_file(p_cfg, cfg_csv);
  write_text_file(p_obs, obs_csv);
  Manifest m{"gen-data", config_json(c), c.train.seed, {p_cfg, p_obs}};
  m.timings["total_seconds"] = detail::seconds_since(t0);
  m.extra["configs"] = data.configs.size();
  m.extra["observations"] = data.obs.size();
  m.extra["warnings"] = data.warnings;
  m.invocation = o.invocation;
  write_manifest(detail::in_dir(dir, "manifest.json"), m);
  return m;
}

// ------------------------------------------------------------------- train

struct TrainCommandOptions {
  std::string resume;  ///< checkpoint to continue from
  std::optional<long> until;  ///< stop early at this iteration (schedule unchanged)
  bool quiet = false;
  long report_every = 1000;
};

inline Manifest cmd_train(const CommonOptions& o, const TrainCommandOptions& t) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dir = detail::require_out(o, "train");
  std::filesystem::create_directories(dir);
  const std::string ckpt = detail::in_dir(dir, "checkpoint.bin"), log = detail::in_dir(dir, "train_log.jsonl");

  std::optional<TrainSession> session;
  RunConfig c;
  if (!t.resume.empty()) {
    session.emplace(TrainSession::resume(t.resume));
    const TrainSetup& s = session->setup();
    c.mode = s.mode;
    c.constants = s.constants;
    c.stimulus = s.stimulus;
    c.solver = s.solver;
    c.train = s.train;
    c.dataset = s.dataset;
    c.drug = s.drug;
    c.v0 = s.u0[var::V];
    if (std::filesystem::absolute(t.resume) != std::filesystem::absolute(ckpt))
      std::filesystem::copy_file(t.resume, ckpt, std::filesystem::copy_options::overwrite_existing);
  } else {
    c = resolve_config(o);
    session.emplace(TrainSession::create(c.setup()));
  }
  const double setup_seconds = detail::seconds_since(t0);
  const long start = session->iteration();
  const auto t1 = std::chrono::steady_clock::now();
  TrainOptions opt;
  opt.checkpoint_path = ckpt;
  opt.log_path = log;
  if (t.until) {
    if (*t.until < session->iteration() || *t.until > session->setup().train.iterations)
      throw DomainError("--until must lie between the current and the final iteration");
    opt.until = *t.until;
  }
  if (!t.quiet)
    opt.progress = [&](long it, const LossReport& r) {
      if ((it + 1) % t.report_every == 0)
        std::fprintf(stderr, "iter %ld  loss %.6g  data %.4g  ic %.4g  ode %.4g  (%.0fs)\n", it + 1, r.total, r.data,
                     r.ic, r.ode_total, detail::seconds_since(t1));
    };
  train(*session, opt);

  Manifest m{"train", config_json(c), c.train.seed, {ckpt, log}};
  m.timings["setup_seconds"] = setup_seconds;
  m.timings["train_seconds"] = detail::seconds_since(t1);
  m.extra["start_iteration"] = start;
  m.extra["final_iteration"] = session->iteration();
  m.extra["resumed_from"] = t.resume;
  m.extra["ode_weights"] = session->weights().ode;
  m.extra["balance_raw"] = session->balance().raw;
  m.extra["observations"] = session->data().obs.size();
  m.extra["configs"] = session->data().configs;
  m.invocation = o.invocation;
  write_manifest(detail::in_dir(dir, "manifest.json"), m);
  return m;
}

// ----------------------------------------------------------------- predict

inline Manifest cmd_predict(const CommonOptions& o, const std::string& checkpoint) {
  const auto t0 = std::chrono::steady_clock::now();
  const SurrogateModel model = SurrogateModel::load(checkpoint);
  RunConfig c;
  c.drug = model.setup().drug;
  if (o.c) c.drug.c = *o.c;
  if (o.ic50_naf) c.drug.ic50_naf = *o.ic50_naf;
  if (o.ic50_cal) c.drug.ic50_cal = *o.ic50_cal;
  if (o.ic50_tof) c.drug.ic50_tof = *o.ic50_tof;
  if (o.ic50_kr) c.drug.ic50_kr = *o.ic50_kr;
  c.drug.validate();
  const std::string out = detail::require_out(o, "predict");
  const auto grid = output_grid(model.setup().solver.t_end, model.setup().solver.output_dt);
  const MatrixXd y = model.predict(c.drug, grid);
  write_text_file(out, trajectory_csv(grid, y));
  json cfg = setup_json(model.setup());
  cfg["drug"] = c.drug;
  Manifest m{"predict", cfg, model.setup().train.seed, {out}};
  m.timings["predict_seconds"] = detail::seconds_since(t0);
  m.extra["checkpoint"] = checkpoint;
  m.extra["checkpoint_iteration"] = model.iteration();
  m.invocation = o.invocation;
  write_manifest(detail::manifest_path_for_file(out), m);
  return m;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::string checkpoint;
  bool oracle = false;              ///< compare the solver with itself
  std::size_t test_q = 20;          ///< number of held-out configurations
  std::optional<std::uint64_t> test_seed;
  std::vector<std::pair<std::string, std::string>> baselines;  ///< name, summary CSV path
};

inline Manifest cmd_evaluate(const CommonOptions& o, const EvaluateOptions& e) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dir = detail::require_out(o, "evaluate");
  std::filesystem::create_directories(dir);

  std::optional<SurrogateModel> model;
  RunConfig c;
  if (!e.oracle) {
    if (e.checkpoint.empty()) throw DomainError("evaluate: --checkpoint is required unless --oracle is given");
    model.emplace(SurrogateModel::load(e.checkpoint));
    const TrainSetup& s = model->setup();
    c.mode = s.mode;
    c.constants = s.constants;
    c.stimulus = s.stimulus;
    c.solver = s.solver;
    c.train = s.train;
    c.dataset = s.dataset;
    c.drug = s.drug;
    c.v0 = s.u0[var::V];
  } else {
    c = resolve_config(o);
  }

  std::vector<DrugConfig> drugs;
  if (c.mode == TrainMode::sbinn) {
    drugs = {c.drug};
  } else {
    DatasetSpec test = c.dataset;
    test.q = e.test_q;
    test.seed = e.test_seed.value_or(o.seed.value_or(c.dataset.seed));
    drugs = generate_dataset(test, stream::test_set);
  }
  const Surrogate sur = model ? Surrogate([&](const DrugConfig& d, std::span<const double> t) {
    return model->predict(d, t);
  })
                              : solver_surrogate(c.stimulus, c.solver, c.u0(), c.constants);
  EvalReport rep = evaluate(sur, drugs, c.stimulus, c.solver, c.u0(), c.constants);
  for (const auto& [name, path] : e.baselines) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open baseline " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const auto table = parse_summary_csv(ss.str());
    auto it = table.find("apd90_abs_error");
    if (it == table.end()) throw FormatError(path + ": no apd90_abs_error row");
    rep.baselines[name] = it->second;
  }

  const std::string p_json = detail::in_dir(dir, "report.json"), p_csv = detail::in_dir(dir, "summary.csv");
  json rj = report_to_json(rep);
  rj["oracle"] = e.oracle;
  write_text_file(p_json, rj.dump(2) + "\n");
  write_text_file(p_csv, summary_csv(rep));

  Manifest m{"evaluate", config_json(c), c.train.seed, {p_json, p_csv}};
  json per = json::array();
  for (const auto& ce : rep.configs)
    per.push_back({{"drug", ce.drug}, {"solver_seconds", ce.solver_seconds}, {"surrogate_seconds", ce.surrogate_seconds}});
  m.timings["total_seconds"] = detail::seconds_since(t0);
  m.timings["solver_seconds"] = rep.solver_seconds;
  m.timings["surrogate_seconds"] = rep.surrogate_seconds;
  m.timings["speedup"] = rep.speedup();
  m.timings["per_config"] = per;
  m.extra["checkpoint"] = e.checkpoint;
  m.extra["oracle"] = e.oracle;
  m.extra["test_configs"] = drugs.size();
  m.invocation = o.invocation;
  write_manifest(detail::in_dir(dir, "manifest.json"), m);
  return m;
}

}  // namespace hsbinn
