// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Surrogate-vs-solver comparison over a set of drug configurations: per-curve
// normalized squared differences, APD90 errors, and wall-clock timings.

#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hsbinn/biomarkers.hpp"
#include "hsbinn/cap_model.hpp"
#include "hsbinn/mlp.hpp"
#include "hsbinn/ode_solver.hpp"
#include "hsbinn/serialize.hpp"

namespace hsbinn {

/// Predicts the 14 states (rows) at the given times (columns).
using Surrogate = std::function<MatrixXd(const DrugConfig&, std::span<const double>)>;

struct ConfigEval {
  DrugConfig drug;
  std::array<double, kNumStates> nsd{};
  BiomarkerResult ref, pred;
  double apd90_error = std::numeric_limits<double>::quiet_NaN();  ///< |pred - ref|, ms
  double solver_seconds = 0.0;
  double surrogate_seconds = 0.0;
  std::string error;  ///< solver failure; the config is then skipped
};

struct EvalReport {
  std::vector<ConfigEval> configs;
  std::array<Summary, kNumStates> nsd;
  Summary apd90_error;
  std::size_t apd90_excluded = 0;  ///< configs with an invalid AP on either side
  std::size_t failed = 0;          ///< configs whose reference solve failed
  double solver_seconds = 0.0;
  double surrogate_seconds = 0.0;
  /// Externally supplied APD90 error summaries of other methods, by name.
  std::map<std::string, Summary> baselines;

  double speedup() const { return surrogate_seconds > 0.0 ? solver_seconds / surrogate_seconds : 0.0; }
};

inline EvalReport evaluate(const Surrogate& surrogate, const std::vector<DrugConfig>& drugs, const StimulusSpec& stim,
                           const SolveConfig& cfg, const StateVector& u0 = resting_state(-85.0),
                           const ModelConstants& constants = {}) {
  using clock = std::chrono::steady_clock;
  EvalReport rep;
  std::array<std::vector<double>, kNumStates> nsd_all;
  std::vector<double> apd_err;
  for (const auto& d : drugs) {
    ConfigEval ce;
    ce.drug = d;
    Trajectory ref;
    auto t0 = clock::now();
    try {
      ref = solve(d, stim, cfg, u0, constants);
    } catch (const std::exception& e) {
      ce.error = e.what();
      ++rep.failed;
      rep.configs.push_back(ce);
      continue;
    }
    auto t1 = clock::now();
    const MatrixXd pred = surrogate(d, ref.t);
    auto t2 = clock::now();
    ce.solver_seconds = std::chrono::duration<double>(t1 - t0).count();
    ce.surrogate_seconds = std::chrono::duration<double>(t2 - t1).count();
    if (pred.rows() != kNumStates || pred.cols() != static_cast<Eigen::Index>(ref.size()))
      throw DomainError("evaluate: surrogate returned the wrong shape");
    for (int k = 0; k < kNumStates; ++k) {
      const auto rk = ref.column(k);
      std::vector<double> pk(pred.cols());
      for (Eigen::Index j = 0; j < pred.cols(); ++j) pk[j] = pred(k, j);
      ce.nsd[k] = nsd(pk, rk);
      nsd_all[k].push_back(ce.nsd[k]);
      if (k == var::V) {
        ce.ref = apd90(ref.t, rk, stim.onset);
        ce.pred = apd90(ref.t, pk, stim.onset);
      }
    }
    if (ce.ref.valid && ce.pred.valid) {
      ce.apd90_error = std::abs(ce.pred.apd90 - ce.ref.apd90);
      apd_err.push_back(ce.apd90_error);
    } else {
      ++rep.apd90_excluded;
    }
    rep.solver_seconds += ce.solver_seconds;
    rep.surrogate_seconds += ce.surrogate_seconds;
    rep.configs.push_back(ce);
  }
  if (nsd_all[0].empty()) throw DomainError("evaluate: no configuration could be solved");
  for (int k = 0; k < kNumStates; ++k) rep.nsd[k] = summarize(nsd_all[k]);
  if (!apd_err.empty()) rep.apd90_error = summarize(apd_err);
  return rep;
}

/// The solver standing in for the surrogate (self-comparison).
inline Surrogate solver_surrogate(const StimulusSpec& stim, const SolveConfig& cfg,
                                  const StateVector& u0 = resting_state(-85.0), const ModelConstants& constants = {}) {
  return [=](const DrugConfig& d, std::span<const double> t) {
    const Trajectory tr = solve(d, stim, cfg, u0, constants);
    if (tr.size() != t.size()) throw DomainError("solver surrogate: grid mismatch");
    MatrixXd out(kNumStates, tr.size());
    for (std::size_t j = 0; j < tr.size(); ++j)
      for (int k = 0; k < kNumStates; ++k) out(k, j) = tr.y[j][k];
    return out;
  };
}

inline void to_json(json& j, const Summary& s) {
  j = {{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"mean", s.mean}, {"q3", s.q3}, {"max", s.max}, {"n", s.n}};
}
inline void from_json(const json& j, Summary& s) {
  detail::expect_keys(j, "summary", {"min", "q1", "median", "mean", "q3", "max", "n"});
  detail::read(j, "min", s.min);
  detail::read(j, "q1", s.q1);
  detail::read(j, "median", s.median);
  detail::read(j, "mean", s.mean);
  detail::read(j, "q3", s.q3);
  detail::read(j, "max", s.max);
  detail::read(j, "n", s.n);
}

namespace detail {
inline json nan_to_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }
}  // namespace detail

inline json report_to_json(const EvalReport& r) {
  json j;
  json nsd = json::object();
  for (int k = 0; k < kNumStates; ++k) nsd[std::string(kStateNames[k])] = r.nsd[k];
  j["nsd"] = nsd;
  j["apd90_abs_error_ms"] = r.apd90_error;
  j["apd90_excluded"] = r.apd90_excluded;
  j["failed"] = r.failed;
  j["solver_seconds"] = r.solver_seconds;
  j["surrogate_seconds"] = r.surrogate_seconds;
  j["speedup"] = r.speedup();
  j["baselines"] = r.baselines;
  json per = json::array();
  for (const auto& c : r.configs) {
    per.push_back({{"drug", c.drug},
                   {"nsd", c.nsd},
                   {"apd90_ref", detail::nan_to_null(c.ref.apd90)},
                   {"apd90_pred", detail::nan_to_null(c.pred.apd90)},
                   {"apd90_abs_error", detail::nan_to_null(c.apd90_error)},
                   {"solver_seconds", c.solver_seconds},
                   {"surrogate_seconds", c.surrogate_seconds},
                   {"error", c.error}});
  }
  j["configs"] = per;
  return j;
}

/// Summary table: one row per metric (14 curves, then APD90 error and any
/// baselines), columns metric,min,q1,median,mean,q3,max,n.
inline std::string summary_csv(const EvalReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "metric,min,q1,median,mean,q3,max,n\n";
  auto row = [&](const std::string& name, const Summary& s) {
    os << name;
    for (double v : s.values()) os << ',' << v;
    os << ',' << s.n << '\n';
  };
  for (int k = 0; k < kNumStates; ++k) row("nsd_" + std::string(kStateNames[k]), r.nsd[k]);
  row("apd90_abs_error", r.apd90_error);
  for (const auto& [name, s] : r.baselines) row("baseline_" + name, s);
  return os.str();
}

/// Parses the output of summary_csv back into metric -> Summary.
inline std::map<std::string, Summary> parse_summary_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "metric,min,q1,median,mean,q3,max,n")
    throw FormatError("summary csv: unexpected header");
  std::map<std::string, Summary> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, cell;
    std::getline(ls, name, ',');
    std::array<double, 6> v{};
    for (auto& x : v) {
      if (!std::getline(ls, cell, ',')) throw FormatError("summary csv: short row for " + name);
      x = std::stod(cell);
    }
    if (!std::getline(ls, cell, ',')) throw FormatError("summary csv: short row for " + name);
    out[name] = {v[0], v[1], v[2], v[3], v[4], v[5], static_cast<std::size_t>(std::stoull(cell))};
  }
  return out;
}

}  // namespace hsbinn
