// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Reference integrator for the cell model: Dormand-Prince 5(4) with local
// error control and 4th-order continuous extension, sampled on a uniform grid.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hsbinn/cap_model.hpp"
#include "hsbinn/error.hpp"
#include "hsbinn/parallel.hpp"

namespace hsbinn {

struct SolveConfig {
  double t_end = 500.0;
  double rtol = 1e-7;
  double atol = 1e-9;
  double max_step = 0.0;  ///< 0 means unbounded
  double output_dt = 0.5;
  double min_step = 1e-12;
  long max_steps = 20'000'000;
  /// When > 0 the error controller is disabled and this step is used
  /// everywhere (the last step of each segment is shortened to land on it).
  double fixed_step = 0.0;

  void validate() const {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw DomainError("t_end must be > 0");
    if (!(rtol > 0.0) || !(atol > 0.0)) throw DomainError("solver tolerances must be > 0");
    if (!(output_dt > 0.0)) throw DomainError("output grid spacing must be > 0");
    if (max_step < 0.0 || fixed_step < 0.0 || !(min_step > 0.0))
      throw DomainError("invalid step size limits");
  }
};

struct SolverStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

struct Trajectory {
  std::vector<double> t;
  std::vector<StateVector> y;
  DrugConfig drug;
  StimulusSpec stimulus;
  SolverStats stats;

  std::size_t size() const { return t.size(); }

  std::vector<double> column(int index) const {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i][index];
    return out;
  }
};

/// Uniform grid 0, dt, 2 dt, ... ending exactly at t_end.
inline std::vector<double> output_grid(double t_end, double dt) {
  const auto n = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
  std::vector<double> grid;
  grid.reserve(n + 2);
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) * dt);
  if (t_end - grid.back() > 1e-9 * t_end) grid.push_back(t_end);
  else grid.back() = t_end;
  return grid;
}

/// Voltage v0 with every gate at its steady state for v0.
inline StateVector resting_state(double v0) {
  StateVector u{};
  u[var::V] = v0;
  const auto inf = gate_steady_states(v0);
  std::copy(inf.begin(), inf.end(), u.begin() + 1);
  return u;
}

/// Voltage at which the total ionic current vanishes with gates at steady
/// state, found by bisection on [lo, hi]. The returned resting_state is an
/// exact fixed point of the unstimulated model (up to root precision).
inline double equilibrium_voltage(const DrugConfig& drug = drug_free(), const ModelConstants& k = {},
                                  double lo = -90.0, double hi = -80.0) {
  const auto block = ChannelBlock::from(drug);
  auto net_current = [&](double v) {
    double s = 0.0;
    for (double c : ionic_currents(resting_state(v), block, k)) s += c;
    return s;
  };
  double f_lo = net_current(lo);
  if (f_lo * net_current(hi) > 0.0) throw DomainError("equilibrium_voltage: bracket does not contain a root");
  for (int it = 0; it < 200 && hi - lo > 1e-14 * std::abs(lo); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = net_current(mid);
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace detail {

/// One Dormand-Prince 5(4) integration of y' = f(t, y) on [a, b].
/// `emit(t_grid, y)` is called for every requested output time in (a, b]
/// using the step's dense output. `h` carries the step size in and out.
template <std::size_t N, class F, class Emit>
void dopri5_segment(F&& f, double a, double b, std::array<double, N>& y, double& h, const SolveConfig& cfg,
                    const std::vector<double>& grid, std::size_t& next_out, Emit&& emit, SolverStats& stats) {
  using Vec = std::array<double, N>;
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                   a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;
  // Continuous extension coefficients.
  constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                   d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                   d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

  const bool fixed = cfg.fixed_step > 0.0;
  auto eval = [&](double t, const Vec& u) {
    ++stats.rhs_evals;
    return f(t, u);
  };
  auto scale = [&](double u0, double u1) { return cfg.atol + cfg.rtol * std::max(std::abs(u0), std::abs(u1)); };

  Vec k1 = eval(a, y);
  if (fixed) {
    h = cfg.fixed_step;
  } else if (!(h > 0.0)) {
    // Initial step guess (Hairer, Norsett & Wanner, II.4).
    double d0 = 0, dd1 = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = scale(y[i], y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      dd1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / N);
    dd1 = std::sqrt(dd1 / N);
    double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
    h0 = std::min(h0, b - a);
    Vec y1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + h0 * k1[i];
    const Vec f1 = eval(a + h0, y1);
    double d2 = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = scale(y[i], y[i]);
      d2 += ((f1[i] - k1[i]) / sc) * ((f1[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / N) / h0;
    const double dm = std::max(dd1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    h = std::min({100.0 * h0, h1, b - a});
  }

  double t = a;
  bool last_rejected = false;
  Vec k2, k3, k4, k5, k6, k7, tmp, ynew;
  while (t < b) {
    if (stats.accepted + stats.rejected >= cfg.max_steps)
      throw IntegrationError("maximum number of steps exceeded at t=" + std::to_string(t), t);
    if (cfg.max_step > 0.0) h = std::min(h, cfg.max_step);
    bool last = false;
    if (t + h >= b - 1e-12 * std::max(1.0, std::abs(b))) {
      h = b - t;
      last = true;
    }

    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    k2 = eval(t + c2 * h, tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    k3 = eval(t + c3 * h, tmp);
    for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    k4 = eval(t + c4 * h, tmp);
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    k5 = eval(t + c5 * h, tmp);
    for (std::size_t i = 0; i < N; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    k6 = eval(t + h, tmp);
    for (std::size_t i = 0; i < N; ++i)
      ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    const double t_new = last ? b : t + h;
    k7 = eval(t_new, ynew);

    double err = 0.0;
    if (!fixed) {
      for (std::size_t i = 0; i < N; ++i) {
        const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double r = e / scale(y[i], ynew[i]);
        err += r * r;
      }
      err = std::sqrt(err / N);
      if (!std::isfinite(err)) err = 1e10;
    }

    if (fixed || err <= 1.0) {
      ++stats.accepted;
      // Dense output for grid points in (t, t_new].
      while (next_out < grid.size() && grid[next_out] <= t_new + 1e-12 * std::max(1.0, std::abs(t_new))) {
        const double tg = grid[next_out];
        if (tg >= t_new - 1e-12 * std::max(1.0, std::abs(t_new))) {
          emit(tg, ynew);
        } else {
          const double theta = (tg - t) / h;
          const double theta1 = 1.0 - theta;
          Vec out;
          for (std::size_t i = 0; i < N; ++i) {
            const double r2 = ynew[i] - y[i];
            const double r3 = h * k1[i] - r2;
            const double r4 = r2 - h * k7[i] - r3;
            const double r5 =
                h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
            out[i] = y[i] + theta * (r2 + theta1 * (r3 + theta * (r4 + theta1 * r5)));
          }
          emit(tg, out);
        }
        ++next_out;
      }
      t = t_new;
      y = ynew;
      k1 = k7;
      if (!fixed) {
        double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.2);
        fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
        h *= fac;
      }
      last_rejected = false;
    } else {
      ++stats.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
      if (h < cfg.min_step)
        throw IntegrationError("step size underflow at t=" + std::to_string(t), t);
    }
  }
}

inline void check_state(const StateVector& u0) {
  if (!std::isfinite(u0[var::V])) throw DomainError("initial voltage must be finite");
  for (int g = 1; g < kNumStates; ++g)
    if (!(u0[g] >= 0.0 && u0[g] <= 1.0)) throw DomainError("initial gate values must lie in [0, 1]");
}

}  // namespace detail

/// Integrates the model from u0 over [0, cfg.t_end]. The stimulus pulse edges
/// are treated as breakpoints: integration restarts there, and each segment
/// sees a constant stimulus current.
inline Trajectory solve(const DrugConfig& drug, const StimulusSpec& stim, const SolveConfig& cfg,
                        const StateVector& u0, const ModelConstants& constants = {}) {
  cfg.validate();
  detail::check_state(u0);
  const CapModel model(drug, stim, constants);

  Trajectory traj;
  traj.drug = drug;
  traj.stimulus = stim;
  const auto grid = output_grid(cfg.t_end, cfg.output_dt);
  traj.t.reserve(grid.size());
  traj.y.reserve(grid.size());
  auto emit = [&](double t, const StateVector& u) {
    traj.t.push_back(t);
    traj.y.push_back(u);
  };

  std::vector<double> breaks{0.0, cfg.t_end};
  for (double b : {stim.onset, stim.onset + stim.duration})
    if (b > 0.0 && b < cfg.t_end) breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  StateVector y = u0;
  emit(0.0, y);
  std::size_t next_out = 1;
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s], b = breaks[s + 1];
    const double i_stim = stimulus(0.5 * (a + b), stim);
    auto f = [&](double, const StateVector& u) { return model.rhs_with_stimulus(i_stim, u); };
    double h = 0.0;
    detail::dopri5_segment(f, a, b, y, h, cfg, grid, next_out, emit, traj.stats);
  }
  return traj;
}

inline Trajectory solve(const DrugConfig& drug, const StimulusSpec& stim, const SolveConfig& cfg = {}) {
  return solve(drug, stim, cfg, resting_state(-85.0));
}

struct BatchItem {
  std::optional<Trajectory> trajectory;
  std::string error;  ///< empty on success
  bool ok() const { return trajectory.has_value(); }
};

/// Element-wise solve. Failures are recorded per element; the batch goes on.
inline std::vector<BatchItem> solve_batch(const std::vector<DrugConfig>& drugs, const StimulusSpec& stim,
                                          const SolveConfig& cfg, const StateVector& u0,
                                          const ModelConstants& constants = {}, int threads = thread_count()) {
  std::vector<BatchItem> out(drugs.size());
  parallel_for(
      drugs.size(),
      [&](std::size_t i) {
        try {
          out[i].trajectory = solve(drugs[i], stim, cfg, u0, constants);
        } catch (const std::exception& e) {
          out[i].error = e.what();
        }
      },
      threads);
  return out;
}

/// Number of upward crossings of `level` in a sampled voltage trace.
inline int count_upstrokes(const std::vector<double>& v, double level = 0.0) {
  int n = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i - 1] < level && v[i] >= level) ++n;
  return n;
}

/// Finds, by bisection over |amplitude| in [0, max_amplitude], the weakest
/// depolarizing pulse for which the drug-free action potential crosses 0 mV
/// and peaks at or above target_peak. Onset and duration come from `base`.
inline StimulusSpec calibrate_stimulus(double target_peak, const StimulusSpec& base = {},
                                       const SolveConfig& cfg = {}, const ModelConstants& constants = {},
                                       double max_amplitude = 200.0, double rel_tol = 1e-4) {
  if (!(target_peak > 0.0)) throw DomainError("calibrate_stimulus: target peak must be > 0 mV");
  const StateVector u0 = resting_state(-85.0);
  auto elicits = [&](double magnitude) {
    StimulusSpec s = base;
    s.amplitude = -magnitude;
    const auto v = solve(drug_free(), s, cfg, u0, constants).column(var::V);
    const double peak = *std::max_element(v.begin(), v.end());
    return peak >= target_peak && count_upstrokes(v) >= 1;
  };
  double lo = 0.0, hi = max_amplitude;
  if (!elicits(hi))
    throw CalibrationError("no stimulus amplitude up to " + std::to_string(max_amplitude) +
                           " elicits an action potential peaking above target");
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    (elicits(mid) ? hi : lo) = mid;
  }
  StimulusSpec out = base;
  out.amplitude = -hi;
  return out;
}

}  // namespace hsbinn
