// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Three-part PINN objective for the cell model: data misfit, initial
// condition misfit and per-ODE weighted residuals at collocation times.
// The network sees scaled time tau = t / t_max; residuals are formed in
// physical units, d u / d t = (1 / t_max) d u / d tau.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hsbinn/cap_model.hpp"
#include "hsbinn/dual.hpp"
#include "hsbinn/mlp.hpp"

namespace hsbinn {

inline constexpr double kMinOdeWeight = 0.01;
inline constexpr double kMaxOdeWeight = 10'000.0;

/// Voltage leaves the network as 100 * z (mV); gates through a sigmoid.
inline constexpr double kVoltageScale = 100.0;
/// Slope spread of the first layer under init_time_resolved, in 1/tau.
inline constexpr double kFirstLayerStd = 300.0;

/// Main surrogate: scaled time -> 14 states, tanh hidden layers.
inline MlpArch sbinn_arch(std::vector<int> hidden = {50, 50, 50, 50, 50}) {
  MlpArch a = make_arch(1, std::move(hidden), kNumStates, Activation::sigmoid);
  a.output_activations[var::V] = Activation::linear;
  a.output_scale.assign(kNumStates, 1.0);
  a.output_scale[var::V] = kVoltageScale;
  a.output_shift.assign(kNumStates, 0.0);
  return a;
}

struct LossWeights {
  double data = 1.0;
  double ic = 1.0;
  std::array<double, kNumStates> ode;

  LossWeights() { ode.fill(1.0); }

  LossWeights scaled(double alpha) const {
    LossWeights w = *this;
    w.data *= alpha;
    w.ic *= alpha;
    for (auto& x : w.ode) x *= alpha;
    return w;
  }
};

struct Observation {
  double t = 0.0;           ///< ms
  std::size_t config = 0;   ///< index into the drug list
  StateVector y{};
};
using ObservationSet = std::vector<Observation>;

/// Collocation times in scaled units, tau in [0, 1].
struct CollocationBatch {
  std::vector<double> tau;
  std::size_t size() const { return tau.size(); }
};

inline double scale_time(double t, double t_max) {
  if (!(t_max > 0.0)) throw DomainError("scale_time: t_max must be > 0");
  return t / t_max;
}
inline double unscale_time(double tau, double t_max) { return tau * t_max; }

inline CollocationBatch sample_collocation(std::size_t n, std::mt19937_64& rng) {
  if (n == 0) throw DomainError("sample_collocation: batch size must be > 0");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CollocationBatch b;
  b.tau.resize(n);
  for (auto& x : b.tau) x = u(rng);
  return b;
}

/// Loss terms of one evaluation. `data`, `ic` and `ode_raw` are unweighted;
/// `total` = lambda_data * data + lambda_ic * ic + sum(ode_weighted).
struct LossReport {
  double data = 0.0;
  double ic = 0.0;
  std::array<double, kNumStates> ode_raw{};
  std::array<double, kNumStates> ode_weighted{};
  double ode_total = 0.0;
  double lambda_data = 1.0;
  double lambda_ic = 1.0;
  double total = 0.0;

  /// Sum of per-config reports (the hyperPINN objective is a plain sum).
  LossReport& operator+=(const LossReport& o) {
    data += o.data;
    ic += o.ic;
    for (int k = 0; k < kNumStates; ++k) {
      ode_raw[k] += o.ode_raw[k];
      ode_weighted[k] += o.ode_weighted[k];
    }
    ode_total += o.ode_total;
    total += o.total;
    lambda_data = o.lambda_data;
    lambda_ic = o.lambda_ic;
    return *this;
  }
};

struct OdeLoss {
  double total = 0.0;
  std::array<double, kNumStates> raw{};
  std::array<double, kNumStates> weighted{};
};

/// Loss of a scalar-input network approximating one drug configuration.
class PinnLoss {
 public:
  PinnLoss(const Mlp& net, CapModel model, const StateVector& u0, double t_max)
      : net_(&net), model_(std::move(model)), u0_(u0), t_max_(t_max) {
    if (net.input_width() != 1 || net.output_width() != kNumStates)
      throw DomainError("PinnLoss: network must map 1 input to 14 outputs");
    if (!(t_max > 0.0)) throw DomainError("PinnLoss: t_max must be > 0");
  }

  const CapModel& model() const { return model_; }
  double t_max() const { return t_max_; }

  /// (1/n) sum ||u_hat(t_i) - y_i||^2 ; 0 for an empty set.
  double data_loss(const VectorXd& p, std::span<const Observation> obs, VectorXd* grad = nullptr,
                   double weight = 1.0) const {
    if (obs.empty()) return 0.0;
    MatrixXd x(1, obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) x(0, i) = scale_time(obs[i].t, t_max_);
    const auto tape = net_->forward_tape(p, x, false);
    const MatrixXd& y = tape.output();
    MatrixXd diff(kNumStates, obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
      for (int k = 0; k < kNumStates; ++k) diff(k, i) = y(k, i) - obs[i].y[k];
    const double n = static_cast<double>(obs.size());
    const double loss = diff.squaredNorm() / n;
    if (grad) {
      const MatrixXd g = (2.0 * weight / n) * diff;
      net_->backward(p, tape, g, nullptr, *grad);
    }
    return loss;
  }

  /// ||u_hat(0) - u0||^2
  double ic_loss(const VectorXd& p, VectorXd* grad = nullptr, double weight = 1.0) const {
    const MatrixXd x = MatrixXd::Zero(1, 1);
    const auto tape = net_->forward_tape(p, x, false);
    VectorXd diff(kNumStates);
    for (int k = 0; k < kNumStates; ++k) diff[k] = tape.output()(k, 0) - u0_[k];
    if (grad) {
      const MatrixXd g = (2.0 * weight) * diff;
      net_->backward(p, tape, g, nullptr, *grad);
    }
    return diff.squaredNorm();
  }

  /// Per-ODE mean squared residual (1/t_max) du_k/dtau - f_k(u) over the
  /// batch, each multiplied by its weight.
  OdeLoss ode_loss(const VectorXd& p, const CollocationBatch& batch, const std::array<double, kNumStates>& lambda,
                   VectorXd* grad = nullptr) const {
    if (batch.tau.empty()) throw DomainError("ode_loss: empty collocation batch");
    const auto m = static_cast<Eigen::Index>(batch.size());
    MatrixXd x(1, m);
    for (Eigen::Index j = 0; j < m; ++j) x(0, j) = batch.tau[j];
    const auto tape = net_->forward_tape(p, x, true);
    const MatrixXd& y = tape.output();
    const MatrixXd& dy = tape.output_tangent();
    const double inv_t = 1.0 / t_max_;
    const double inv_m = 1.0 / static_cast<double>(m);

    OdeLoss out;
    MatrixXd g_y, g_dy;
    if (grad) {
      g_y = MatrixXd::Zero(kNumStates, m);
      g_dy.resize(kNumStates, m);
    }
    using D = Dual<kNumStates>;
    State<D> u;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double t = unscale_time(batch.tau[j], t_max_);
      for (int k = 0; k < kNumStates; ++k) u[k] = D(y(k, j), k);
      const State<D> f = model_.rhs(t, u);
      for (int k = 0; k < kNumStates; ++k) {
        const double r = inv_t * dy(k, j) - f[k].v;
        out.raw[k] += r * r;
        if (grad) {
          const double c = 2.0 * lambda[k] * r * inv_m;
          g_dy(k, j) = c * inv_t;
          for (int i = 0; i < kNumStates; ++i) g_y(i, j) -= c * f[k].d[i];
        }
      }
    }
    for (int k = 0; k < kNumStates; ++k) {
      out.raw[k] *= inv_m;
      out.weighted[k] = lambda[k] * out.raw[k];
      out.total += out.weighted[k];
    }
    if (grad) net_->backward(p, tape, g_y, &g_dy, *grad);
    return out;
  }

  /// Full objective; adds its gradient into `grad` when non-null.
  LossReport evaluate(const VectorXd& p, std::span<const Observation> obs, const CollocationBatch& batch,
                      const LossWeights& w, VectorXd* grad = nullptr) const {
    LossReport r;
    r.lambda_data = w.data;
    r.lambda_ic = w.ic;
    r.data = data_loss(p, obs, grad, w.data);
    r.ic = ic_loss(p, grad, w.ic);
    const OdeLoss ode = ode_loss(p, batch, w.ode, grad);
    r.ode_raw = ode.raw;
    r.ode_weighted = ode.weighted;
    r.ode_total = ode.total;
    r.total = w.data * r.data + w.ic * r.ic + r.ode_total;
    return r;
  }

 private:
  const Mlp* net_;
  CapModel model_;
  StateVector u0_;
  double t_max_;
};

inline double data_loss(const PinnLoss& L, const VectorXd& p, std::span<const Observation> obs) {
  return L.data_loss(p, obs);
}
inline double ic_loss(const PinnLoss& L, const VectorXd& p) { return L.ic_loss(p); }
inline OdeLoss ode_loss(const PinnLoss& L, const VectorXd& p, const CollocationBatch& batch, const LossWeights& w) {
  return L.ode_loss(p, batch, w.ode);
}
inline LossReport pinn_loss(const PinnLoss& L, const VectorXd& p, std::span<const Observation> obs,
                            const CollocationBatch& batch, const LossWeights& w, VectorXd* grad = nullptr) {
  return L.evaluate(p, obs, batch, w, grad);
}

struct BalanceResult {
  LossWeights weights;
  std::array<double, kNumStates> raw{};
  double target = 0.0;
  std::vector<std::string> warnings;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// lambda_k = clamp(median(raw) / raw_k, 0.01, 10000). A zero raw term gets
/// the upper clamp and a warning.
inline std::vector<double> balance_from_raw(std::span<const double> raw, std::vector<std::string>* warnings = nullptr) {
  const double target = median(std::vector<double>(raw.begin(), raw.end()));
  std::vector<double> w(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (raw[k] == 0.0) {
      w[k] = kMaxOdeWeight;
      const std::string msg = "balance_ode_weights: raw ODE term " + std::to_string(k) + " is exactly 0";
      if (warnings) warnings->push_back(msg);
      std::cerr << "warning: " << msg << "\n";
      continue;
    }
    w[k] = std::clamp(target / raw[k], kMinOdeWeight, kMaxOdeWeight);
  }
  return w;
}

/// One unit-weight residual evaluation per sampled drug (averaged), then
/// weights that bring every ODE term to the median raw term.
inline BalanceResult balance_ode_weights(const std::vector<std::array<double, kNumStates>>& raw_per_config) {
  if (raw_per_config.empty()) throw DomainError("balance_ode_weights: no configurations");
  BalanceResult res;
  for (const auto& r : raw_per_config)
    for (int k = 0; k < kNumStates; ++k) res.raw[k] += r[k] / static_cast<double>(raw_per_config.size());
  const auto w = balance_from_raw(res.raw, &res.warnings);
  std::copy(w.begin(), w.end(), res.weights.ode.begin());
  res.target = median(std::vector<double>(res.raw.begin(), res.raw.end()));
  return res;
}

inline BalanceResult balance_ode_weights(const PinnLoss& L, const VectorXd& params_at_init, const CollocationBatch& batch) {
  std::array<double, kNumStates> ones;
  ones.fill(1.0);
  return balance_ode_weights({L.ode_loss(params_at_init, batch, ones).raw});
}

}  // namespace hsbinn
