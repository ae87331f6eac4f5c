// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Hypernetwork: drug configuration -> flat parameter vector of the main
// surrogate. A tanh trunk produces a feature vector h; a linear head maps it
// to theta = base + gain .* (W h + b). `base` starts at a regular main-net
// initialization and `gain` at 0.1, so generated networks start out
// well-conditioned and drug dependence is learned as a perturbation.

#pragma once

#include <array>
#include <cmath>
#include <iostream>
#include <span>
#include <vector>

#include "hsbinn/cap_model.hpp"
#include "hsbinn/mlp.hpp"
#include "hsbinn/parallel.hpp"
#include "hsbinn/pinn_loss.hpp"

namespace hsbinn {

inline constexpr double kDefaultHeadGain = 0.1;

struct HyperArch {
  int input = 5;
  std::vector<int> hidden = {46, 46, 46, 46, 46};
  int output = 0;  ///< main-net parameter count
  double gain_init = kDefaultHeadGain;

  void validate() const {
    if (input < 1 || output < 1 || hidden.empty()) throw DomainError("HyperArch: needs input, hidden and output widths");
    for (int w : hidden)
      if (w < 1) throw DomainError("HyperArch: widths must be >= 1");
  }
  friend bool operator==(const HyperArch&, const HyperArch&) = default;
};

inline HyperArch hyper_arch_for(const MlpArch& main, std::vector<int> hidden = {46, 46, 46, 46, 46}) {
  HyperArch h;
  h.hidden = std::move(hidden);
  h.output = static_cast<int>(param_count(main));
  return h;
}

/// Maps a DrugConfig to [-1, 1]^5: c linearly, IC50s on a log10 scale.
struct DrugScaler {
  double c_lo = 0.0, c_hi = 4.0;
  double ic50_lo = 0.1, ic50_hi = 100.0;

  void validate() const {
    if (!(c_hi > c_lo) || !(ic50_lo > 0.0) || !(ic50_hi > ic50_lo)) throw DomainError("DrugScaler: bad bounds");
  }

  bool in_range(const DrugConfig& d) const {
    const auto a = d.to_array();
    if (a[0] < c_lo || a[0] > c_hi) return false;
    for (int i = 1; i < 5; ++i)
      if (a[i] < ic50_lo || a[i] > ic50_hi) return false;
    return true;
  }

  VectorXd transform(const DrugConfig& d) const {
    d.validate();
    const auto a = d.to_array();
    VectorXd x(5);
    x[0] = 2.0 * (a[0] - c_lo) / (c_hi - c_lo) - 1.0;
    const double l0 = std::log10(ic50_lo), l1 = std::log10(ic50_hi);
    for (int i = 1; i < 5; ++i) x[i] = 2.0 * (std::log10(a[i]) - l0) / (l1 - l0) - 1.0;
    return x;
  }

  DrugConfig inverse(const VectorXd& x) const {
    if (x.size() != 5) throw DomainError("DrugScaler::inverse: expected 5 values");
    std::array<double, 5> a{};
    a[0] = c_lo + 0.5 * (x[0] + 1.0) * (c_hi - c_lo);
    const double l0 = std::log10(ic50_lo), l1 = std::log10(ic50_hi);
    for (int i = 1; i < 5; ++i) a[i] = std::pow(10.0, l0 + 0.5 * (x[i] + 1.0) * (l1 - l0));
    return DrugConfig::from_array(a);
  }

  friend bool operator==(const DrugScaler&, const DrugScaler&) = default;
};

class HyperNet {
 public:
  struct Tape {
    ForwardTape trunk;
    VectorXd z;  ///< W h + b, before gain and base
  };

  HyperNet(HyperArch arch, MlpArch main_arch, DrugScaler scaler = {})
      : arch_(std::move(arch)), main_(std::move(main_arch)), scaler_(scaler) {
    arch_.validate();
    scaler_.validate();
    if (arch_.output != static_cast<int>(main_.param_count()))
      throw DomainError("HyperArch output width does not match main-net parameter count");
    std::vector<int> trunk_hidden(arch_.hidden.begin(), arch_.hidden.end() - 1);
    trunk_ = Mlp(make_arch(arch_.input, trunk_hidden, arch_.hidden.back(), Activation::tanh));
    const std::size_t p = arch_.output, f = arch_.hidden.back();
    off_w_ = trunk_.param_count();
    off_b_ = off_w_ + p * f;
    off_gain_ = off_b_ + p;
    off_base_ = off_gain_ + p;
    count_ = off_base_ + p;
  }

  const HyperArch& arch() const { return arch_; }
  const Mlp& main_net() const { return main_; }
  const Mlp& trunk() const { return trunk_; }
  const DrugScaler& scaler() const { return scaler_; }
  std::size_t param_count() const { return count_; }
  std::size_t main_param_count() const { return main_.param_count(); }

  /// Trunk and head weights Glorot, head bias 0, gain = gain_init,
  /// base = `main_init`.
  VectorXd init(std::mt19937_64& rng, const VectorXd& main_init) const {
    main_.check_params(main_init);
    VectorXd hp = VectorXd::Zero(count_);
    hp.head(off_w_) = trunk_.init_glorot(rng);
    const int p = arch_.output, f = arch_.hidden.back();
    const double limit = std::sqrt(6.0 / (p + f));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = off_w_; i < off_b_; ++i) hp[i] = dist(rng);
    hp.segment(off_gain_, p).setConstant(arch_.gain_init);
    hp.segment(off_base_, p) = main_init;
    return hp;
  }

  Tape forward_tape(const VectorXd& hp, const DrugConfig& drug) const {
    check_params(hp);
    warn_if_out_of_range(drug);
    const MatrixXd x = scaler_.transform(drug);
    Tape t;
    t.trunk = trunk_.forward_tape(hp.head(off_w_), x, false);
    t.z = head_w(hp) * t.trunk.output().col(0) + head_b(hp);
    return t;
  }

  VectorXd theta_from(const VectorXd& hp, const Tape& t) const {
    const auto p = arch_.output;
    return hp.segment(off_base_, p).array() + hp.segment(off_gain_, p).array() * t.z.array();
  }

  /// Main-net parameters for one drug.
  VectorXd forward(const VectorXd& hp, const DrugConfig& drug) const { return theta_from(hp, forward_tape(hp, drug)); }

  /// Adds dL/dhp into `grad` given dL/dtheta.
  void backward(const VectorXd& hp, const Tape& t, const VectorXd& g_theta, VectorXd& grad) const {
    check_params(hp);
    if (g_theta.size() != arch_.output) throw DomainError("HyperNet::backward: gradient length mismatch");
    if (grad.size() != static_cast<Eigen::Index>(count_)) grad = VectorXd::Zero(count_);
    const auto p = arch_.output;
    const int f = arch_.hidden.back();
    grad.segment(off_base_, p) += g_theta;
    grad.segment(off_gain_, p) += (g_theta.array() * t.z.array()).matrix();
    const VectorXd gz = (g_theta.array() * hp.segment(off_gain_, p).array()).matrix();
    Eigen::Map<MatrixXd>(grad.data() + off_w_, p, f).noalias() += gz * t.trunk.output().col(0).transpose();
    grad.segment(off_b_, p) += gz;
    const MatrixXd gh = head_w(hp).transpose() * gz;
    VectorXd gtrunk = VectorXd::Zero(off_w_);
    trunk_.backward(hp.head(off_w_), t.trunk, gh, nullptr, gtrunk);
    grad.head(off_w_) += gtrunk;
  }

  /// States at physical times `t_ms` (one column per time).
  MatrixXd predict(const VectorXd& hp, const DrugConfig& drug, std::span<const double> t_ms, double t_max) const {
    return predict_with(forward(hp, drug), t_ms, t_max);
  }

  MatrixXd predict_with(const VectorXd& theta, std::span<const double> t_ms, double t_max) const {
    MatrixXd x(1, t_ms.size());
    for (std::size_t i = 0; i < t_ms.size(); ++i) {
      if (t_ms[i] < 0.0 || t_ms[i] > t_max) throw DomainError("predict: time outside [0, t_max]");
      x(0, i) = scale_time(t_ms[i], t_max);
    }
    return main_.forward(theta, x);
  }

  void check_params(const VectorXd& hp) const {
    if (hp.size() != static_cast<Eigen::Index>(count_))
      throw DomainError("hypernet parameter vector length " + std::to_string(hp.size()) + " does not match (" +
                        std::to_string(count_) + ")");
  }

 private:
  Eigen::Map<const MatrixXd> head_w(const VectorXd& hp) const {
    return {hp.data() + off_w_, arch_.output, arch_.hidden.back()};
  }
  Eigen::VectorBlock<const VectorXd> head_b(const VectorXd& hp) const { return hp.segment(off_b_, arch_.output); }

  void warn_if_out_of_range(const DrugConfig& d) const {
    if (!scaler_.in_range(d)) std::cerr << "warning: drug configuration outside the scaler bounds\n";
  }

  HyperArch arch_;
  Mlp main_;
  DrugScaler scaler_;
  Mlp trunk_;
  std::size_t off_w_ = 0, off_b_ = 0, off_gain_ = 0, off_base_ = 0, count_ = 0;
};

/// Everything the loss needs for one training configuration.
struct ConfigTerm {
  DrugConfig drug;
  const PinnLoss* loss = nullptr;
  std::span<const Observation> obs;
  const CollocationBatch* batch = nullptr;
};

struct HyperLossResult {
  LossReport total;
  std::vector<LossReport> per_config;
};

/// Sum over configurations of the PINN loss of the generated networks. The
/// per-config work runs in parallel; gradients are reduced in list order, so
/// the result does not depend on the thread count.
inline HyperLossResult hyperpinn_loss(const HyperNet& net, const VectorXd& hp, std::span<const ConfigTerm> terms,
                                      const LossWeights& w, VectorXd* grad = nullptr, int threads = thread_count()) {
  if (terms.empty()) throw DomainError("hyperpinn_loss: need at least one configuration");
  const std::size_t q = terms.size();
  HyperLossResult res;
  res.per_config.resize(q);
  std::vector<HyperNet::Tape> tapes(q);
  std::vector<VectorXd> g_theta(q);
  parallel_for(
      q,
      [&](std::size_t i) {
        const ConfigTerm& c = terms[i];
        if (!c.loss || !c.batch) throw DomainError("hyperpinn_loss: incomplete configuration term");
        tapes[i] = net.forward_tape(hp, c.drug);
        const VectorXd theta = net.theta_from(hp, tapes[i]);
        if (grad) g_theta[i] = VectorXd::Zero(theta.size());
        res.per_config[i] = c.loss->evaluate(theta, c.obs, *c.batch, w, grad ? &g_theta[i] : nullptr);
      },
      threads);
  for (std::size_t i = 0; i < q; ++i) {
    res.total += res.per_config[i];
    if (grad) net.backward(hp, tapes[i], g_theta[i], *grad);
  }
  return res;
}

}  // namespace hsbinn
