// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Small dense networks over a flat parameter vector, with batched evaluation,
// forward tangents with respect to the input, and reverse-mode gradients that
// also flow through those tangents (needed for ODE residual losses).

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "hsbinn/error.hpp"

namespace hsbinn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Activation { tanh, sigmoid, linear };

struct MlpArch {
  int input = 1;
  std::vector<int> hidden;
  int output = 1;
  Activation hidden_activation = Activation::tanh;
  /// One tag per output: sigmoid for bounded-unit outputs, linear for
  /// unbounded ones, tanh where a squashed output is wanted.
  std::vector<Activation> output_activations;
  /// Fixed affine map applied after a linear output: y = shift + scale * z.
  /// Empty means identity. Ignored for non-linear outputs.
  std::vector<double> output_scale;
  std::vector<double> output_shift;

  void validate() const {
    if (input < 1 || output < 1) throw DomainError("MlpArch: widths must be >= 1");
    for (int w : hidden)
      if (w < 1) throw DomainError("MlpArch: widths must be >= 1");
    if (static_cast<int>(output_activations.size()) != output)
      throw DomainError("MlpArch: one output activation per output required");
    if (!output_scale.empty() && static_cast<int>(output_scale.size()) != output)
      throw DomainError("MlpArch: output_scale length must equal output width");
    if (!output_shift.empty() && static_cast<int>(output_shift.size()) != output)
      throw DomainError("MlpArch: output_shift length must equal output width");
  }

  std::vector<int> widths() const {
    std::vector<int> w{input};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(output);
    return w;
  }

  friend bool operator==(const MlpArch&, const MlpArch&) = default;
};

inline std::size_t param_count(const MlpArch& arch) {
  const auto w = arch.widths();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l)
    n += static_cast<std::size_t>(w[l]) * w[l + 1] + w[l + 1];
  return n;
}

/// Uniform-activation convenience constructor.
inline MlpArch make_arch(int input, std::vector<int> hidden, int output, Activation out = Activation::linear) {
  MlpArch a;
  a.input = input;
  a.hidden = std::move(hidden);
  a.output = output;
  a.output_activations.assign(output, out);
  return a;
}

/// Flat parameters plus the architecture that gives them meaning.
struct NetParams {
  MlpArch arch;
  VectorXd values;
};

/// Intermediate values of a batched forward pass, kept for the backward pass.
/// Columns are samples.
struct ForwardTape {
  std::vector<MatrixXd> act;       ///< act[0] = input, act[l + 1] = output of layer l
  std::vector<MatrixXd> pre;       ///< pre[l] = pre-activation of layer l
  std::vector<MatrixXd> tangent;   ///< d act / d x0 (x0 = first input row)
  std::vector<MatrixXd> dpre;      ///< d pre / d x0
  bool with_tangent = false;

  const MatrixXd& output() const { return act.back(); }
  const MatrixXd& output_tangent() const { return tangent.back(); }
};

class Mlp {
 public:
  struct LayerView {
    Eigen::Map<const MatrixXd> w;
    Eigen::Map<const VectorXd> b;
  };
  struct LayerRef {
    Eigen::Map<MatrixXd> w;
    Eigen::Map<VectorXd> b;
  };

  Mlp() : Mlp(make_arch(1, {}, 1)) {}
  explicit Mlp(MlpArch arch) : arch_(std::move(arch)) {
    arch_.validate();
    widths_ = arch_.widths();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      offsets_.push_back(off);
      off += static_cast<std::size_t>(widths_[l]) * widths_[l + 1] + widths_[l + 1];
    }
    count_ = off;
    scale_ = VectorXd::Ones(arch_.output);
    shift_ = VectorXd::Zero(arch_.output);
    for (int k = 0; k < arch_.output; ++k) {
      if (arch_.output_activations[k] != Activation::linear) continue;
      if (!arch_.output_scale.empty()) scale_[k] = arch_.output_scale[k];
      if (!arch_.output_shift.empty()) shift_[k] = arch_.output_shift[k];
    }
  }

  const MlpArch& arch() const { return arch_; }
  std::size_t param_count() const { return count_; }
  int layers() const { return static_cast<int>(offsets_.size()); }
  int input_width() const { return arch_.input; }
  int output_width() const { return arch_.output; }

  LayerView layer(const double* p, int l) const {
    const int in = widths_[l], out = widths_[l + 1];
    const double* base = p + offsets_[l];
    return {Eigen::Map<const MatrixXd>(base, out, in), Eigen::Map<const VectorXd>(base + out * in, out)};
  }
  LayerRef layer(double* p, int l) const {
    const int in = widths_[l], out = widths_[l + 1];
    double* base = p + offsets_[l];
    return {Eigen::Map<MatrixXd>(base, out, in), Eigen::Map<VectorXd>(base + out * in, out)};
  }

  /// Glorot-uniform weights, zero biases.
  VectorXd init_glorot(std::mt19937_64& rng) const {
    VectorXd p = VectorXd::Zero(count_);
    for (int l = 0; l < layers(); ++l) {
      const double limit = std::sqrt(6.0 / (widths_[l] + widths_[l + 1]));
      std::uniform_real_distribution<double> dist(-limit, limit);
      auto view = layer(p.data(), l);
      for (Eigen::Index i = 0; i < view.w.size(); ++i) view.w.data()[i] = dist(rng);
    }
    return p;
  }

  /// Glorot init, except that each first-layer unit becomes a step at a
  /// random switch time s = c^2 in [0, 1] (denser near 0). Slopes are
  /// N(0, sd) with sd = min(first_std, n / (2c)), the inverse of the local
  /// switch-time spacing, so late units overlap instead of saturating into
  /// flat stretches. For scalar-time inputs on [0, 1].
  VectorXd init_time_resolved(std::mt19937_64& rng, double first_std) const {
    if (arch_.input != 1) throw DomainError("init_time_resolved: scalar-input architecture required");
    if (!(first_std > 0.0)) throw DomainError("init_time_resolved: first_std must be > 0");
    VectorXd p = init_glorot(rng);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto v = layer(p.data(), 0);
    const double n = static_cast<double>(v.w.rows());
    for (Eigen::Index i = 0; i < v.w.rows(); ++i) {
      const double g = z(rng);
      const double c = u(rng);
      const double w = g * std::min(first_std, n / (2.0 * c));
      v.w(i, 0) = w;
      v.b[i] = -w * c * c;
    }
    return p;
  }

  std::vector<std::pair<MatrixXd, VectorXd>> unflatten(const VectorXd& p) const {
    check_params(p);
    std::vector<std::pair<MatrixXd, VectorXd>> out;
    for (int l = 0; l < layers(); ++l) {
      auto v = layer(p.data(), l);
      out.emplace_back(v.w, v.b);
    }
    return out;
  }

  VectorXd flatten(const std::vector<std::pair<MatrixXd, VectorXd>>& layers_in) const {
    if (static_cast<int>(layers_in.size()) != layers()) throw DomainError("flatten: layer count mismatch");
    VectorXd p(count_);
    for (int l = 0; l < layers(); ++l) {
      auto v = layer(p.data(), l);
      if (layers_in[l].first.rows() != v.w.rows() || layers_in[l].first.cols() != v.w.cols() ||
          layers_in[l].second.size() != v.b.size())
        throw DomainError("flatten: layer shape mismatch");
      v.w = layers_in[l].first;
      v.b = layers_in[l].second;
    }
    return p;
  }

  /// Batched forward pass; `x` is input width x batch. With `with_tangent`
  /// the derivative of every activation with respect to the first input row
  /// is propagated alongside.
  ForwardTape forward_tape(const VectorXd& p, const MatrixXd& x, bool with_tangent) const {
    check_params(p);
    if (x.rows() != arch_.input) throw DomainError("forward: input width does not match architecture");
    ForwardTape tape;
    tape.with_tangent = with_tangent;
    tape.act.reserve(layers() + 1);
    tape.pre.reserve(layers());
    tape.act.push_back(x);
    if (with_tangent) {
      MatrixXd dx = MatrixXd::Zero(x.rows(), x.cols());
      dx.row(0).setOnes();
      tape.tangent.push_back(std::move(dx));
    }
    for (int l = 0; l < layers(); ++l) {
      const auto v = layer(p.data(), l);
      MatrixXd z = v.w * tape.act[l];
      z.colwise() += v.b;
      tape.act.push_back(activate(l, z));
      if (with_tangent) {
        MatrixXd dz = v.w * tape.tangent[l];
        MatrixXd d1, d2;
        derivatives(l, tape.act.back(), d1, d2, false);
        tape.tangent.push_back((d1.array() * dz.array()).matrix());
        tape.dpre.push_back(std::move(dz));
      }
      tape.pre.push_back(std::move(z));
    }
    return tape;
  }

  MatrixXd forward(const VectorXd& p, const MatrixXd& x) const { return forward_tape(p, x, false).act.back(); }

  VectorXd forward(const VectorXd& p, const VectorXd& x) const {
    const MatrixXd xm = x;
    return forward(p, xm).col(0);
  }

  /// d outputs / d input for a scalar-input network at one input value.
  VectorXd input_derivative(const VectorXd& p, double t) const {
    if (arch_.input != 1) throw DomainError("input_derivative: scalar-input architecture required");
    MatrixXd x(1, 1);
    x(0, 0) = t;
    return forward_tape(p, x, true).tangent.back().col(0);
  }

  /// Reverse pass. `g_out` = dL/d outputs; `g_tangent` = dL/d output tangents
  /// (null when the loss does not involve them). Adds dL/dp into `grad` and
  /// returns dL/d input.
  MatrixXd backward(const VectorXd& p, const ForwardTape& tape, const MatrixXd& g_out, const MatrixXd* g_tangent,
                    VectorXd& grad) const {
    if (grad.size() != static_cast<Eigen::Index>(count_)) grad = VectorXd::Zero(count_);
    const bool tan = g_tangent != nullptr;
    if (tan && !tape.with_tangent) throw DomainError("backward: tangent gradient needs a tangent tape");
    MatrixXd ga = g_out;
    MatrixXd gda;
    if (tan) gda = *g_tangent;
    MatrixXd d1, d2, gz, gdz;
    for (int l = layers() - 1; l >= 0; --l) {
      derivatives(l, tape.act[l + 1], d1, d2, tan);
      gz = (ga.array() * d1.array()).matrix();
      if (tan) {
        gz.array() += gda.array() * d2.array() * tape.dpre[l].array();
        gdz = (gda.array() * d1.array()).matrix();
      }
      auto gv = layer(grad.data(), l);
      gv.w.noalias() += gz * tape.act[l].transpose();
      if (tan) gv.w.noalias() += gdz * tape.tangent[l].transpose();
      gv.b += gz.rowwise().sum();
      const auto v = layer(p.data(), l);
      ga.noalias() = v.w.transpose() * gz;
      if (tan) gda.noalias() = v.w.transpose() * gdz;
    }
    return ga;
  }

  /// Gradient of a scalar loss of the outputs at a single input.
  /// `loss` returns (value, dL/d output).
  VectorXd grad_params(const VectorXd& p, const VectorXd& x,
                       const std::function<std::pair<double, VectorXd>(const VectorXd&)>& loss) const {
    const MatrixXd xm = x;
    const auto tape = forward_tape(p, xm, false);
    const MatrixXd g = loss(tape.output().col(0)).second;
    VectorXd grad = VectorXd::Zero(count_);
    backward(p, tape, g, nullptr, grad);
    return grad;
  }

  void check_params(const VectorXd& p) const {
    if (p.size() != static_cast<Eigen::Index>(count_))
      throw DomainError("parameter vector length " + std::to_string(p.size()) + " does not match architecture (" +
                        std::to_string(count_) + ")");
  }

 private:
  Activation row_activation(int l, Eigen::Index r) const {
    return l + 1 == layers() ? arch_.output_activations[r] : arch_.hidden_activation;
  }

  MatrixXd activate(int l, const MatrixXd& z) const {
    const bool last = l + 1 == layers();
    if (!last) return apply(arch_.hidden_activation, z.array(), 1.0, 0.0).matrix();
    MatrixXd a(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r)
      a.row(r) = apply(arch_.output_activations[r], z.row(r).array(), scale_[r], shift_[r]).matrix();
    return a;
  }

  template <class Arr>
  static Eigen::ArrayXXd apply(Activation act, const Arr& z, double s, double sh) {
    switch (act) {
      case Activation::tanh:
        return z.tanh();
      case Activation::sigmoid:
        return 1.0 / (1.0 + (-z).exp());
      case Activation::linear:
        return s * z + sh;
    }
    return z;
  }

  // First and second derivative of the activation of layer l, written in
  // terms of its output a.
  void derivatives(int l, const MatrixXd& a, MatrixXd& d1, MatrixXd& d2, bool second) const {
    d1.resize(a.rows(), a.cols());
    if (second) d2.resize(a.rows(), a.cols());
    const bool last = l + 1 == layers();
    auto fill = [&](Activation act, double s, auto&& arows, auto&& d1rows, auto&& d2rows) {
      switch (act) {
        case Activation::tanh:
          d1rows = 1.0 - arows.square();
          if (second) d2rows = -2.0 * arows * (1.0 - arows.square());
          break;
        case Activation::sigmoid:
          d1rows = arows * (1.0 - arows);
          if (second) d2rows = arows * (1.0 - arows) * (1.0 - 2.0 * arows);
          break;
        case Activation::linear:
          d1rows.setConstant(s);
          if (second) d2rows.setZero();
          break;
      }
    };
    if (!last) {
      auto d2a = second ? d2.array() : d1.array();  // d2 untouched when !second
      fill(arch_.hidden_activation, 1.0, a.array(), d1.array(), d2a);
      return;
    }
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      auto d2r = second ? d2.row(r).array() : d1.row(r).array();
      fill(arch_.output_activations[r], scale_[r], a.row(r).array(), d1.row(r).array(), d2r);
    }
  }

  MlpArch arch_;
  std::vector<int> widths_;
  std::vector<std::size_t> offsets_;
  std::size_t count_ = 0;
  VectorXd scale_, shift_;
};

}  // namespace hsbinn
