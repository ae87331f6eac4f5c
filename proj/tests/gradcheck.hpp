// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Finite-difference checks of network gradients on random small nets.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "hsbinn/mlp.hpp"

namespace gradcheck {

using hsbinn::Activation;
using hsbinn::MatrixXd;
using hsbinn::Mlp;
using hsbinn::MlpArch;
using hsbinn::VectorXd;

struct Worst {
  double params = 0.0;  ///< componentwise relative error of dL/dp
  double time = 0.0;    ///< relative error of d outputs / d t
};

/// Scalar-input net with 1-3 hidden tanh layers of width 2-8 and 1-4 outputs
/// with mixed activations.
inline MlpArch random_arch(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> depth(1, 3), width(2, 8), outs(1, 4), act(0, 2);
  MlpArch a;
  a.input = 1;
  const int d = depth(rng);
  for (int i = 0; i < d; ++i) a.hidden.push_back(width(rng));
  a.output = outs(rng);
  for (int k = 0; k < a.output; ++k) a.output_activations.push_back(static_cast<Activation>(act(rng)));
  a.output_scale.assign(a.output, 1.0);
  a.output_scale[0] = 3.0;
  a.output_shift.assign(a.output, 0.0);
  a.output_shift[0] = -1.0;
  return a;
}

/// L = sum_j sum_k (a_k y_k(t_j)^2 + b_k dy_k/dt(t_j)^2) over a few inputs.
struct MixedLoss {
  MatrixXd x;
  VectorXd a, b;

  double value(const Mlp& net, const VectorXd& p) const {
    const auto tape = net.forward_tape(p, x, true);
    double s = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index k = 0; k < a.size(); ++k)
        s += a[k] * tape.output()(k, j) * tape.output()(k, j) +
             b[k] * tape.output_tangent()(k, j) * tape.output_tangent()(k, j);
    return s;
  }

  VectorXd gradient(const Mlp& net, const VectorXd& p) const {
    const auto tape = net.forward_tape(p, x, true);
    MatrixXd gy = tape.output(), gdy = tape.output_tangent();
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      gy.row(k) *= 2.0 * a[k];
      gdy.row(k) *= 2.0 * b[k];
    }
    VectorXd g = VectorXd::Zero(net.param_count());
    net.backward(p, tape, gy, &gdy, g);
    return g;
  }
};

/// Runs `nets` random instances; returns the worst errors seen.
inline Worst run(int nets, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0), pos(0.5, 2.0);
  Worst w;
  for (int trial = 0; trial < nets; ++trial) {
    const Mlp net(random_arch(rng));
    VectorXd p(net.param_count());
    for (auto& v : p) v = n01(rng);

    MixedLoss L;
    L.x.resize(1, 3);
    for (Eigen::Index j = 0; j < 3; ++j) L.x(0, j) = u(rng);
    L.a.resize(net.output_width());
    L.b.resize(net.output_width());
    for (auto& v : L.a) v = pos(rng);
    for (auto& v : L.b) v = pos(rng);

    const VectorXd g = L.gradient(net, p);
    const double gscale = g.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(p[i]));
      VectorXd pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      const double fd = (L.value(net, pp) - L.value(net, pm)) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-3 * gscale, 1e-12});
      w.params = std::max(w.params, std::abs(fd - g[i]) / denom);
    }

    const double t = u(rng);
    const VectorXd dt = net.input_derivative(p, t);
    const double h = 1e-5;
    VectorXd xp(1), xm(1);
    xp[0] = t + h;
    xm[0] = t - h;
    const VectorXd fd = (net.forward(p, xp) - net.forward(p, xm)) / (2.0 * h);
    const double tscale = dt.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < dt.size(); ++k) {
      const double denom = std::max({std::abs(fd[k]), std::abs(dt[k]), 1e-3 * tscale, 1e-12});
      w.time = std::max(w.time, std::abs(fd[k] - dt[k]) / denom);
    }
  }
  return w;
}

}  // namespace gradcheck
