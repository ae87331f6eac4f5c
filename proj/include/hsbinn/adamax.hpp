// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "hsbinn/error.hpp"

namespace hsbinn {

/// Piecewise learning rate: constant, then linear decay, then constant.
struct LrSchedule {
  double plateau_lr = 1e-4;
  long plateau_end = 10'000;
  long decay_end = 50'000;
  double final_lr = 1e-6;

  void validate() const {
    if (!(plateau_lr > 0.0) || !(final_lr > 0.0)) throw DomainError("learning rates must be > 0");
    if (plateau_end < 0 || plateau_end >= decay_end) throw DomainError("lr schedule: need plateau_end < decay_end");
  }
};

inline double lr_at(long iter, const LrSchedule& s) {
  if (iter < 0) throw DomainError("lr_at: iteration must be >= 0");
  if (iter <= s.plateau_end) return s.plateau_lr;
  if (iter >= s.decay_end) return s.final_lr;
  const double f = static_cast<double>(iter - s.plateau_end) / static_cast<double>(s.decay_end - s.plateau_end);
  return s.plateau_lr + (s.final_lr - s.plateau_lr) * f;
}

struct AdamaxConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First moment m and infinity-norm moment u, plus the step counter used
/// for bias correction.
struct AdamaxState {
  Eigen::VectorXd m;
  Eigen::VectorXd u;
  long step = 0;

  static AdamaxState zeros(Eigen::Index n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0}; }
};

/// m <- b1 m + (1 - b1) g ; u <- max(b2 u, |g|) ;
/// p <- p - lr / (1 - b1^t) * m / (u + eps)
inline void adamax_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamaxState& st, double lr,
                        const AdamaxConfig& cfg = {}) {
  if (grads.size() != params.size() || st.m.size() != params.size() || st.u.size() != params.size())
    throw DomainError("adamax_step: shape mismatch");
  ++st.step;
  const double bias = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double step_size = lr / bias;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
    st.u[i] = std::max(cfg.beta2 * st.u[i], std::abs(g));
    params[i] -= step_size * st.m[i] / (st.u[i] + cfg.eps);
  }
}

}  // namespace hsbinn
