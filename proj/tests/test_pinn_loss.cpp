// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace hsbinn;

namespace {

StimulusSpec no_stimulus() { return {0.0, 1.0, 0.0}; }

VectorXd random_params(const Mlp& net, std::mt19937_64& rng, double sd = 0.5) {
  std::normal_distribution<double> n(0.0, sd);
  VectorXd p(net.param_count());
  for (auto& v : p) v = n(rng);
  return p;
}

/// Network whose output is the constant state u (all weights zero).
VectorXd constant_net(const Mlp& net, const StateVector& u) {
  VectorXd p = VectorXd::Zero(net.param_count());
  const int nb = kNumStates;
  auto bias = p.tail(nb);
  bias[var::V] = u[var::V] / kVoltageScale;
  for (int k = 1; k < kNumStates; ++k) bias[k] = std::log(u[k] / (1.0 - u[k]));
  return p;
}

std::vector<Observation> self_observations(const Mlp& net, const VectorXd& p, double t_max, int n) {
  std::vector<Observation> obs;
  for (int i = 0; i < n; ++i) {
    Observation o;
    o.t = t_max * (i + 0.5) / n;
    VectorXd x(1);
    x[0] = o.t / t_max;
    const VectorXd y = net.forward(p, x);
    for (int k = 0; k < kNumStates; ++k) o.y[k] = y[k];
    obs.push_back(o);
  }
  return obs;
}

}  // namespace

TEST(ScaleTime, Examples) {
  EXPECT_EQ(scale_time(500.0, 500.0), 1.0);
  EXPECT_EQ(scale_time(0.0, 500.0), 0.0);
  EXPECT_EQ(unscale_time(scale_time(123.0, 500.0), 500.0), 123.0);
  EXPECT_THROW(scale_time(1.0, 0.0), DomainError);
}

TEST(DataLoss, Examples) {
  std::mt19937_64 rng(41);
  const Mlp net(sbinn_arch({6}));
  const VectorXd p = random_params(net, rng);
  const PinnLoss L(net, CapModel(drug_free(), StimulusSpec{}), resting_state(-85.0), 500.0);

  auto obs = self_observations(net, p, 500.0, 7);
  EXPECT_NEAR(data_loss(L, p, obs), 0.0, 1e-28);
  EXPECT_EQ(data_loss(L, p, {}), 0.0);

  std::vector<Observation> one = {obs[2]};
  one[0].y[var::f_KR] += 0.3;
  EXPECT_NEAR(data_loss(L, p, one), 0.09, 1e-15);

  auto noisy = obs;
  for (auto& o : noisy) o.y[var::V] += 2.0;
  auto doubled = noisy;
  doubled.insert(doubled.end(), noisy.begin(), noisy.end());
  EXPECT_NEAR(data_loss(L, p, doubled), data_loss(L, p, noisy), 1e-12);
  EXPECT_NEAR(data_loss(L, p, noisy), 4.0, 1e-12);
}

TEST(IcLoss, Examples) {
  const Mlp net(sbinn_arch({5}));
  const StateVector u0 = resting_state(-80.0);
  const VectorXd p = constant_net(net, u0);
  const PinnLoss exact(net, CapModel(drug_free(), StimulusSpec{}), u0, 500.0);
  EXPECT_NEAR(ic_loss(exact, p), 0.0, 1e-24);

  StateVector shifted = u0;
  shifted[var::V] -= 1.0;
  const PinnLoss off(net, CapModel(drug_free(), StimulusSpec{}), shifted, 500.0);
  EXPECT_NEAR(ic_loss(off, p), 1.0, 1e-12);
}

TEST(OdeLoss, ConstantFixedPointHasZeroResidual) {
  const Mlp net(sbinn_arch({5, 5}));
  const StateVector rest = resting_state(equilibrium_voltage());
  const VectorXd p = constant_net(net, rest);
  const PinnLoss L(net, CapModel(drug_free(), no_stimulus()), rest, 500.0);
  std::mt19937_64 rng(42);
  const auto batch = sample_collocation(64, rng);
  const auto ode = ode_loss(L, p, batch, LossWeights{});
  for (int k = 0; k < kNumStates; ++k) EXPECT_LT(ode.raw[k], 1e-20) << kStateNames[k];
}

TEST(OdeLoss, ZeroWeightsGiveZero) {
  std::mt19937_64 rng(43);
  const Mlp net(sbinn_arch({6}));
  const VectorXd p = random_params(net, rng);
  const PinnLoss L(net, CapModel(DrugConfig{1, 2, 3, 4, 5}, StimulusSpec{}), resting_state(-85.0), 500.0);
  LossWeights w;
  w.ode.fill(0.0);
  const auto ode = ode_loss(L, p, sample_collocation(32, rng), w);
  EXPECT_EQ(ode.total, 0.0);
  for (double r : ode.raw) EXPECT_GT(r, 0.0);
}

TEST(OdeLoss, ResidualUsesChainRuleForScaledTime) {
  std::mt19937_64 rng(44);
  const Mlp net(sbinn_arch({6, 6}));
  const VectorXd p = random_params(net, rng);
  const double t_max = 500.0;
  const CapModel model(DrugConfig{2, 0.5, 10, 3, 1}, StimulusSpec{});
  const PinnLoss L(net, model, resting_state(-85.0), t_max);
  CollocationBatch batch;
  batch.tau = {0.0005, 0.1, 0.37, 0.9};
  const auto ode = ode_loss(L, p, batch, LossWeights{});
  std::array<double, kNumStates> want{};
  for (double tau : batch.tau) {
    VectorXd x(1);
    x[0] = tau;
    const VectorXd y = net.forward(p, x);
    const VectorXd dy = net.input_derivative(p, tau);
    StateVector u;
    for (int k = 0; k < kNumStates; ++k) u[k] = y[k];
    const auto f = model.rhs(tau * t_max, u);
    for (int k = 0; k < kNumStates; ++k) {
      const double r = dy[k] / t_max - f[k];
      want[k] += r * r / batch.size();
    }
  }
  for (int k = 0; k < kNumStates; ++k) EXPECT_NEAR(ode.raw[k], want[k], 1e-12 * std::max(1.0, want[k]));
}

TEST(OdeLoss, SolverTrajectoryIsNearlyResidualFree) {
  SolveConfig cfg;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;
  cfg.output_dt = 0.002;
  const CapModel model(DrugConfig{1.0, 5.0, 5.0, 5.0, 5.0}, StimulusSpec{});
  const auto tr = solve(model.drug(), model.stimulus_spec(), cfg);
  std::array<double, kNumStates> mean{}, scale{};
  std::size_t n = 0;
  for (std::size_t j = 1; j + 1 < tr.size(); j += 5) {
    if (tr.t[j] < 20.0) continue;
    const auto f = model.rhs(tr.t[j], tr.y[j]);
    for (int k = 0; k < kNumStates; ++k) {
      const double fd = (tr.y[j + 1][k] - tr.y[j - 1][k]) / (tr.t[j + 1] - tr.t[j - 1]);
      mean[k] += (fd - f[k]) * (fd - f[k]);
      scale[k] += f[k] * f[k];
    }
    ++n;
  }
  for (int k = 0; k < kNumStates; ++k) {
    EXPECT_LT(mean[k] / n, 1e-9) << kStateNames[k];
    EXPECT_LT(mean[k], 1e-6 * scale[k] + 1e-20) << kStateNames[k];
  }
}

TEST(PinnLoss, WeightsSelectTerms) {
  std::mt19937_64 rng(45);
  const Mlp net(sbinn_arch({6}));
  const VectorXd p = random_params(net, rng);
  const PinnLoss L(net, CapModel(drug_free(), StimulusSpec{}), resting_state(-85.0), 500.0);
  auto obs = self_observations(net, p, 500.0, 5);
  for (auto& o : obs) o.y[var::h_KL] = 0.25;
  const auto batch = sample_collocation(50, rng);

  LossWeights zero;
  zero.data = zero.ic = 0.0;
  zero.ode.fill(0.0);
  EXPECT_EQ(pinn_loss(L, p, obs, batch, zero).total, 0.0);

  LossWeights data_only = zero;
  data_only.data = 1.0;
  EXPECT_EQ(pinn_loss(L, p, obs, batch, data_only).total, data_loss(L, p, obs));

  LossWeights w;
  w.data = 0.7;
  w.ic = 1.3;
  for (int k = 0; k < kNumStates; ++k) w.ode[k] = 0.1 * (k + 1);
  const auto r = pinn_loss(L, p, obs, batch, w);
  double ode = 0.0;
  for (int k = 0; k < kNumStates; ++k) {
    EXPECT_EQ(r.ode_weighted[k], w.ode[k] * r.ode_raw[k]);
    ode += r.ode_weighted[k];
  }
  EXPECT_EQ(r.ode_total, ode);
  EXPECT_EQ(r.total, w.data * r.data + w.ic * r.ic + r.ode_total);
  EXPECT_GE(r.total, 0.0);
}

TEST(PinnLoss, WeightScalingScalesLossAndGradient) {
  std::mt19937_64 rng(46);
  const Mlp net(sbinn_arch({5, 5}));
  const VectorXd p = random_params(net, rng);
  const PinnLoss L(net, CapModel(DrugConfig{1, 2, 3, 4, 5}, StimulusSpec{}), resting_state(-85.0), 500.0);
  const auto obs = self_observations(net, random_params(net, rng), 500.0, 4);
  const auto batch = sample_collocation(40, rng);
  LossWeights w;
  for (int k = 0; k < kNumStates; ++k) w.ode[k] = 0.5 + k;
  VectorXd g1 = VectorXd::Zero(p.size()), g2 = VectorXd::Zero(p.size());
  const double a = pinn_loss(L, p, obs, batch, w, &g1).total;
  const double b = pinn_loss(L, p, obs, batch, w.scaled(3.0), &g2).total;
  EXPECT_NEAR(b, 3.0 * a, 1e-12 * b);
  EXPECT_TRUE(g2.isApprox(3.0 * g1, 1e-12));
}

TEST(PinnLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(47);
  const Mlp net(sbinn_arch({4, 4}));
  const VectorXd p = random_params(net, rng, 0.3);
  const PinnLoss L(net, CapModel(DrugConfig{1.5, 0.3, 7, 2, 0.9}, StimulusSpec{}), resting_state(-85.0), 500.0);
  auto obs = self_observations(net, random_params(net, rng), 500.0, 6);
  CollocationBatch batch;
  batch.tau = {0.0001, 0.0015, 0.01, 0.2, 0.55, 0.999};
  LossWeights w;
  for (int k = 0; k < kNumStates; ++k) w.ode[k] = std::pow(10.0, (k % 5) - 2);
  VectorXd g = VectorXd::Zero(p.size());
  pinn_loss(L, p, obs, batch, w, &g);
  const double gscale = g.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double h = 1e-6;
    VectorXd pp = p, pm = p;
    pp[i] += h;
    pm[i] -= h;
    const double fd = (pinn_loss(L, pp, obs, batch, w).total - pinn_loss(L, pm, obs, batch, w).total) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), 1e-3 * gscale}));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Balance, RuleArithmetic) {
  const std::array<double, 3> equal = {0.2, 0.2, 0.2};
  for (double w : balance_from_raw(equal)) EXPECT_DOUBLE_EQ(w, 1.0);

  const std::array<double, 2> pair = {1e-4, 1.0};
  const auto w = balance_from_raw(pair);
  EXPECT_NEAR(w[0] / w[1], 1e4, 1e-8);
  for (double x : w) {
    EXPECT_GE(x, kMinOdeWeight);
    EXPECT_LE(x, kMaxOdeWeight);
  }

  const std::array<double, 3> extreme = {1e-12, 1.0, 1e9};
  const auto we = balance_from_raw(extreme);
  EXPECT_EQ(we[0], kMaxOdeWeight);
  EXPECT_EQ(we[2], kMinOdeWeight);

  std::vector<std::string> warnings;
  const std::array<double, 3> with_zero = {0.0, 1.0, 2.0};
  EXPECT_EQ(balance_from_raw(with_zero, &warnings)[0], kMaxOdeWeight);
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Balance, RandomInitWithinOneDecadeUnlessClamped) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Mlp net(sbinn_arch());
    const VectorXd p = net.init_time_resolved(rng, kFirstLayerStd);
    std::uniform_real_distribution<double> c(0.0, 4.0), ic(0.1, 100.0);
    const DrugConfig d{c(rng), ic(rng), ic(rng), ic(rng), ic(rng)};
    const PinnLoss L(net, CapModel(d, StimulusSpec{}), resting_state(-85.0), 500.0);
    const auto batch = sample_collocation(500, rng);
    const auto bal = balance_ode_weights(L, p, batch);
    const auto ode = ode_loss(L, p, batch, bal.weights);
    double lo = INFINITY, hi = 0.0;
    for (int k = 0; k < kNumStates; ++k) {
      const double wk = bal.weights.ode[k];
      EXPECT_GE(wk, kMinOdeWeight);
      EXPECT_LE(wk, kMaxOdeWeight);
      if (wk == kMinOdeWeight || wk == kMaxOdeWeight) continue;
      lo = std::min(lo, ode.weighted[k]);
      hi = std::max(hi, ode.weighted[k]);
    }
    EXPECT_LE(hi / lo, 10.0) << "seed " << seed;
  }
}

TEST(Collocation, Sampling) {
  std::mt19937_64 a(48), b(48);
  const auto x = sample_collocation(100, a), y = sample_collocation(100, b);
  EXPECT_EQ(x.tau, y.tau);
  std::mt19937_64 rng(49);
  const auto big = sample_collocation(100000, rng);
  double sum = 0.0;
  for (double t : big.tau) {
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
    sum += t;
  }
  EXPECT_NEAR(sum / big.size(), 0.5, 0.01);
  EXPECT_THROW(sample_collocation(0, rng), DomainError);
}

TEST(PinnLoss, RejectsWrongArchitecture) {
  const Mlp net(make_arch(1, {4}, 3));
  EXPECT_THROW(PinnLoss(net, CapModel(drug_free(), StimulusSpec{}), resting_state(-85.0), 500.0), DomainError);
  const Mlp ok(sbinn_arch({4}));
  EXPECT_THROW(PinnLoss(ok, CapModel(drug_free(), StimulusSpec{}), resting_state(-85.0), 0.0), DomainError);
}
