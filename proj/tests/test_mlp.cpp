// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "gradcheck.hpp"
#include "test_support.hpp"

using namespace hsbinn;

namespace {

std::size_t closed_form_count(const std::vector<int>& widths) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

VectorXd random_params(const Mlp& net, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  VectorXd p(net.param_count());
  for (auto& v : p) v = n01(rng);
  return p;
}

}  // namespace

TEST(ParamCount, Examples) {
  EXPECT_EQ(param_count(sbinn_arch()), 11014u);
  EXPECT_EQ(param_count(sbinn_arch()), 100u + 4u * 2550u + 714u);
  EXPECT_EQ(param_count(make_arch(1, {}, 1)), 2u);
  const auto hyper = make_arch(5, {46, 46, 46, 46, 46}, 11014);
  EXPECT_EQ(param_count(hyper), closed_form_count({5, 46, 46, 46, 46, 46, 11014}));
  EXPECT_EQ(param_count(hyper), 526582u);
}

TEST(ArchValidation, Rejects) {
  MlpArch a = make_arch(1, {3}, 2);
  a.output_activations.pop_back();
  EXPECT_THROW(Mlp{a}, DomainError);
  EXPECT_THROW(Mlp(make_arch(0, {3}, 2)), DomainError);
  EXPECT_THROW(Mlp(make_arch(1, {0}, 2)), DomainError);
}

TEST(Forward, ZeroParameters) {
  const Mlp net(sbinn_arch({8, 8}));
  const VectorXd p = VectorXd::Zero(net.param_count());
  for (double t : {0.0, 0.3, 1.0}) {
    VectorXd x(1);
    x[0] = t;
    const VectorXd y = net.forward(p, x);
    EXPECT_EQ(y[var::V], 0.0);
    for (int k = 1; k < kNumStates; ++k) EXPECT_EQ(y[k], 0.5);
  }
}

TEST(Forward, SingleAffineNeuron) {
  const Mlp net(make_arch(1, {}, 1));
  VectorXd p(2);
  p << 2.0, 1.0;
  VectorXd x(1);
  x[0] = 3.0;
  EXPECT_EQ(net.forward(p, x)[0], 7.0);
  for (double t : {-1.0, 0.0, 5.0}) EXPECT_EQ(net.input_derivative(p, t)[0], 2.0);
}

TEST(Forward, OutputScaleAppliesToLinearOutputsOnly) {
  MlpArch a = make_arch(1, {}, 2);
  a.output_activations = {Activation::linear, Activation::sigmoid};
  a.output_scale = {10.0, 10.0};
  a.output_shift = {-5.0, -5.0};
  const Mlp net(a);
  VectorXd p(4);
  p << 1.0, 1.0, 0.5, 0.0;  // w = (1, 1), b = (0.5, 0)
  VectorXd x(1);
  x[0] = 0.0;
  const VectorXd y = net.forward(p, x);
  EXPECT_DOUBLE_EQ(y[0], 0.0);  // -5 + 10 * 0.5
  EXPECT_DOUBLE_EQ(y[1], 0.5);
}

TEST(Forward, BoundedOutputsInUnitInterval) {
  std::mt19937_64 rng(31);
  const Mlp net(sbinn_arch({6, 6}));
  for (int i = 0; i < 50; ++i) {
    const VectorXd p = random_params(net, rng);
    MatrixXd x = MatrixXd::Random(1, 20);
    const MatrixXd y = net.forward(p, x);
    for (int k = 1; k < kNumStates; ++k) {
      EXPECT_GE(y.row(k).minCoeff(), 0.0);
      EXPECT_LE(y.row(k).maxCoeff(), 1.0);
    }
  }
}

TEST(Forward, ShapeMismatch) {
  const Mlp net(make_arch(2, {3}, 1));
  const MatrixXd wide = MatrixXd::Zero(3, 1), ok = MatrixXd::Zero(2, 1);
  EXPECT_THROW(net.forward(VectorXd::Zero(net.param_count()), wide), DomainError);
  EXPECT_THROW(net.forward(VectorXd::Zero(5), ok), DomainError);
  EXPECT_THROW(net.input_derivative(VectorXd::Zero(net.param_count()), 0.0), DomainError);
}

TEST(Forward, BatchedEqualsColumnwise) {
  std::mt19937_64 rng(32);
  const Mlp net(sbinn_arch({7, 5}));
  const VectorXd p = random_params(net, rng);
  const MatrixXd x = MatrixXd::Random(1, 9);
  const MatrixXd y = net.forward(p, x);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const VectorXd xj = x.col(j);
    EXPECT_TRUE(net.forward(p, xj).isApprox(y.col(j), 1e-15));
  }
}

TEST(Gradient, SingleLinearNeuronHalfSquare) {
  const Mlp net(make_arch(1, {}, 1));
  VectorXd p(2);
  p << 1.5, -0.25;
  VectorXd x(1);
  x[0] = 2.0;
  const auto loss = [](const VectorXd& y) { return std::make_pair(0.5 * y[0] * y[0], VectorXd(y)); };
  const VectorXd g = net.grad_params(p, x, loss);
  const double out = 1.5 * 2.0 - 0.25;
  EXPECT_DOUBLE_EQ(g[0], 2.0 * out);
  EXPECT_DOUBLE_EQ(g[1], out);
}

TEST(Gradient, ConstantLossGivesZero) {
  std::mt19937_64 rng(33);
  const Mlp net(sbinn_arch({4}));
  const VectorXd p = random_params(net, rng);
  const auto loss = [](const VectorXd& y) { return std::make_pair(3.0, VectorXd(VectorXd::Zero(y.size()))); };
  VectorXd x(1);
  x[0] = 0.4;
  EXPECT_EQ(net.grad_params(p, x, loss).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradient, LinearInTheLoss) {
  std::mt19937_64 rng(34);
  const Mlp net(sbinn_arch({5, 5}));
  const VectorXd p = random_params(net, rng);
  VectorXd x(1);
  x[0] = 0.7;
  const auto l1 = [](const VectorXd& y) { return std::make_pair(y.squaredNorm(), VectorXd(2.0 * y)); };
  const auto l2 = [](const VectorXd& y) { return std::make_pair(y.sum(), VectorXd(VectorXd::Ones(y.size()))); };
  const auto l12 = [](const VectorXd& y) {
    return std::make_pair(y.squaredNorm() + y.sum(), VectorXd(2.0 * y + VectorXd::Ones(y.size())));
  };
  const VectorXd g = net.grad_params(p, x, l1) + net.grad_params(p, x, l2);
  EXPECT_TRUE(net.grad_params(p, x, l12).isApprox(g, 1e-13));
}

TEST(Gradient, FiniteDifferencesOnRandomNets) {
  const auto w = gradcheck::run(100, 35);
  EXPECT_LT(w.params, 1e-5);
  EXPECT_LT(w.time, 1e-6);
}

TEST(Tangent, SigmoidChainRule) {
  std::mt19937_64 rng(36);
  const Mlp net(make_arch(1, {4}, 1, Activation::sigmoid));
  const Mlp pre(make_arch(1, {4}, 1, Activation::linear));
  const VectorXd p = random_params(net, rng);
  for (double t : {0.1, 0.5, 0.9}) {
    VectorXd x(1);
    x[0] = t;
    const double y = net.forward(p, x)[0];
    EXPECT_NEAR(net.input_derivative(p, t)[0], y * (1.0 - y) * pre.input_derivative(p, t)[0], 1e-14);
  }
}

TEST(Flatten, RoundTrip) {
  std::mt19937_64 rng(37);
  const Mlp net(sbinn_arch({3, 4}));
  const VectorXd p = random_params(net, rng);
  EXPECT_EQ(net.flatten(net.unflatten(p)), p);
  auto layers = net.unflatten(p);
  EXPECT_EQ(layers[0].first.rows(), 3);
  EXPECT_EQ(layers[2].first.rows(), kNumStates);
  layers.pop_back();
  EXPECT_THROW(net.flatten(layers), DomainError);
}

TEST(Init, GlorotBoundsAndZeroBiases) {
  std::mt19937_64 rng(38);
  const Mlp net(sbinn_arch());
  const VectorXd p = net.init_glorot(rng);
  const auto layers = net.unflatten(p);
  const auto widths = net.arch().widths();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const double limit = std::sqrt(6.0 / (widths[l] + widths[l + 1]));
    EXPECT_LE(layers[l].first.cwiseAbs().maxCoeff(), limit);
    EXPECT_EQ(layers[l].second.cwiseAbs().maxCoeff(), 0.0);
  }
  std::mt19937_64 again(38);
  EXPECT_EQ(net.init_glorot(again), p);
}

TEST(Init, TimeResolvedSwitchTimesInsideWindow) {
  std::mt19937_64 rng(39);
  const Mlp net(sbinn_arch());
  const VectorXd p = net.init_time_resolved(rng, 300.0);
  const auto layers = net.unflatten(p);
  const auto& w = layers[0].first;
  const auto& b = layers[0].second;
  double ss = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double s = -b[i] / w(i, 0);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    // Normalized by the slope spread at this switch time.
    const double sd = std::min(300.0, w.rows() / (2.0 * std::sqrt(s)));
    ss += w(i, 0) * w(i, 0) / (sd * sd);
    EXPECT_LT(std::abs(w(i, 0)), 6.0 * sd);
  }
  EXPECT_NEAR(std::sqrt(ss / w.rows()), 1.0, 0.35);
  EXPECT_THROW(Mlp(make_arch(2, {3}, 1)).init_time_resolved(rng, 1.0), DomainError);
}
