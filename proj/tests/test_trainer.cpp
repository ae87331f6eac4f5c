// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <random>

#include "test_support.hpp"

using namespace hsbinn;
using testing_support::TempDir;

namespace {

/// Small hyper-mode setup that trains in milliseconds per step.
TrainSetup toy_setup(long iterations = 100, std::uint64_t seed = 7) {
  TrainSetup s;
  s.mode = TrainMode::hyper;
  s.dataset.q = 2;
  s.dataset.seed = seed;
  s.train = desk_preset(iterations);
  s.train.seed = seed;
  s.train.batch = 32;
  s.train.obs_fraction = 0.05;
  s.train.main_hidden = {6, 6};
  s.train.hyper_hidden = {4, 4};
  s.train.deterministic = true;
  s.train.checkpoint_every = 0;
  return s;
}

void run_steps(TrainSession& s, int n) {
  for (int i = 0; i < n; ++i) s.step();
}

}  // namespace

TEST(Dataset, BoundsAndReproducibility) {
  DatasetSpec spec;
  spec.q = 10000;
  spec.seed = 3;
  const auto a = generate_dataset(spec);
  ASSERT_EQ(a.size(), 10000u);
  double mean_c = 0.0;
  for (const auto& d : a) {
    EXPECT_GE(d.c, 0.0);
    EXPECT_LE(d.c, 4.0);
    for (double ic : {d.ic50_naf, d.ic50_cal, d.ic50_tof, d.ic50_kr}) {
      EXPECT_GE(ic, 0.1);
      EXPECT_LE(ic, 100.0);
    }
    mean_c += d.c / a.size();
  }
  EXPECT_NEAR(mean_c, 2.0, 0.035);  // 3 sigma of the sample mean
  EXPECT_EQ(generate_dataset(spec), a);
  spec.seed = 4;
  EXPECT_NE(generate_dataset(spec)[0], a[0]);
  spec.q = 0;
  EXPECT_THROW(generate_dataset(spec), DomainError);
}

TEST(Observations, CountsAndGroundTruth) {
  DatasetSpec spec;
  spec.q = 3;
  const auto configs = generate_dataset(spec);
  auto rng = make_rng(0, stream::observations);
  const auto all = build_observations(configs, 1.0, rng);
  const std::size_t n_grid = all.trajectories[0].size(), total = 3 * n_grid;
  EXPECT_EQ(all.obs.size(), total);

  const auto strat = build_observations(configs, 0.05, rng);
  EXPECT_EQ(strat.obs.size(), static_cast<std::size_t>(std::llround(0.05 * total)));

  const auto bern = build_observations(configs, 0.05, rng, ObsSampling::bernoulli);
  const double mean = 0.05 * total, sd = std::sqrt(total * 0.05 * 0.95);
  EXPECT_NEAR(static_cast<double>(bern.obs.size()), mean, 3.0 * sd);

  for (const auto* d : {&all, &strat, &bern}) {
    ASSERT_EQ(d->obs_begin.back(), d->obs.size());
    for (std::size_t i = 0; i < d->configs.size(); ++i)
      for (const auto& o : d->observations_of(i)) {
        EXPECT_EQ(o.config, i);
        const auto& tr = d->trajectories[i];
        const auto j = static_cast<std::size_t>(std::lround(o.t / 0.5));
        EXPECT_EQ(tr.t[j], o.t);
        EXPECT_EQ(tr.y[j], o.y);  // observations are exact solver values
      }
  }
  EXPECT_THROW(build_observations(configs, 0.0, rng), DomainError);
}

TEST(LrSchedule, PaperValues) {
  const LrSchedule s = paper_preset().lr;
  EXPECT_EQ(lr_at(0, s), 1e-4);
  EXPECT_EQ(lr_at(10000, s), 1e-4);
  EXPECT_NEAR(lr_at(30000, s), 5.05e-5, 1e-18);
  EXPECT_EQ(lr_at(50000, s), 1e-6);
  EXPECT_EQ(lr_at(80000, s), 1e-6);
  for (long i = 1; i < 80000; ++i) ASSERT_LE(std::abs(lr_at(i, s) - lr_at(i - 1, s)), 1e-4 / 40000 + 1e-18);
  EXPECT_THROW(lr_at(-1, s), DomainError);
  EXPECT_THROW((LrSchedule{1e-4, 5, 5, 1e-6}.validate()), DomainError);
}

TEST(Adamax, FirstStepIsSignedLearningRate) {
  Eigen::VectorXd p(3), g(3);
  p << 1.0, 2.0, 3.0;
  g << 0.5, -4.0, 0.0;
  auto st = AdamaxState::zeros(3);
  adamax_step(p, g, st, 0.01);
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p[1], 2.0 + 0.01, 1e-9);
  EXPECT_EQ(p[2], 3.0);
  EXPECT_EQ(st.step, 1);
}

TEST(Adamax, MomentsAndDescent) {
  // f(p) = |p|^2 / 2 from p0 = (3, -2): loss falls for the first steps.
  Eigen::VectorXd p(2);
  p << 3.0, -2.0;
  auto st = AdamaxState::zeros(2);
  double prev = p.squaredNorm();
  Eigen::VectorXd u_prev = st.u;
  for (int i = 0; i < 5; ++i) {
    const Eigen::VectorXd g = p;
    adamax_step(p, g, st, 0.1);
    EXPECT_LT(p.squaredNorm(), prev);
    prev = p.squaredNorm();
    for (int k = 0; k < 2; ++k) {
      EXPECT_GE(st.u[k], 0.999 * u_prev[k]);
      EXPECT_GE(st.u[k], std::abs(g[k]));
    }
    u_prev = st.u;
  }
  Eigen::VectorXd q = p;
  adamax_step(q, Eigen::VectorXd::Zero(2), st, 0.1);
  EXPECT_TRUE((q - p).norm() > 0.0);  // momentum keeps moving
  Eigen::VectorXd bad(3);
  EXPECT_THROW(adamax_step(q, bad, st, 0.1), DomainError);
}

TEST(TrainSession, BalancedAtInit) {
  auto s = TrainSession::create(toy_setup());
  EXPECT_EQ(s.iteration(), 0);
  EXPECT_EQ(s.data().configs.size(), 2u);
  EXPECT_FALSE(s.data().obs.empty());
  for (double w : s.weights().ode) {
    EXPECT_GE(w, kMinOdeWeight);
    EXPECT_LE(w, kMaxOdeWeight);
  }
  EXPECT_EQ(s.theta(0).size(), static_cast<Eigen::Index>(param_count(sbinn_arch({6, 6}))));
}

TEST(TrainSession, DeterministicForSeed) {
  auto a = TrainSession::create(toy_setup());
  auto b = TrainSession::create(toy_setup());
  run_steps(a, 5);
  run_steps(b, 5);
  EXPECT_EQ(a.params(), b.params());
  auto c = TrainSession::create(toy_setup(100, 8));
  EXPECT_NE(a.data().configs[0], c.data().configs[0]);
}

TEST(TrainSession, ResumeIsBitExact) {
  TempDir dir("resume");
  auto a = TrainSession::create(toy_setup());
  run_steps(a, 20);

  auto b = TrainSession::create(toy_setup());
  run_steps(b, 10);
  b.save(dir.file("mid.ckpt"));
  auto c = TrainSession::resume(dir.file("mid.ckpt"));
  EXPECT_EQ(c.iteration(), 10);
  EXPECT_EQ(c.params(), b.params());
  run_steps(c, 10);
  EXPECT_EQ(c.params(), a.params());
  EXPECT_EQ(c.optimizer().m, a.optimizer().m);
  EXPECT_EQ(c.optimizer().u, a.optimizer().u);
}

TEST(TrainSession, SbinnModeTrainsMainNetDirectly) {
  TrainSetup s = toy_setup();
  s.mode = TrainMode::sbinn;
  s.drug = DrugConfig{1.0, 2.0, 3.0, 4.0, 5.0};
  auto session = TrainSession::create(s);
  EXPECT_EQ(session.hyper(), nullptr);
  EXPECT_EQ(session.data().configs.size(), 1u);
  EXPECT_EQ(session.theta(0), session.params());
  const VectorXd before = session.params();
  session.step();
  EXPECT_NE(session.params(), before);
}

TEST(Train, LogHasOneRecordPerIteration) {
  TempDir dir("log");
  auto s = TrainSession::create(toy_setup(12));
  TrainOptions opt;
  opt.log_path = dir.file("log.jsonl");
  opt.checkpoint_path = dir.file("run.ckpt");
  train(s, opt);
  std::ifstream f(opt.log_path);
  std::string line;
  long n = 0;
  while (std::getline(f, line)) {
    const auto j = json::parse(line);
    EXPECT_EQ(j.at("iter").get<long>(), n);
    EXPECT_GT(j.at("loss_total").get<double>(), 0.0);
    EXPECT_EQ(j.at("loss_ode_raw").size(), static_cast<std::size_t>(kNumStates));
    ++n;
  }
  EXPECT_EQ(n, 12);
  EXPECT_EQ(TrainSession::resume(opt.checkpoint_path).iteration(), 12);
}

TEST(Train, NonFiniteLossRaisesAndWritesDiagnostic) {
  TempDir dir("nan");
  TrainSetup setup = toy_setup(10);
  setup.train.lr = {1e300, 1, 5, 1e300};
  auto s = TrainSession::create(setup);
  TrainOptions opt;
  opt.checkpoint_path = dir.file("run.ckpt");
  EXPECT_THROW(train(s, opt), NumericError);
  EXPECT_TRUE(std::filesystem::exists(opt.checkpoint_path + ".diag"));
  EXPECT_TRUE(read_checkpoint(opt.checkpoint_path + ".diag").meta.at("diagnostic").get<bool>());
}

TEST(Checkpoint, RejectsDamagedFiles) {
  TempDir dir("ckpt");
  auto s = TrainSession::create(toy_setup());
  const std::string path = dir.file("a.ckpt");
  s.save(path);
  const std::string bytes = testing_support::slurp(path);
  ASSERT_EQ(bytes.substr(0, 5), "HSBN1");

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(dir.file(name), std::ios::binary) << content;
    return dir.file(name);
  };
  std::string v2 = bytes;
  v2[5] = 2;
  try {
    TrainSession::resume(write("v2.ckpt", v2));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
  }
  EXPECT_THROW(TrainSession::resume(write("trunc.ckpt", bytes.substr(0, bytes.size() - 9))), FormatError);
  EXPECT_THROW(TrainSession::resume(write("short.ckpt", bytes.substr(0, 30))), FormatError);
  EXPECT_THROW(TrainSession::resume(write("magic.ckpt", "XXXX" + bytes.substr(4))), FormatError);
  EXPECT_THROW(TrainSession::resume(write("tail.ckpt", bytes + "x")), FormatError);
  EXPECT_THROW(TrainSession::resume(dir.file("missing.ckpt")), IoError);
}

TEST(Train, ToyRunReducesSmoothedLoss) {
  auto s = TrainSession::create(toy_setup(2000));
  std::vector<double> loss;
  TrainOptions opt;
  opt.progress = [&](long, const LossReport& r) { loss.push_back(r.total); };
  train(s, opt);
  ASSERT_EQ(loss.size(), 2000u);
  const auto sm = moving_average(loss, 100);
  EXPECT_LT(sm.back(), 0.5 * sm[99]) << sm[99] << " -> " << sm.back();
}

TEST(MovingAverage, Examples) {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const auto m = moving_average(x, 2);
  EXPECT_EQ(m, (std::vector<double>{1.0, 1.5, 2.5, 3.5, 4.5}));
  EXPECT_EQ(moving_average(x, 1), x);
  EXPECT_THROW(moving_average(x, 0), DomainError);
}
