// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Trains a small drug-conditioned surrogate for a few hundred iterations and
// compares it with the solver on a drug it has not seen. The networks are far
// too small and the run far too short for an accurate fit; the point is the
// API, not the numbers.

#include <cstdio>

#include "hsbinn/hsbinn.hpp"

int main() {
  using namespace hsbinn;
  TrainSetup setup;
  setup.mode = TrainMode::hyper;
  setup.dataset.q = 4;
  setup.train = desk_preset(400);
  setup.train.batch = 100;
  setup.train.obs_fraction = 0.02;
  setup.train.main_hidden = {16, 16};
  setup.train.hyper_hidden = {8, 8};

  TrainSession session = TrainSession::create(setup);
  TrainOptions opt;
  opt.progress = [](long it, const LossReport& r) {
    if ((it + 1) % 100 == 0) std::printf("iter %4ld  loss %.4g\n", it + 1, r.total);
  };
  train(session, opt);

  const SurrogateModel model = SurrogateModel::from_session(session);
  const DrugConfig unseen{1.5, 20.0, 5.0, 50.0, 2.0};
  const Trajectory ref = solve(unseen, setup.stimulus, setup.solver);
  const MatrixXd pred = model.predict(unseen, ref.t);
  std::vector<double> v(pred.cols());
  for (Eigen::Index j = 0; j < pred.cols(); ++j) v[j] = pred(var::V, j);
  std::printf("unseen drug: V nsd %.4g\n", nsd(v, ref.column(var::V)));
}
