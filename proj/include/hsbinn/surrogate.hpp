// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>

#include "hsbinn/checkpoint.hpp"
#include "hsbinn/hypernet.hpp"
#include "hsbinn/serialize.hpp"
#include "hsbinn/trainer.hpp"

namespace hsbinn {

/// A trained network loaded for inference only (no training data rebuilt).
class SurrogateModel {
 public:
  static SurrogateModel load(const std::string& path) {
    const CheckpointFile ck = read_checkpoint(path);
    const json& m = ck.meta;
    if (m.value("format", "") != "hsbinn-train") throw FormatError(path + ": not a training checkpoint");
    SurrogateModel s;
    s.setup_ = setup_from_json(m.at("setup"));
    s.iteration_ = m.at("iteration").get<long>();
    s.t_max_ = m.at("t_max").get<double>();
    s.main_ = std::make_shared<Mlp>(m.at("main_arch").get<MlpArch>());
    if (s.setup_.mode == TrainMode::hyper)
      s.hyper_ = std::make_shared<HyperNet>(m.at("hyper_arch").get<HyperArch>(), s.main_->arch(),
                                            m.at("scaler").get<DrugScaler>());
    s.params_ = ck.get("params");
    const std::size_t expect = s.hyper_ ? s.hyper_->param_count() : s.main_->param_count();
    if (s.params_.size() != static_cast<Eigen::Index>(expect))
      throw FormatError(path + ": parameter count does not match the stored architecture");
    return s;
  }

  static SurrogateModel from_session(const TrainSession& session) {
    SurrogateModel s;
    s.setup_ = session.setup();
    s.iteration_ = session.iteration();
    s.t_max_ = session.setup().t_max();
    s.main_ = std::make_shared<Mlp>(session.main_net().arch());
    if (session.hyper()) s.hyper_ = std::make_shared<HyperNet>(*session.hyper());
    s.params_ = session.params();
    return s;
  }

  TrainMode mode() const { return setup_.mode; }
  const TrainSetup& setup() const { return setup_; }
  long iteration() const { return iteration_; }
  double t_max() const { return t_max_; }

  /// Main-network parameters for `drug`. A single-config model ignores the
  /// argument and answers for the drug it was trained on.
  VectorXd theta(const DrugConfig& drug) const { return hyper_ ? hyper_->forward(params_, drug) : params_; }

  /// 14 x n matrix of states at physical times `t_ms`.
  MatrixXd predict(const DrugConfig& drug, std::span<const double> t_ms) const {
    const VectorXd th = theta(drug);
    MatrixXd x(1, t_ms.size());
    for (std::size_t i = 0; i < t_ms.size(); ++i) {
      if (t_ms[i] < 0.0 || t_ms[i] > t_max_ * (1.0 + 1e-12)) throw DomainError("predict: time outside [0, t_max]");
      x(0, i) = scale_time(t_ms[i], t_max_);
    }
    return main_->forward(th, x);
  }

 private:
  TrainSetup setup_;
  long iteration_ = 0;
  double t_max_ = 500.0;
  std::shared_ptr<Mlp> main_;
  std::shared_ptr<HyperNet> hyper_;
  VectorXd params_;
};

}  // namespace hsbinn
