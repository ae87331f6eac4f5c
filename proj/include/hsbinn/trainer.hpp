// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Training loop for both surrogate kinds: a single-configuration network
// trained directly ("sbinn") and the drug-conditioned hypernetwork
// ("hyper"). One iteration = fresh collocation batch per configuration,
// loss and gradient, one Adamax step.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hsbinn/adamax.hpp"
#include "hsbinn/checkpoint.hpp"
#include "hsbinn/dataset.hpp"
#include "hsbinn/hypernet.hpp"
#include "hsbinn/parallel.hpp"
#include "hsbinn/pinn_loss.hpp"
#include "hsbinn/serialize.hpp"

namespace hsbinn {

enum class TrainMode { sbinn, hyper };

NLOHMANN_JSON_SERIALIZE_ENUM(TrainMode, {{TrainMode::sbinn, "sbinn"}, {TrainMode::hyper, "hyper"}})
NLOHMANN_JSON_SERIALIZE_ENUM(ObsSampling, {{ObsSampling::stratified, "stratified"},
                                           {ObsSampling::bernoulli, "bernoulli"}})

struct TrainConfig {
  long iterations = 80'000;
  LrSchedule lr;
  std::size_t batch = 500;
  double obs_fraction = 0.006;
  ObsSampling sampling = ObsSampling::stratified;
  AdamaxConfig adamax;
  long checkpoint_every = 5'000;  ///< 0 disables periodic checkpoints
  bool deterministic = false;     ///< single worker thread
  std::uint64_t seed = 0;
  std::vector<int> main_hidden = {50, 50, 50, 50, 50};
  std::vector<int> hyper_hidden = {46, 46, 46, 46, 46};
  double first_layer_std = kFirstLayerStd;
  double gain_init = kDefaultHeadGain;

  void validate() const {
    if (iterations < 1) throw DomainError("train: iterations must be >= 1");
    lr.validate();
    if (lr.decay_end > iterations)
      throw DomainError("train: lr decay must end at or before the last iteration");
    if (batch < 1) throw DomainError("train: collocation batch must be >= 1");
    if (!(obs_fraction >= 0.0 && obs_fraction <= 1.0)) throw DomainError("train: obs_fraction must lie in [0, 1]");
    if (checkpoint_every < 0) throw DomainError("train: checkpoint_every must be >= 0");
    if (!(first_layer_std > 0.0)) throw DomainError("train: first_layer_std must be > 0");
  }
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Paper-length run: 80 000 iterations, lr 1e-4 held to 10 000 then linear
/// to 1e-6 at 50 000.
inline TrainConfig paper_preset() { return {}; }

/// Shorter runs keep the schedule shape (hold 1/8, decay until 5/8) with a
/// ten times larger starting rate.
inline TrainConfig desk_preset(long iterations = 20'000) {
  TrainConfig c;
  c.iterations = iterations;
  c.lr = {1e-3, iterations / 8, iterations * 5 / 8, 1e-5};
  c.checkpoint_every = std::max(1L, iterations / 4);
  return c;
}

inline void to_json(json& j, const TrainConfig& c) {
  j = {{"iterations", c.iterations},
       {"lr", c.lr},
       {"batch", c.batch},
       {"obs_fraction", c.obs_fraction},
       {"sampling", c.sampling},
       {"adamax", c.adamax},
       {"checkpoint_every", c.checkpoint_every},
       {"deterministic", c.deterministic},
       {"seed", c.seed},
       {"main_hidden", c.main_hidden},
       {"hyper_hidden", c.hyper_hidden},
       {"first_layer_std", c.first_layer_std},
       {"gain_init", c.gain_init}};
}
inline void from_json(const json& j, TrainConfig& c) {
  detail::expect_keys(j, "train",
                      {"iterations", "lr", "batch", "obs_fraction", "sampling", "adamax", "checkpoint_every",
                       "deterministic", "seed", "main_hidden", "hyper_hidden", "first_layer_std", "gain_init"});
  detail::read(j, "iterations", c.iterations);
  detail::read(j, "lr", c.lr);
  detail::read(j, "batch", c.batch);
  detail::read(j, "obs_fraction", c.obs_fraction);
  detail::read(j, "sampling", c.sampling);
  detail::read(j, "adamax", c.adamax);
  detail::read(j, "checkpoint_every", c.checkpoint_every);
  detail::read(j, "deterministic", c.deterministic);
  detail::read(j, "seed", c.seed);
  detail::read(j, "main_hidden", c.main_hidden);
  detail::read(j, "hyper_hidden", c.hyper_hidden);
  detail::read(j, "first_layer_std", c.first_layer_std);
  detail::read(j, "gain_init", c.gain_init);
}

inline void to_json(json& j, const DatasetSpec& d) {
  j = {{"q", d.q},         {"ic50_lo", d.ic50_lo}, {"ic50_hi", d.ic50_hi},
       {"c_lo", d.c_lo},   {"c_hi", d.c_hi},       {"seed", d.seed}};
}
inline void from_json(const json& j, DatasetSpec& d) {
  detail::expect_keys(j, "dataset", {"q", "ic50_lo", "ic50_hi", "c_lo", "c_hi", "seed"});
  detail::read(j, "q", d.q);
  detail::read(j, "ic50_lo", d.ic50_lo);
  detail::read(j, "ic50_hi", d.ic50_hi);
  detail::read(j, "c_lo", d.c_lo);
  detail::read(j, "c_hi", d.c_hi);
  detail::read(j, "seed", d.seed);
}

/// Everything needed to (re)build a training run.
struct TrainSetup {
  TrainMode mode = TrainMode::hyper;
  DatasetSpec dataset;  ///< hyper mode
  DrugConfig drug;      ///< sbinn mode
  TrainConfig train;
  StimulusSpec stimulus;
  SolveConfig solver;
  ModelConstants constants;
  StateVector u0 = resting_state(-85.0);

  double t_max() const { return solver.t_end; }
};

inline json setup_json(const TrainSetup& s) {
  return {{"mode", s.mode},         {"dataset", s.dataset},   {"drug", s.drug},
          {"train", s.train},       {"stimulus", s.stimulus}, {"solver", s.solver},
          {"constants", s.constants}, {"u0", s.u0}};
}

inline TrainSetup setup_from_json(const json& j) {
  TrainSetup s;
  j.at("mode").get_to(s.mode);
  j.at("dataset").get_to(s.dataset);
  j.at("drug").get_to(s.drug);
  j.at("train").get_to(s.train);
  j.at("stimulus").get_to(s.stimulus);
  j.at("solver").get_to(s.solver);
  j.at("constants").get_to(s.constants);
  j.at("u0").get_to(s.u0);
  return s;
}

inline std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}
inline std::mt19937_64 rng_from_state(const std::string& s) {
  std::istringstream is(s);
  std::mt19937_64 rng;
  is >> rng;
  if (!is) throw FormatError("bad random generator state");
  return rng;
}

class TrainSession {
 public:
  /// Solves the training configurations, draws observations, initializes
  /// the networks and balances the ODE weights at the initial parameters.
  static TrainSession create(const TrainSetup& setup) {
    TrainSession s(setup);
    auto init_rng = make_rng(setup.train.seed, stream::init);
    const VectorXd main0 = s.main_->init_time_resolved(init_rng, setup.train.first_layer_std);
    s.params_ = s.hyper_ ? s.hyper_->init(init_rng, main0) : main0;
    s.opt_ = AdamaxState::zeros(s.params_.size());
    s.rng_ = make_rng(setup.train.seed, stream::training);

    std::vector<std::array<double, kNumStates>> raw;
    std::array<double, kNumStates> ones;
    ones.fill(1.0);
    const auto batch = sample_collocation(setup.train.batch, init_rng);
    for (std::size_t i = 0; i < s.losses_.size(); ++i)
      raw.push_back(s.losses_[i].ode_loss(s.theta(i), batch, ones).raw);
    s.balance_ = balance_ode_weights(raw);
    s.weights_ = s.balance_.weights;
    return s;
  }

  static TrainSession resume(const std::string& path) {
    const CheckpointFile ck = read_checkpoint(path);
    const json& m = ck.meta;
    if (m.value("format", "") != "hsbinn-train") throw FormatError(path + ": not a training checkpoint");
    TrainSetup setup = setup_from_json(m.at("setup"));
    TrainSession s(setup, m.at("configs").get<std::vector<DrugConfig>>());
    if (m.at("main_arch").get<MlpArch>() != s.main_->arch())
      throw FormatError(path + ": main network architecture mismatch");
    if (s.hyper_ && m.at("hyper_arch").get<HyperArch>() != s.hyper_->arch())
      throw FormatError(path + ": hypernetwork architecture mismatch");
    s.iteration_ = m.at("iteration").get<long>();
    s.rng_ = rng_from_state(m.at("rng").get<std::string>());
    m.at("weights").get_to(s.weights_);
    s.balance_.weights = s.weights_;
    m.at("balance_raw").get_to(s.balance_.raw);
    s.params_ = ck.get("params");
    s.opt_.m = ck.get("m");
    s.opt_.u = ck.get("u");
    s.opt_.step = m.at("adamax_step").get<long>();
    if (s.params_.size() != static_cast<Eigen::Index>(s.param_count()) || s.opt_.m.size() != s.params_.size() ||
        s.opt_.u.size() != s.params_.size())
      throw FormatError(path + ": array lengths do not match the architecture");
    return s;
  }

  void save(const std::string& path, bool diagnostic = false) const {
    CheckpointFile ck;
    ck.meta = {{"format", "hsbinn-train"},
               {"mode", setup_.mode},
               {"iteration", iteration_},
               {"adamax_step", opt_.step},
               {"seed", setup_.train.seed},
               {"rng", rng_state(rng_)},
               {"setup", setup_json(setup_)},
               {"configs", data_.configs},
               {"main_arch", main_->arch()},
               {"weights", weights_},
               {"balance_raw", balance_.raw},
               {"t_max", setup_.t_max()},
               {"diagnostic", diagnostic}};
    if (hyper_) {
      ck.meta["hyper_arch"] = hyper_->arch();
      ck.meta["scaler"] = hyper_->scaler();
    }
    ck.put("params", params_);
    ck.put("m", opt_.m);
    ck.put("u", opt_.u);
    write_checkpoint(path, ck);
  }

  /// One optimizer step. Throws NumericError before touching the parameters
  /// when the loss or its gradient is not finite.
  LossReport step() {
    const std::size_t q = losses_.size();
    std::vector<CollocationBatch> batches;
    batches.reserve(q);
    for (std::size_t i = 0; i < q; ++i) batches.push_back(sample_collocation(setup_.train.batch, rng_));
    VectorXd grad = VectorXd::Zero(params_.size());
    LossReport report;
    if (hyper_) {
      std::vector<ConfigTerm> terms(q);
      for (std::size_t i = 0; i < q; ++i)
        terms[i] = {data_.configs[i], &losses_[i], data_.observations_of(i), &batches[i]};
      report = hyperpinn_loss(*hyper_, params_, terms, weights_, &grad, threads()).total;
    } else {
      report = losses_[0].evaluate(params_, data_.observations_of(0), batches[0], weights_, &grad);
    }
    if (!std::isfinite(report.total) || !grad.allFinite())
      throw NumericError("non-finite loss or gradient at iteration " + std::to_string(iteration_));
    last_lr_ = lr_at(iteration_, setup_.train.lr);
    adamax_step(params_, grad, opt_, last_lr_, setup_.train.adamax);
    ++iteration_;
    return report;
  }

  /// Main-network parameters for training config i.
  VectorXd theta(std::size_t i) const { return hyper_ ? hyper_->forward(params_, data_.configs[i]) : params_; }

  /// Main-network parameters for an arbitrary drug (hyper mode), or the
  /// trained network (sbinn mode).
  VectorXd theta_for(const DrugConfig& d) const { return hyper_ ? hyper_->forward(params_, d) : params_; }

  long iteration() const { return iteration_; }
  double last_lr() const { return last_lr_; }
  const TrainSetup& setup() const { return setup_; }
  const TrainingData& data() const { return data_; }
  const VectorXd& params() const { return params_; }
  const AdamaxState& optimizer() const { return opt_; }
  const LossWeights& weights() const { return weights_; }
  const BalanceResult& balance() const { return balance_; }
  const Mlp& main_net() const { return *main_; }
  const HyperNet* hyper() const { return hyper_.get(); }
  std::size_t param_count() const { return hyper_ ? hyper_->param_count() : main_->param_count(); }
  int threads() const { return setup_.train.deterministic ? 1 : thread_count(); }

 private:
  explicit TrainSession(const TrainSetup& setup, std::optional<std::vector<DrugConfig>> configs = std::nullopt)
      : setup_(setup) {
    setup_.train.validate();
    setup_.stimulus.validate();
    setup_.solver.validate();
    setup_.constants.validate();
    if (!configs) {
      if (setup_.mode == TrainMode::hyper) {
        configs = generate_dataset(setup_.dataset);
      } else {
        setup_.drug.validate();
        configs = std::vector<DrugConfig>{setup_.drug};
      }
    }
    auto obs_rng = make_rng(setup_.train.seed, stream::observations);
    if (setup_.train.obs_fraction > 0.0) {
      data_ = build_observations(*configs, setup_.train.obs_fraction, obs_rng, setup_.train.sampling,
                                 setup_.stimulus, setup_.solver, setup_.u0, setup_.constants);
    } else {
      data_.configs = *configs;
      data_.obs_begin.assign(configs->size() + 1, 0);
    }
    main_ = std::make_unique<Mlp>(sbinn_arch(setup_.train.main_hidden));
    if (setup_.mode == TrainMode::hyper) {
      HyperArch ha = hyper_arch_for(main_->arch(), setup_.train.hyper_hidden);
      ha.gain_init = setup_.train.gain_init;
      hyper_ = std::make_unique<HyperNet>(ha, main_->arch());
    }
    for (const auto& d : data_.configs)
      losses_.emplace_back(*main_, CapModel(d, setup_.stimulus, setup_.constants), setup_.u0, setup_.t_max());
  }

  TrainSetup setup_;
  TrainingData data_;
  std::unique_ptr<Mlp> main_;
  std::unique_ptr<HyperNet> hyper_;
  std::vector<PinnLoss> losses_;
  VectorXd params_;
  AdamaxState opt_;
  std::mt19937_64 rng_;
  LossWeights weights_;
  BalanceResult balance_;
  long iteration_ = 0;
  double last_lr_ = 0.0;
};

/// One JSON record per iteration.
inline json log_record(long iter, double lr, const LossReport& r) {
  json j = report_json(r);
  j["iter"] = iter;
  j["lr"] = lr;
  return j;
}

struct TrainOptions {
  std::string checkpoint_path;  ///< empty: no checkpoints
  std::string log_path;         ///< empty: no log
  long until = -1;              ///< stop iteration; -1 = setup iterations
  std::function<void(long, const LossReport&)> progress;
};

/// Runs the session to `until`. On a non-finite loss a diagnostic checkpoint
/// is written next to the regular one before the error propagates.
inline void train(TrainSession& s, const TrainOptions& opt = {}) {
  const long until = opt.until < 0 ? s.setup().train.iterations : opt.until;
  std::ofstream log;
  if (!opt.log_path.empty()) {
    log.open(opt.log_path, s.iteration() == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("cannot open training log " + opt.log_path);
  }
  const long every = s.setup().train.checkpoint_every;
  while (s.iteration() < until) {
    const long it = s.iteration();
    LossReport r;
    try {
      r = s.step();
    } catch (const NumericError&) {
      if (!opt.checkpoint_path.empty()) s.save(opt.checkpoint_path + ".diag", true);
      throw;
    }
    if (log) log << log_record(it, s.last_lr(), r).dump() << '\n';
    if (opt.progress) opt.progress(it, r);
    if (!opt.checkpoint_path.empty() && every > 0 && s.iteration() % every == 0) s.save(opt.checkpoint_path);
  }
  if (log) {
    log.flush();
    if (!log) throw IoError("write failed for " + opt.log_path);
  }
  if (!opt.checkpoint_path.empty()) s.save(opt.checkpoint_path);
}

/// Trailing moving average (window w, shorter at the start).
inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t w) {
  if (w == 0) throw DomainError("moving_average: window must be >= 1");
  std::vector<double> out(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    acc += x[i];
    if (i >= w) acc -= x[i - w];
    out[i] = acc / static_cast<double>(std::min(i + 1, w));
  }
  return out;
}

}  // namespace hsbinn
