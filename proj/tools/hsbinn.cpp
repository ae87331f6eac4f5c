// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "hsbinn/commands.hpp"

namespace {

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

void add_common(CLI::App* cmd, hsbinn::CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (a manifest also works)");
  cmd->add_option("--seed", o.seed, "Random seed for data, initialization and sampling");
  cmd->add_flag("--deterministic", o.deterministic, "Single worker thread");
  cmd->add_option("--out", o.out, "Output file or directory");
}

void add_drug(CLI::App* cmd, hsbinn::CommonOptions& o) {
  cmd->add_option("--c", o.c, "Drug concentration (uM)");
  cmd->add_option("--ic50-naf", o.ic50_naf, "IC50 of the fast sodium channel (uM)");
  cmd->add_option("--ic50-cal", o.ic50_cal, "IC50 of the L-type calcium channel (uM)");
  cmd->add_option("--ic50-tof", o.ic50_tof, "IC50 of the fast transient outward channel (uM)");
  cmd->add_option("--ic50-kr", o.ic50_kr, "IC50 of the rapid delayed rectifier (uM)");
}

void add_training(CLI::App* cmd, hsbinn::CommonOptions& o) {
  cmd->add_option("--preset", o.preset, "Training preset: paper or desk")->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--mode", o.mode, "hyper (drug-conditioned) or sbinn (single drug)")
      ->check(CLI::IsMember({"hyper", "sbinn"}));
  cmd->add_option("--iters", o.iters, "Training iterations");
  cmd->add_option("--q", o.q, "Number of training configurations");
  cmd->add_option("--lr-plateau", o.lr_plateau, "Learning rate of the initial plateau");
  cmd->add_option("--obs-fraction", o.obs_fraction, "Fraction of solver grid points used as observations");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drug-conditioned physics-informed surrogates of a cardiac action potential model"};
  app.require_subcommand(1);
  hsbinn::CommonOptions o;
  o.invocation = join_args(argc, argv);

  auto* sim = app.add_subcommand("simulate", "Integrate the model and write a trajectory CSV");
  add_common(sim, o);
  add_drug(sim, o);

  double target_peak = 20.0;
  auto* cal = app.add_subcommand("calibrate", "Find the weakest stimulus that elicits an action potential");
  add_common(cal, o);
  cal->add_option("--target-peak", target_peak, "Required peak voltage (mV)");

  auto* gen = app.add_subcommand("gen-data", "Sample drug configurations and observations");
  add_common(gen, o);
  add_training(gen, o);

  hsbinn::TrainCommandOptions topt;
  auto* tr = app.add_subcommand("train", "Train a surrogate");
  add_common(tr, o);
  add_training(tr, o);
  add_drug(tr, o);
  tr->add_option("--resume", topt.resume, "Checkpoint to continue from");
  tr->add_option("--until", topt.until, "Stop at this iteration; a later --resume continues the same run");
  tr->add_flag("--quiet", topt.quiet, "No progress lines");
  tr->add_option("--report-every", topt.report_every, "Progress line period (iterations)");

  std::string checkpoint;
  auto* pred = app.add_subcommand("predict", "Evaluate a trained surrogate for one drug");
  add_common(pred, o);
  add_drug(pred, o);
  pred->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();

  hsbinn::EvaluateOptions eopt;
  std::vector<std::string> baselines;
  auto* ev = app.add_subcommand("evaluate", "Compare a surrogate with the solver on held-out drugs");
  add_common(ev, o);
  ev->add_option("--checkpoint", eopt.checkpoint, "Trained checkpoint");
  ev->add_flag("--oracle", eopt.oracle, "Use the solver as the surrogate (self-comparison)");
  ev->add_option("--test-q", eopt.test_q, "Number of held-out configurations");
  ev->add_option("--test-seed", eopt.test_seed, "Seed of the held-out set");
  ev->add_option("--baseline", baselines, "NAME=summary.csv with an apd90_abs_error row");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? hsbinn::kExitOk : hsbinn::kExitUsage;
  }

  try {
    if (sim->parsed()) {
      hsbinn::cmd_simulate(o);
    } else if (cal->parsed()) {
      const auto m = hsbinn::cmd_calibrate(o, target_peak);
      std::printf("amplitude %.6g\n", m.extra["amplitude"].get<double>());
    } else if (gen->parsed()) {
      hsbinn::cmd_gen_data(o);
    } else if (tr->parsed()) {
      hsbinn::cmd_train(o, topt);
    } else if (pred->parsed()) {
      hsbinn::cmd_predict(o, checkpoint);
    } else if (ev->parsed()) {
      for (const auto& b : baselines) {
        const auto eq = b.find('=');
        if (eq == std::string::npos) throw hsbinn::DomainError("--baseline expects NAME=PATH");
        eopt.baselines.emplace_back(b.substr(0, eq), b.substr(eq + 1));
      }
      const auto m = hsbinn::cmd_evaluate(o, eopt);
      std::printf("speedup %.3g\n", m.timings["speedup"].get<double>());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return hsbinn::exit_code_for(e);
  }
  return hsbinn::kExitOk;
}
