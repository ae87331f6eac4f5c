// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hsbinn/cap_model.hpp"
#include "hsbinn/ode_solver.hpp"
#include "hsbinn/pinn_loss.hpp"

namespace hsbinn {

/// Independent random streams derived from one user seed.
namespace stream {
enum : std::uint32_t { dataset = 1, observations = 2, init = 3, training = 4, test_set = 5 };
}  // namespace stream

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream_id) {
  std::seed_seq s{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream_id};
  return std::mt19937_64(s);
}

struct DatasetSpec {
  std::size_t q = 500;
  double ic50_lo = 0.1, ic50_hi = 100.0;  ///< uM
  double c_lo = 0.0, c_hi = 4.0;          ///< uM
  std::uint64_t seed = 0;

  void validate() const {
    if (q < 1) throw DomainError("dataset: q must be >= 1");
    if (!(ic50_lo > 0.0) || !(ic50_hi > ic50_lo)) throw DomainError("dataset: need 0 < ic50_lo < ic50_hi");
    if (!(c_lo >= 0.0) || !(c_hi > c_lo)) throw DomainError("dataset: need 0 <= c_lo < c_hi");
  }
  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

/// q configurations; per configuration c is drawn first, then the four IC50s
/// in DrugConfig order, all uniform.
inline std::vector<DrugConfig> generate_dataset(const DatasetSpec& spec, std::uint32_t stream_id = stream::dataset) {
  spec.validate();
  auto rng = make_rng(spec.seed, stream_id);
  std::uniform_real_distribution<double> conc(spec.c_lo, spec.c_hi), ic50(spec.ic50_lo, spec.ic50_hi);
  std::vector<DrugConfig> out(spec.q);
  for (auto& d : out) {
    d.c = conc(rng);
    d.ic50_naf = ic50(rng);
    d.ic50_cal = ic50(rng);
    d.ic50_tof = ic50(rng);
    d.ic50_kr = ic50(rng);
  }
  return out;
}

/// How observed (config, time) points are drawn. Both give every point the
/// same inclusion probability. `stratified` splits the flattened index space
/// into round(fraction * N) equal blocks and picks one point per block;
/// `bernoulli` keeps each point independently.
enum class ObsSampling { stratified, bernoulli };

struct TrainingData {
  std::vector<DrugConfig> configs;      ///< configs whose reference solve succeeded
  std::vector<Trajectory> trajectories; ///< one per kept config
  ObservationSet obs;                   ///< sorted by config, then time
  std::vector<std::size_t> obs_begin;   ///< obs of config i: [obs_begin[i], obs_begin[i+1])
  std::vector<std::string> warnings;

  std::span<const Observation> observations_of(std::size_t i) const {
    return std::span<const Observation>(obs).subspan(obs_begin[i], obs_begin[i + 1] - obs_begin[i]);
  }
};

inline TrainingData build_observations(const std::vector<DrugConfig>& configs, double fraction, std::mt19937_64& rng,
                                       ObsSampling sampling = ObsSampling::stratified, const StimulusSpec& stim = {},
                                       const SolveConfig& cfg = {}, const StateVector& u0 = resting_state(-85.0),
                                       const ModelConstants& constants = {}) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("build_observations: fraction must lie in (0, 1]");
  TrainingData data;
  const auto solved = solve_batch(configs, stim, cfg, u0, constants);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (!solved[i].ok()) {
      data.warnings.push_back("config " + std::to_string(i) + " excluded: " + solved[i].error);
      std::cerr << "warning: " << data.warnings.back() << "\n";
      continue;
    }
    data.configs.push_back(configs[i]);
    data.trajectories.push_back(*solved[i].trajectory);
  }
  const std::size_t q = data.configs.size();
  if (q == 0) throw DomainError("build_observations: every reference solve failed");
  const std::size_t n_grid = data.trajectories[0].size();
  const std::size_t total = q * n_grid;

  std::vector<std::size_t> picked;
  if (sampling == ObsSampling::stratified) {
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * total)));
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t lo = b * total / n, hi = (b + 1) * total / n;
      std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
      picked.push_back(pick(rng));
    }
  } else {
    std::bernoulli_distribution keep(fraction);
    for (std::size_t k = 0; k < total; ++k)
      if (keep(rng)) picked.push_back(k);
  }

  data.obs_begin.assign(q + 1, 0);
  for (std::size_t k : picked) {
    const std::size_t i = k / n_grid, j = k % n_grid;
    data.obs.push_back({data.trajectories[i].t[j], i, data.trajectories[i].y[j]});
    ++data.obs_begin[i + 1];
  }
  for (std::size_t i = 0; i < q; ++i) data.obs_begin[i + 1] += data.obs_begin[i];
  return data;
}

}  // namespace hsbinn
