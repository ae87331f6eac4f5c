// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Solves the model for a few channel-block scenarios and prints the
// resulting action potential biomarkers.

#include <cstdio>

#include "hsbinn/hsbinn.hpp"

int main() {
  using namespace hsbinn;
  struct Case {
    const char* name;
    DrugConfig drug;
  };
  // c = 2 uM; an IC50 of 100 uM leaves a channel essentially unblocked.
  const Case cases[] = {
      {"drug free", drug_free()},
      {"hERG block", {2.0, 100.0, 100.0, 100.0, 0.5}},
      {"Na block", {2.0, 0.5, 100.0, 100.0, 100.0}},
      {"Ca block", {2.0, 100.0, 0.5, 100.0, 100.0}},
  };
  SolveConfig cfg;
  cfg.t_end = 1000.0;
  std::printf("%-12s %10s %10s %10s\n", "scenario", "peak mV", "APD50 ms", "APD90 ms");
  for (const auto& c : cases) {
    const Trajectory tr = solve(c.drug, StimulusSpec{}, cfg);
    const BiomarkerResult b = apd90(tr.t, tr.column(var::V));
    std::printf("%-12s %10.2f %10.1f %10.1f\n", c.name, b.v_peak, b.apd50, b.apd90);
  }
}
