// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "hsbinn/adamax.hpp"
#include "hsbinn/biomarkers.hpp"
#include "hsbinn/cap_model.hpp"
#include "hsbinn/checkpoint.hpp"
#include "hsbinn/dataset.hpp"
#include "hsbinn/dual.hpp"
#include "hsbinn/error.hpp"
#include "hsbinn/evaluate.hpp"
#include "hsbinn/hypernet.hpp"
#include "hsbinn/mlp.hpp"
#include "hsbinn/ode_solver.hpp"
#include "hsbinn/parallel.hpp"
#include "hsbinn/pinn_loss.hpp"
#include "hsbinn/serialize.hpp"
#include "hsbinn/surrogate.hpp"
#include "hsbinn/trainer.hpp"
