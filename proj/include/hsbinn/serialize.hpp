// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// JSON mappings for configuration and model descriptors. Readers accept
// partial objects (missing keys keep their defaults) but reject unknown keys.

#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"

#include "hsbinn/adamax.hpp"
#include "hsbinn/cap_model.hpp"
#include "hsbinn/error.hpp"
#include "hsbinn/hypernet.hpp"
#include "hsbinn/mlp.hpp"
#include "hsbinn/ode_solver.hpp"
#include "hsbinn/pinn_loss.hpp"

namespace hsbinn {

using nlohmann::json;

namespace detail {

inline void expect_keys(const json& j, std::string_view what, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw FormatError(std::string(what) + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (auto key : keys) known = known || key == k;
    if (!known) throw FormatError(std::string(what) + ": unknown key '" + k + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      it->get_to(out);
    } catch (const json::exception& e) {
      throw FormatError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

}  // namespace detail

inline void to_json(json& j, const DrugConfig& d) {
  j = {{"c", d.c}, {"ic50_naf", d.ic50_naf}, {"ic50_cal", d.ic50_cal}, {"ic50_tof", d.ic50_tof}, {"ic50_kr", d.ic50_kr}};
}
inline void from_json(const json& j, DrugConfig& d) {
  detail::expect_keys(j, "drug", {"c", "ic50_naf", "ic50_cal", "ic50_tof", "ic50_kr"});
  detail::read(j, "c", d.c);
  detail::read(j, "ic50_naf", d.ic50_naf);
  detail::read(j, "ic50_cal", d.ic50_cal);
  detail::read(j, "ic50_tof", d.ic50_tof);
  detail::read(j, "ic50_kr", d.ic50_kr);
}

inline void to_json(json& j, const ModelConstants& k) {
  j = {{"e_ca", k.e_ca},   {"e_na", k.e_na},   {"e_k", k.e_k},   {"g_cal", k.g_cal},
       {"g_nal", k.g_nal}, {"g_naf", k.g_naf}, {"g_kr", k.g_kr}, {"g_kl", k.g_kl},
       {"g_ki", k.g_ki},   {"g_tof", k.g_tof}, {"g_tos", k.g_tos}};
}
inline void from_json(const json& j, ModelConstants& k) {
  detail::expect_keys(j, "constants",
                      {"e_ca", "e_na", "e_k", "g_cal", "g_nal", "g_naf", "g_kr", "g_kl", "g_ki", "g_tof", "g_tos"});
  detail::read(j, "e_ca", k.e_ca);
  detail::read(j, "e_na", k.e_na);
  detail::read(j, "e_k", k.e_k);
  detail::read(j, "g_cal", k.g_cal);
  detail::read(j, "g_nal", k.g_nal);
  detail::read(j, "g_naf", k.g_naf);
  detail::read(j, "g_kr", k.g_kr);
  detail::read(j, "g_kl", k.g_kl);
  detail::read(j, "g_ki", k.g_ki);
  detail::read(j, "g_tof", k.g_tof);
  detail::read(j, "g_tos", k.g_tos);
}

inline void to_json(json& j, const StimulusSpec& s) {
  j = {{"onset", s.onset}, {"duration", s.duration}, {"amplitude", s.amplitude}};
}
inline void from_json(const json& j, StimulusSpec& s) {
  detail::expect_keys(j, "stimulus", {"onset", "duration", "amplitude"});
  detail::read(j, "onset", s.onset);
  detail::read(j, "duration", s.duration);
  detail::read(j, "amplitude", s.amplitude);
}

inline void to_json(json& j, const SolveConfig& c) {
  j = {{"t_end", c.t_end},       {"rtol", c.rtol},         {"atol", c.atol},
       {"max_step", c.max_step}, {"output_dt", c.output_dt}, {"min_step", c.min_step},
       {"max_steps", c.max_steps}, {"fixed_step", c.fixed_step}};
}
inline void from_json(const json& j, SolveConfig& c) {
  detail::expect_keys(j, "solver",
                      {"t_end", "rtol", "atol", "max_step", "output_dt", "min_step", "max_steps", "fixed_step"});
  detail::read(j, "t_end", c.t_end);
  detail::read(j, "rtol", c.rtol);
  detail::read(j, "atol", c.atol);
  detail::read(j, "max_step", c.max_step);
  detail::read(j, "output_dt", c.output_dt);
  detail::read(j, "min_step", c.min_step);
  detail::read(j, "max_steps", c.max_steps);
  detail::read(j, "fixed_step", c.fixed_step);
}

inline void to_json(json& j, const LrSchedule& s) {
  j = {{"plateau_lr", s.plateau_lr}, {"plateau_end", s.plateau_end}, {"decay_end", s.decay_end},
       {"final_lr", s.final_lr}};
}
inline void from_json(const json& j, LrSchedule& s) {
  detail::expect_keys(j, "lr", {"plateau_lr", "plateau_end", "decay_end", "final_lr"});
  detail::read(j, "plateau_lr", s.plateau_lr);
  detail::read(j, "plateau_end", s.plateau_end);
  detail::read(j, "decay_end", s.decay_end);
  detail::read(j, "final_lr", s.final_lr);
}

inline void to_json(json& j, const AdamaxConfig& c) { j = {{"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps}}; }
inline void from_json(const json& j, AdamaxConfig& c) {
  detail::expect_keys(j, "adamax", {"beta1", "beta2", "eps"});
  detail::read(j, "beta1", c.beta1);
  detail::read(j, "beta2", c.beta2);
  detail::read(j, "eps", c.eps);
}

NLOHMANN_JSON_SERIALIZE_ENUM(Activation, {{Activation::tanh, "tanh"},
                                          {Activation::sigmoid, "sigmoid"},
                                          {Activation::linear, "linear"}})

inline void to_json(json& j, const MlpArch& a) {
  j = {{"input", a.input},
       {"hidden", a.hidden},
       {"output", a.output},
       {"hidden_activation", a.hidden_activation},
       {"output_activations", a.output_activations},
       {"output_scale", a.output_scale},
       {"output_shift", a.output_shift}};
}
inline void from_json(const json& j, MlpArch& a) {
  detail::expect_keys(j, "mlp",
                      {"input", "hidden", "output", "hidden_activation", "output_activations", "output_scale",
                       "output_shift"});
  detail::read(j, "input", a.input);
  detail::read(j, "hidden", a.hidden);
  detail::read(j, "output", a.output);
  detail::read(j, "hidden_activation", a.hidden_activation);
  detail::read(j, "output_activations", a.output_activations);
  detail::read(j, "output_scale", a.output_scale);
  detail::read(j, "output_shift", a.output_shift);
}

inline void to_json(json& j, const HyperArch& a) {
  j = {{"input", a.input}, {"hidden", a.hidden}, {"output", a.output}, {"gain_init", a.gain_init}};
}
inline void from_json(const json& j, HyperArch& a) {
  detail::expect_keys(j, "hypernet", {"input", "hidden", "output", "gain_init"});
  detail::read(j, "input", a.input);
  detail::read(j, "hidden", a.hidden);
  detail::read(j, "output", a.output);
  detail::read(j, "gain_init", a.gain_init);
}

inline void to_json(json& j, const DrugScaler& s) {
  j = {{"c_lo", s.c_lo}, {"c_hi", s.c_hi}, {"ic50_lo", s.ic50_lo}, {"ic50_hi", s.ic50_hi}};
}
inline void from_json(const json& j, DrugScaler& s) {
  detail::expect_keys(j, "scaler", {"c_lo", "c_hi", "ic50_lo", "ic50_hi"});
  detail::read(j, "c_lo", s.c_lo);
  detail::read(j, "c_hi", s.c_hi);
  detail::read(j, "ic50_lo", s.ic50_lo);
  detail::read(j, "ic50_hi", s.ic50_hi);
}

inline void to_json(json& j, const LossWeights& w) { j = {{"data", w.data}, {"ic", w.ic}, {"ode", w.ode}}; }
inline void from_json(const json& j, LossWeights& w) {
  detail::expect_keys(j, "weights", {"data", "ic", "ode"});
  detail::read(j, "data", w.data);
  detail::read(j, "ic", w.ic);
  detail::read(j, "ode", w.ode);
}

inline json report_json(const LossReport& r) {
  return {{"loss_total", r.total}, {"loss_data", r.data},         {"loss_ic", r.ic},
          {"loss_ode", r.ode_total}, {"loss_ode_raw", r.ode_raw}, {"loss_ode_weighted", r.ode_weighted}};
}

}  // namespace hsbinn
