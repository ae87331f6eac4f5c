// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

// Drug-parameterized cardiac action potential model: one voltage ODE driven
// by eight ionic currents plus thirteen gating ODEs. All functions are pure
// and templated on the scalar so the same code path serves the reference
// integrator (double) and the PINN residual Jacobian (Dual<14>).

#pragma once

#include <array>
#include <cmath>
#include <string_view>

#include "hsbinn/dual.hpp"
#include "hsbinn/error.hpp"

namespace hsbinn {

inline constexpr int kNumStates = 14;
inline constexpr int kNumGates = 13;
inline constexpr int kNumCurrents = 8;

/// Canonical state ordering, shared by every file format.
namespace var {
enum : int {
  V = 0,
  f_CaL,
  h_CaL,
  f_NaF,
  f_NaL,
  h_NaF,
  h_NaL,
  f_ToF,
  f_ToS,
  h_ToF,
  h_ToS,
  f_KR,
  f_KL,
  h_KL,
};
}  // namespace var

inline constexpr std::array<std::string_view, kNumStates> kStateNames = {
    "V",     "f_CaL", "h_CaL", "f_NaF", "f_NaL", "h_NaF", "h_NaL",
    "f_ToF", "f_ToS", "h_ToF", "h_ToS", "f_KR",  "f_KL",  "h_KL"};

namespace current {
enum : int { NaF = 0, CaL, ToF, KR, NaL, ToS, KL, KI };
}  // namespace current

inline constexpr std::array<std::string_view, kNumCurrents> kCurrentNames = {
    "I_NaF", "I_CaL", "I_ToF", "I_KR", "I_NaL", "I_ToS", "I_KL", "I_KI"};

template <class T>
using State = std::array<T, kNumStates>;
using StateVector = State<double>;

/// Compound characteristics: concentration and the four channel IC50s (uM).
struct DrugConfig {
  double c = 0.0;
  double ic50_naf = 1.0;
  double ic50_cal = 1.0;
  double ic50_tof = 1.0;
  double ic50_kr = 1.0;

  std::array<double, 5> to_array() const { return {c, ic50_naf, ic50_cal, ic50_tof, ic50_kr}; }
  static DrugConfig from_array(const std::array<double, 5>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }

  void validate() const {
    if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("drug concentration must be finite and >= 0");
    for (double ic : {ic50_naf, ic50_cal, ic50_tof, ic50_kr})
      if (!(ic > 0.0) || !std::isfinite(ic)) throw DomainError("IC50 values must be finite and > 0");
  }

  friend bool operator==(const DrugConfig&, const DrugConfig&) = default;
};

/// Drug-free reference compound (c = 0, so IC50 values are irrelevant).
inline DrugConfig drug_free() { return DrugConfig{}; }

struct ModelConstants {
  double e_ca = 40.0;
  double e_na = 74.0;
  double e_k = -85.0;
  double g_cal = 0.078;
  double g_nal = 0.03;
  double g_naf = 16.52;
  double g_kr = 0.03;
  double g_kl = 0.1505;
  double g_ki = 0.29;
  double g_tof = 0.06;
  double g_tos = 0.02;

  void validate() const {
    for (double g : {g_cal, g_nal, g_naf, g_kr, g_kl, g_ki, g_tof, g_tos})
      if (!(g > 0.0)) throw DomainError("maximal conductances must be > 0");
  }
  friend bool operator==(const ModelConstants&, const ModelConstants&) = default;
};

/// Rectangular stimulus pulse. Negative amplitude depolarizes because
/// dV/dt = -(I_stim + sum I_j).
struct StimulusSpec {
  double onset = 0.0;
  double duration = 1.0;
  double amplitude = -35.0;  // about 1.27x the drug-free threshold found by calibrate_stimulus

  void validate() const {
    if (!(duration > 0.0)) throw DomainError("stimulus duration must be > 0");
    if (!std::isfinite(amplitude) || !std::isfinite(onset)) throw DomainError("stimulus must be finite");
  }
  friend bool operator==(const StimulusSpec&, const StimulusSpec&) = default;
};

inline double stimulus(double t, const StimulusSpec& s) {
  return (t >= s.onset && t < s.onset + s.duration) ? s.amplitude : 0.0;
}

template <class T>
T sigmoid(const T& z) {
  using std::exp;
  return 1.0 / (1.0 + exp(-z));
}

/// z / (1 - exp(-z)), continuous through z = 0.
template <class T>
T exprel_inv(const T& z) {
  using std::abs;
  using std::expm1;
  if (abs(z) < 1e-6) return 1.0 + z * (0.5 + z * (1.0 / 12.0));
  return z / (-expm1(-z));
}

/// (1 + c / ic50)^-1
inline double inhibition_factor(double c, double ic50) {
  if (!(ic50 > 0.0)) throw DomainError("inhibition_factor: ic50 must be > 0");
  if (!(c >= 0.0)) throw DomainError("inhibition_factor: concentration must be >= 0");
  return 1.0 / (1.0 + c / ic50);
}

/// Conductance scale factors for the four drug-sensitive channels.
struct ChannelBlock {
  double naf = 1.0;
  double cal = 1.0;
  double tof = 1.0;
  double kr = 1.0;

  static ChannelBlock from(const DrugConfig& d) {
    d.validate();
    return {inhibition_factor(d.c, d.ic50_naf), inhibition_factor(d.c, d.ic50_cal),
            inhibition_factor(d.c, d.ic50_tof), inhibition_factor(d.c, d.ic50_kr)};
  }
};

enum class RateForm { relaxation, prefactor };

/// How each gate relaxes: (g_inf - g) / tau(V) or alpha(V) * (g_inf - g).
inline constexpr std::array<RateForm, kNumGates> kGateRateForms = {
    RateForm::relaxation, RateForm::prefactor,  RateForm::relaxation, RateForm::relaxation,
    RateForm::relaxation, RateForm::relaxation, RateForm::relaxation, RateForm::relaxation,
    RateForm::relaxation, RateForm::relaxation, RateForm::prefactor,  RateForm::prefactor,
    RateForm::prefactor};

/// Steady state and rate coefficient of every gate at voltage v. The gate
/// derivative is rate[k] * (inf[k] - gate[k]) with rate = 1/tau or alpha.
template <class T>
struct GateKinetics {
  std::array<T, kNumGates> inf;
  std::array<T, kNumGates> rate;
};

template <class T>
std::array<T, kNumGates> gate_steady_states(const T& v) {
  const T act_cal = sigmoid((v + 14.6) / 5.5);
  const T inact_cal = sigmoid(-(v + 31.0) / 5.54);
  const T act_to = sigmoid((v + 3.0) / 15.0);
  const T inact_to = sigmoid(-(v + 33.5) / 10.0);
  const T act_kl = sigmoid((v - 1.5) / 16.7);
  return {act_cal,
          inact_cal,
          sigmoid((v + 25.0) / 5.0),
          sigmoid((v + 30.0) / 5.0),
          sigmoid(-(v + 69.0) / 3.96),
          sigmoid(-(v + 75.6) / 6.3),
          act_to,
          act_to,
          inact_to,
          inact_to,
          sigmoid((v + 50.0) / 7.5),
          act_kl,
          act_kl};
}

template <class T>
GateKinetics<T> gate_kinetics(const T& v) {
  using std::exp;
  GateKinetics<T> k;
  k.inf = gate_steady_states(v);
  constexpr int o = 1;  // gate index = state index - 1

  k.rate[var::f_CaL - o] = T(1.0 / 0.7);
  const T dv_cal = v + 14.5;
  k.rate[var::h_CaL - o] = (0.7 * exp(-0.0337 * (dv_cal * dv_cal)) + 0.04) / 25.1;
  k.rate[var::f_NaF - o] = T(1.0 / 0.005);
  k.rate[var::f_NaL - o] = T(1.0 / 15.0);
  k.rate[var::h_NaF - o] = T(1.0 / 2.0);
  k.rate[var::h_NaL - o] = 1.0 / (120.0 + exp((v + 100.0) / 25.0));
  k.rate[var::f_ToF - o] = 1.0 / (3.5 * exp(-(v * v) / 900.0) + 1.5);
  k.rate[var::f_ToS - o] = 1.0 / (9.0 * sigmoid(-(v + 3.0) / 15.0) + 0.5);
  k.rate[var::h_ToF - o] = 1.0 / (20.0 * (k.inf[var::h_ToF - o] + 1.0));
  k.rate[var::h_ToS - o] = 1.0 / (3000.0 * sigmoid(-(v + 60.0) / 10.0) + 30.0);

  // 0.00138 (V+7) / (1 - e^{-0.123 (V+7)}) - 0.00061 (V+10) / (1 + e^{0.145 (V+10)})
  const T dv_kr = v + 10.0;
  k.rate[var::f_KR - o] = (0.00138 / 0.123) * exprel_inv(0.123 * (v + 7.0)) -
                          0.00061 * dv_kr / (1.0 + exp(0.145 * dv_kr));

  // 7.19e-5 (V+30) / (1 - e^{-0.148 (V+30)}) + 1.31e-4 (V+30) / (e^{0.0687 (V+30)} - 1)
  const T dv_kl = v + 30.0;
  const T alpha_kl = (7.19e-5 / 0.148) * exprel_inv(0.148 * dv_kl) +
                     (1.31e-4 / 0.0687) * exprel_inv(-0.0687 * dv_kl);
  k.rate[var::f_KL - o] = alpha_kl;
  k.rate[var::h_KL - o] = 0.25 * alpha_kl;
  return k;
}

template <class T>
std::array<T, kNumCurrents> ionic_currents(const State<T>& u, const ChannelBlock& block,
                                           const ModelConstants& k = {}) {
  const T& v = u[var::V];
  std::array<T, kNumCurrents> i;
  i[current::NaF] = (k.g_naf * block.naf) * u[var::f_NaF] * u[var::h_NaF] * (v - k.e_na);
  i[current::CaL] = (k.g_cal * block.cal) * u[var::f_CaL] * u[var::h_CaL] * (v - k.e_ca);
  i[current::ToF] = (k.g_tof * block.tof) * u[var::f_ToF] * u[var::h_ToF] * (v - k.e_k);
  i[current::KR] = (k.g_kr * block.kr) * u[var::f_KR] * sigmoid(-(v + 33.0) / 22.4) * (v - k.e_k);
  i[current::NaL] = k.g_nal * u[var::f_NaL] * u[var::h_NaL] * (v - k.e_na);
  i[current::ToS] =
      k.g_tos * u[var::f_ToS] * (u[var::h_ToS] + 0.5 * sigmoid(-(v + 33.5) / 10.0)) * (v - k.e_k);
  i[current::KL] = k.g_kl * u[var::f_KL] * u[var::h_KL] * (v - k.e_k);
  i[current::KI] = k.g_ki * sigmoid(-(v + 92.0) / 10.0) * (v - k.e_k);
  return i;
}

template <class T>
std::array<T, kNumCurrents> ionic_currents(const State<T>& u, const DrugConfig& drug,
                                           const ModelConstants& k = {}) {
  return ionic_currents(u, ChannelBlock::from(drug), k);
}

/// The full model for one compound. Cheap to copy; rhs is pure.
class CapModel {
 public:
  CapModel(const DrugConfig& drug, const StimulusSpec& stim, const ModelConstants& constants = {})
      : drug_(drug), stim_(stim), constants_(constants), block_(ChannelBlock::from(drug)) {
    stim_.validate();
    constants_.validate();
  }

  const DrugConfig& drug() const { return drug_; }
  const StimulusSpec& stimulus_spec() const { return stim_; }
  const ModelConstants& constants() const { return constants_; }
  const ChannelBlock& block() const { return block_; }

  template <class T>
  State<T> rhs(double t, const State<T>& u) const {
    return rhs_with_stimulus(stimulus(t, stim_), u);
  }

  /// Right-hand side with the stimulus current supplied directly.
  template <class T>
  State<T> rhs_with_stimulus(double i_stim, const State<T>& u) const {
    const auto currents = ionic_currents(u, block_, constants_);
    T total = T(i_stim);
    for (const auto& c : currents) total += c;

    State<T> du;
    du[var::V] = -total;
    const auto kin = gate_kinetics(u[var::V]);
    for (int g = 0; g < kNumGates; ++g) du[g + 1] = kin.rate[g] * (kin.inf[g] - u[g + 1]);
    return du;
  }

 private:
  DrugConfig drug_;
  StimulusSpec stim_;
  ModelConstants constants_;
  ChannelBlock block_;
};

inline StateVector rhs(double t, const StateVector& u, const DrugConfig& drug, const StimulusSpec& stim,
                       const ModelConstants& constants = {}) {
  return CapModel(drug, stim, constants).rhs(t, u);
}

}  // namespace hsbinn
