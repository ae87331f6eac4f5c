// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "hsbinn/error.hpp"

namespace hsbinn {

/// Minimum peak excursion above baseline for a curve to count as an AP.
inline constexpr double kMinApAmplitude = 10.0;

struct BiomarkerResult {
  double t_peak = 0.0;
  double v_peak = 0.0;
  double v_baseline = 0.0;
  double apd90 = std::numeric_limits<double>::quiet_NaN();
  double apd50 = std::numeric_limits<double>::quiet_NaN();
  bool valid = false;
};

namespace detail {

// First time after index `from` at which v falls through `level`, linearly
// interpolated between grid points; NaN if it never does.
inline double crossing_down(std::span<const double> t, std::span<const double> v, std::size_t from, double level) {
  for (std::size_t j = from; j + 1 < v.size(); ++j)
    if (v[j] >= level && v[j + 1] < level) return t[j] + (level - v[j]) / (v[j + 1] - v[j]) * (t[j + 1] - t[j]);
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// APD90/APD50 of a sampled voltage trace. The baseline is the mean of V
/// over [0, baseline_end) when that window holds samples, else V at the
/// first sample. The result is invalid when the peak rises less than
/// kMinApAmplitude above baseline or the curve does not repolarize through
/// the 90% level inside the window.
inline BiomarkerResult action_potential_duration(std::span<const double> t, std::span<const double> v,
                                                 double baseline_end = 0.0) {
  if (t.size() != v.size() || t.size() < 2) throw DomainError("apd: need matching time and voltage samples");
  BiomarkerResult r;
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size() && t[i] < baseline_end; ++i, ++n) sum += v[i];
  r.v_baseline = n > 0 ? sum / static_cast<double>(n) : v[0];
  const auto peak = static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
  r.t_peak = t[peak];
  r.v_peak = v[peak];
  if (!(r.v_peak - r.v_baseline >= kMinApAmplitude)) return r;
  const double amp = r.v_peak - r.v_baseline;
  const double t90 = detail::crossing_down(t, v, peak, r.v_peak - 0.9 * amp);
  const double t50 = detail::crossing_down(t, v, peak, r.v_peak - 0.5 * amp);
  if (std::isnan(t90) || std::isnan(t50)) return r;
  r.apd90 = t90 - r.t_peak;
  r.apd50 = t50 - r.t_peak;
  r.valid = true;
  return r;
}

inline BiomarkerResult apd90(std::span<const double> t, std::span<const double> v, double baseline_end = 0.0) {
  return action_potential_duration(t, v, baseline_end);
}

/// Mean squared difference over the squared range of the reference curve.
/// A flat reference (range below 1e-12) leaves the mean squared difference
/// unnormalized.
inline double nsd(std::span<const double> pred, std::span<const double> ref) {
  if (pred.size() != ref.size() || ref.empty()) throw DomainError("nsd: curves must have equal, non-zero length");
  double se = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) se += (pred[i] - ref[i]) * (pred[i] - ref[i]);
  const auto [lo, hi] = std::minmax_element(ref.begin(), ref.end());
  const double range = *hi - *lo;
  const double mse = se / static_cast<double>(ref.size());
  return range < 1e-12 ? mse : mse / (range * range);
}

struct Summary {
  double min = 0.0, q1 = 0.0, median = 0.0, mean = 0.0, q3 = 0.0, max = 0.0;
  std::size_t n = 0;

  std::array<double, 6> values() const { return {min, q1, median, mean, q3, max}; }
};

/// Quantile with linear interpolation between order statistics
/// (position p * (n - 1)).
inline double quantile_sorted(const std::vector<double>& s, double p) {
  if (s.empty()) throw DomainError("quantile of an empty sample");
  const double pos = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline Summary summarize(std::vector<double> x) {
  if (x.empty()) throw DomainError("summarize: empty sample");
  std::sort(x.begin(), x.end());
  Summary s;
  s.n = x.size();
  s.min = x.front();
  s.max = x.back();
  s.q1 = quantile_sorted(x, 0.25);
  s.median = quantile_sorted(x, 0.5);
  s.q3 = quantile_sorted(x, 0.75);
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / static_cast<double>(x.size());
  return s;
}

}  // namespace hsbinn
