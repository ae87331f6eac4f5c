// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>

namespace hsbinn {

/// Forward-mode dual number carrying N tangent directions.
///
/// Only the operations needed by the cell model are provided. Comparisons
/// look at the primal value so branchy code (series cut-offs) works unchanged.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit from constants
  Dual(double value, int seed) : v(value) { d[seed] = 1.0; }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (int i = 0; i < N; ++i) d[i] = (d[i] - q * o.d[i]) * inv;
    v = q;
    return *this;
  }
};

template <int N>
Dual<N> operator-(Dual<N> a) {
  a.v = -a.v;
  for (auto& x : a.d) x = -x;
  return a;
}
template <int N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N>
Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <int N>
Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }

template <int N>
Dual<N> operator+(Dual<N> a, double b) { a.v += b; return a; }
template <int N>
Dual<N> operator+(double a, Dual<N> b) { b.v += a; return b; }
template <int N>
Dual<N> operator-(Dual<N> a, double b) { a.v -= b; return a; }
template <int N>
Dual<N> operator-(double a, const Dual<N>& b) { return -b + a; }
template <int N>
Dual<N> operator*(Dual<N> a, double b) {
  a.v *= b;
  for (auto& x : a.d) x *= b;
  return a;
}
template <int N>
Dual<N> operator*(double a, Dual<N> b) { return b * a; }
template <int N>
Dual<N> operator/(Dual<N> a, double b) { return a * (1.0 / b); }
template <int N>
Dual<N> operator/(double a, const Dual<N>& b) { return Dual<N>(a) / b; }

template <int N>
bool operator<(const Dual<N>& a, double b) { return a.v < b; }
template <int N>
bool operator>(const Dual<N>& a, double b) { return a.v > b; }

namespace detail {
template <int N>
Dual<N> chain(const Dual<N>& a, double value, double slope) {
  Dual<N> r(value);
  for (int i = 0; i < N; ++i) r.d[i] = slope * a.d[i];
  return r;
}
}  // namespace detail

template <int N>
Dual<N> exp(const Dual<N>& a) {
  const double e = std::exp(a.v);
  return detail::chain(a, e, e);
}
template <int N>
Dual<N> expm1(const Dual<N>& a) {
  return detail::chain(a, std::expm1(a.v), std::exp(a.v));
}
template <int N>
Dual<N> tanh(const Dual<N>& a) {
  const double t = std::tanh(a.v);
  return detail::chain(a, t, 1.0 - t * t);
}
template <int N>
Dual<N> abs(const Dual<N>& a) {
  return a.v < 0 ? -a : a;
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) { return x.v; }

}  // namespace hsbinn
