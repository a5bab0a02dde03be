#pragma once

// Dormand-Prince 5(4) for two-component autonomous-in-form systems
// y' = F(r, y), with the 4th-order continuous extension retained per step so
// that trajectories can be evaluated anywhere after integration.

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <utility>

namespace annulus::dopri5 {

using State = std::array<double, 2>;

// Continuous extension over [r0, r0 + h]:
//   y(θ) = c1 + θ (c2 + (1-θ)(c3 + θ (c4 + (1-θ) c5))),  θ = (r - r0)/h.
// With c5 = 0 this is the cubic Hermite interpolant.
struct Segment {
  double r0 = 0.0;
  double h = 0.0;
  std::array<State, 5> c{};

  double r1() const { return r0 + h; }

  State at(double r) const {
    const double t = (r - r0) / h;
    const double t1 = 1.0 - t;
    State y;
    for (int i = 0; i < 2; ++i) {
      y[i] = c[0][i] + t * (c[1][i] + t1 * (c[2][i] + t * (c[3][i] + t1 * c[4][i])));
    }
    return y;
  }

  static Segment hermite(double r0, double h, const State& y0, const State& y1, const State& k0, const State& k1) {
    Segment s;
    s.r0 = r0;
    s.h = h;
    for (int i = 0; i < 2; ++i) {
      const double diff = y1[i] - y0[i];
      const double bspl = h * k0[i] - diff;
      s.c[0][i] = y0[i];
      s.c[1][i] = diff;
      s.c[2][i] = bspl;
      s.c[3][i] = diff - h * k1[i] - bspl;
      s.c[4][i] = 0.0;
    }
    return s;
  }
};

struct Tableau {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                          d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                          d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
};

struct StepResult {
  State y1;
  State k7;      // derivative at the new point (FSAL)
  double error;  // scaled RMS error estimate; accept when <= 1
  Segment segment;
};

// One trial step from (r, y) with derivative k1 = F(r, y).
template <class Rhs>
StepResult attempt(Rhs&& rhs, double r, const State& y, const State& k1, double h, double rtol, double atol) {
  using T = Tableau;
  auto comb = [&](std::initializer_list<std::pair<double, const State*>> terms) {
    State out = y;
    for (auto [w, k] : terms) {
      out[0] += h * w * (*k)[0];
      out[1] += h * w * (*k)[1];
    }
    return out;
  };
  const State k2 = rhs(r + T::c2 * h, comb({{T::a21, &k1}}));
  const State k3 = rhs(r + T::c3 * h, comb({{T::a31, &k1}, {T::a32, &k2}}));
  const State k4 = rhs(r + T::c4 * h, comb({{T::a41, &k1}, {T::a42, &k2}, {T::a43, &k3}}));
  const State k5 = rhs(r + T::c5 * h, comb({{T::a51, &k1}, {T::a52, &k2}, {T::a53, &k3}, {T::a54, &k4}}));
  const State k6 =
      rhs(r + h, comb({{T::a61, &k1}, {T::a62, &k2}, {T::a63, &k3}, {T::a64, &k4}, {T::a65, &k5}}));
  const State y1 = comb({{T::a71, &k1}, {T::a73, &k3}, {T::a74, &k4}, {T::a75, &k5}, {T::a76, &k6}});
  const State k7 = rhs(r + h, y1);

  double err2 = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double e = h * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] + T::e6 * k6[i] +
                          T::e7 * k7[i]);
    const double sc = atol + rtol * std::max(std::fabs(y[i]), std::fabs(y1[i]));
    err2 += (e / sc) * (e / sc);
  }

  StepResult out;
  out.y1 = y1;
  out.k7 = k7;
  out.error = std::sqrt(err2 / 2.0);
  if (!std::isfinite(out.error)) out.error = std::numeric_limits<double>::infinity();

  Segment& s = out.segment;
  s.r0 = r;
  s.h = h;
  for (int i = 0; i < 2; ++i) {
    const double diff = y1[i] - y[i];
    const double bspl = h * k1[i] - diff;
    s.c[0][i] = y[i];
    s.c[1][i] = diff;
    s.c[2][i] = bspl;
    s.c[3][i] = diff - h * k7[i] - bspl;
    s.c[4][i] = h * (T::d1 * k1[i] + T::d3 * k3[i] + T::d4 * k4[i] + T::d5 * k5[i] + T::d6 * k6[i] +
                     T::d7 * k7[i]);
  }
  return out;
}

// Standard step-size update with safety factor 0.9 and growth limits.
inline double next_step(double h, double error) {
  constexpr double safety = 0.9, fac_min = 0.2, fac_max = 5.0;
  if (error == 0.0) return h * fac_max;
  const double fac = safety * std::pow(error, -0.2);
  return h * std::clamp(fac, fac_min, fac_max);
}

}  // namespace annulus::dopri5
