#pragma once

// Reference computations that share no code with the library: fixed-step
// classical RK4, composite Gauss-Legendre quadrature, plain bisection and
// closed forms.

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <random>

namespace oracle {

using Fn = std::function<double(double)>;

inline constexpr double pi = std::numbers::pi;

// u(r) = sin(π(r-1))/r solves u'' + (2/r)u' + π²u = 0 with u(1) = 0, u'(1) = π.
inline double linear_u(double r) { return std::sin(pi * (r - 1.0)) / r; }
inline double linear_v(double r) { return pi * std::cos(pi * (r - 1.0)) / r - std::sin(pi * (r - 1.0)) / (r * r); }

inline double gauss_legendre(const Fn& g, double lo, double hi, int panels = 64) {
  static constexpr std::array<double, 5> x{0.0, 0.5384693101056831, -0.5384693101056831, 0.9061798459386640,
                                           -0.9061798459386640};
  static constexpr std::array<double, 5> w{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                           0.2369268850561891, 0.2369268850561891};
  const double h = (hi - lo) / panels;
  double sum = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double m = lo + (k + 0.5) * h;
    for (int j = 0; j < 5; ++j) sum += w[j] * g(m + 0.5 * h * x[j]);
  }
  return 0.5 * h * sum;
}

// Root of g on [lo, hi] by bisection; g(lo) and g(hi) must differ in sign.
inline double bisect(const Fn& g, double lo, double hi, double tol = 1e-14) {
  double glo = g(lo);
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double gm = g(mid);
    if ((gm < 0.0) == (glo < 0.0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct Radial {
  int n;
  Fn f;  // defined for all real u (odd continuation is the caller's choice)

  std::array<double, 2> rhs(double r, const std::array<double, 2>& y) const {
    return {y[1], -(n - 1.0) * y[1] / r - f(y[0])};
  }

  std::array<double, 2> step(double r, const std::array<double, 2>& y, double h) const {
    auto add = [](const std::array<double, 2>& a, const std::array<double, 2>& k, double c) {
      return std::array<double, 2>{a[0] + c * k[0], a[1] + c * k[1]};
    };
    const auto k1 = rhs(r, y);
    const auto k2 = rhs(r + 0.5 * h, add(y, k1, 0.5 * h));
    const auto k3 = rhs(r + 0.5 * h, add(y, k2, 0.5 * h));
    const auto k4 = rhs(r + h, add(y, k3, h));
    return {y[0] + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])};
  }

  // (u, u') at r_end from u(a) = 0, u'(a) = alpha.
  std::array<double, 2> shoot(double a, double alpha, double r_end, double h) const {
    std::array<double, 2> y{0.0, alpha};
    const int steps = static_cast<int>(std::ceil((r_end - a) / h));
    const double dh = (r_end - a) / steps;
    for (int k = 0; k < steps; ++k) y = step(a + k * dh, y, dh);
    return y;
  }

  // First r > a with u(r) = 0, polished by bisection on a single RK4 substep.
  std::optional<double> first_zero(double a, double alpha, double r_max, double h) const {
    std::array<double, 2> y{0.0, alpha};
    double r = a;
    while (r < r_max) {
      const auto y1 = step(r, y, h);
      if (y1[0] <= 0.0 && r > a) {
        const auto yr = y;
        const double r0 = r;
        return bisect([&](double d) { return d == 0.0 ? yr[0] : step(r0, yr, d)[0]; }, 0.0, h) + r0;
      }
      y = y1;
      r += h;
    }
    return std::nullopt;
  }

  // +1 when the trajectory crosses zero, -1 when u' turns positive with
  // 0 < u < B after the peak, 0 when undecided by r_max.
  int crossing_or_bouncing(double a, double alpha, double B, double r_max, double h) const {
    std::array<double, 2> y{0.0, alpha};
    double r = a;
    bool descending = false;
    while (r < r_max) {
      y = step(r, y, h);
      r += h;
      if (y[0] <= 0.0) return +1;
      if (y[1] < 0.0) descending = true;
      if (descending && y[1] > 0.0 && y[0] < B) return -1;
    }
    return 0;
  }
};

// Deterministic generator used by the property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

 private:
  std::mt19937_64 rng_;
};

}  // namespace oracle
