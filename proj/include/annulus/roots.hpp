#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>

#include <boost/math/tools/toms748_solve.hpp>

#include "annulus/error.hpp"

namespace annulus::roots {

struct Bracket {
  double lo;
  double hi;
  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

// Bracketed root of a continuous scalar function. `flo` and `fhi` are the
// already-known end values and must have opposite signs (or one is zero).
// Uses TOMS 748 (bisection safeguarded inverse cubic/quadratic steps).
template <class Fn>
Bracket refine(Fn&& fn, double lo, double hi, double flo, double fhi, double abs_tol,
               std::uintmax_t max_iter = 200) {
  if (flo == 0.0) return {lo, lo};
  if (fhi == 0.0) return {hi, hi};
  if (std::signbit(flo) == std::signbit(fhi)) {
    throw BracketError("root bracket endpoints have the same sign");
  }
  auto stop = [abs_tol](double a, double b) { return std::fabs(b - a) <= abs_tol; };
  auto [a, b] = boost::math::tools::toms748_solve(fn, lo, hi, flo, fhi, stop, max_iter);
  return {a, b};
}

template <class Fn>
double find_root(Fn&& fn, double lo, double hi, double abs_tol) {
  return refine(fn, lo, hi, fn(lo), fn(hi), abs_tol).mid();
}

// Plain bisection on a predicate that is false at `lo` and true at `hi`.
// Returns the final bracket; the invariant pred(lo)=false, pred(hi)=true holds
// on every iteration.
template <class Pred>
Bracket bisect_predicate(Pred&& pred, double lo, double hi, double abs_tol, int max_iter = 200) {
  for (int i = 0; i < max_iter && hi - lo > abs_tol; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid)) hi = mid; else lo = mid;
  }
  return {lo, hi};
}

}  // namespace annulus::roots
