#pragma once

// Closed-form uniqueness regions in the (q, p) exponent plane for
// f(s) = s^p + s^q ("plus") and f(s) = s^p - s^q ("minus").

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "annulus/error.hpp"
#include "annulus/nonlinearity.hpp"

namespace annulus::regions {

enum class RegionFamily { Plus, Minus };

inline const char* to_string(RegionFamily f) { return f == RegionFamily::Plus ? "plus" : "minus"; }

inline RegionFamily parse_family(const std::string& s) {
  if (s == "plus") return RegionFamily::Plus;
  if (s == "minus") return RegionFamily::Minus;
  throw DomainError("family must be 'plus' or 'minus', got '" + s + "'");
}

// (n+2)/(n-2), infinite for n = 2.
inline double critical_exponent(int n) {
  if (n < 2) throw DomainError("dimension n must be >= 2");
  return n == 2 ? std::numeric_limits<double>::infinity() : (n + 2.0) / (n - 2.0);
}

// 4/(n-2): where P(q) peaks.
inline double q_turn(int n) {
  if (n <= 2) throw DomainError("q_turn needs n > 2");
  return 4.0 / (n - 2.0);
}

inline double q_cap(int n) {
  if (n <= 2) throw DomainError("q_cap needs n > 2");
  return (4.0 + std::sqrt(2.0 * n * (n + 2.0))) / (2.0 * (n - 2.0));
}

namespace detail {

inline double radicand(int n, double q) {
  if (n <= 2) throw DomainError("P(q) needs n > 2");
  if (!(q > 0.0)) throw DomainError("P(q) needs q > 0");
  const double rad = (n + 2.0) * (q + 1.0) * (n + 2.0 - (n - 2.0) * q);
  if (!(rad > 0.0)) {
    throw DomainError("radicand of P(q) is not positive: q = " + annulus::detail::shortest(q) +
                      " must stay below (n+2)/(n-2) = " + annulus::detail::shortest(critical_exponent(n)));
  }
  return rad;
}

}  // namespace detail

inline double P_upper(int n, double q) { return (2.0 * (q + 1.0) + std::sqrt(detail::radicand(n, q))) / n; }
inline double P_lower(int n, double q) { return (2.0 * (q + 1.0) - std::sqrt(detail::radicand(n, q))) / n; }

struct BoundaryValues {
  std::optional<double> P_of_q;
  std::optional<double> P_minus_of_q;
  double critical_exponent = 0.0;
  std::optional<double> q_cap;
};

struct RegionVerdict {
  RegionFamily family = RegionFamily::Plus;
  int n = 0;
  double p = 0.0;
  double q = 0.0;
  std::optional<std::string> condition;  // "(i)" .. "(iv)"; empty when outside all
  bool finite_b_applies = true;          // minus family: the bounded case also needs p > 1
  BoundaryValues boundary;

  bool unique() const { return condition.has_value(); }
  std::string verdict() const { return unique() ? "UniqueByCondition" + *condition : "OutsideAllConditions"; }
};

namespace detail {

inline BoundaryValues boundary_values(int n, double q) {
  BoundaryValues b;
  b.critical_exponent = critical_exponent(n);
  if (n > 2) {
    b.q_cap = q_cap(n);
    if (q > 0.0 && q < b.critical_exponent) {
      b.P_of_q = P_upper(n, q);
      b.P_minus_of_q = P_lower(n, q);
    }
  }
  return b;
}

inline void check_exponents(int n, double p, double q) {
  if (n < 2) throw DomainError("dimension n must be >= 2");
  if (!(q > 0.0)) throw DomainError("exponent q must be > 0");
  if (!(p > q)) throw DomainError("exponents need p > q");
}

}  // namespace detail

// Conditions are tried in order (i), (ii), ...; the first match is reported.
// Bounds written with "<=" include equality.
inline RegionVerdict classify_plus(int n, double p, double q) {
  detail::check_exponents(n, p, q);
  RegionVerdict v{RegionFamily::Plus, n, p, q, std::nullopt, true, detail::boundary_values(n, q)};
  const double crit = v.boundary.critical_exponent;
  if (n >= 6 && q >= 1.0 && p <= crit) {
    v.condition = "(i)";
  } else if (n > 2 && n < 6 && q >= q_turn(n) && p <= crit) {
    v.condition = "(ii)";
  } else if (n > 2 && n < 6 && q < q_turn(n) && p <= *v.boundary.P_of_q) {
    v.condition = "(iii)";
  } else if (n == 2 && p <= q + 1.0 + 2.0 * std::sqrt(q + 1.0)) {
    v.condition = "(iv)";
  }
  return v;
}

inline RegionVerdict classify_minus(int n, double p, double q) {
  detail::check_exponents(n, p, q);
  RegionVerdict v{RegionFamily::Minus, n, p, q, std::nullopt, false, detail::boundary_values(n, q)};
  if (n > 2 && q <= q_turn(n) && p <= v.boundary.critical_exponent) {
    v.condition = "(i)";
  } else if (n > 2 && q > q_turn(n) && q < q_cap(n) && p <= *v.boundary.P_of_q) {
    v.condition = "(ii)";
  } else if (n == 2) {
    v.condition = "(iii)";
  }
  v.finite_b_applies = v.unique() && p > 1.0;
  return v;
}

inline RegionVerdict classify(RegionFamily family, int n, double p, double q) {
  return family == RegionFamily::Plus ? classify_plus(n, p, q) : classify_minus(n, p, q);
}

// ---------------------------------------------------------------------------
// Boundary curves.

struct CurveRow {
  double q;
  double P;
  double P_minus;
  double critical;
};

struct RegionCurve {
  int n = 0;
  RegionFamily family = RegionFamily::Plus;
  std::vector<CurveRow> rows;
  double argmax_q = 0.0;            // grid point where P is largest
  double max_P = 0.0;
  std::optional<double> infimum_below_turn;  // min of P over grid points with q < 4/(n-2)
  bool increasing_below_turn = true;
  bool decreasing_above_turn = true;
};

inline RegionCurve region_curve(int n, RegionFamily family, const std::vector<double>& q_grid) {
  if (n <= 2) throw DomainError("boundary curves need n > 2");
  if (q_grid.empty()) throw DomainError("empty q grid");
  RegionCurve c;
  c.n = n;
  c.family = family;
  const double crit = critical_exponent(n), turn = q_turn(n);
  for (double q : q_grid) c.rows.push_back({q, P_upper(n, q), P_lower(n, q), crit});
  c.argmax_q = c.rows.front().q;
  c.max_P = c.rows.front().P;
  for (std::size_t k = 0; k < c.rows.size(); ++k) {
    const auto& r = c.rows[k];
    if (r.P > c.max_P) {
      c.max_P = r.P;
      c.argmax_q = r.q;
    }
    if (r.q < turn) c.infimum_below_turn = std::min(c.infimum_below_turn.value_or(r.P), r.P);
    if (k == 0) continue;
    const auto& prev = c.rows[k - 1];
    if (r.q <= turn && r.P <= prev.P) c.increasing_below_turn = false;
    if (prev.q >= turn && r.P >= prev.P) c.decreasing_above_turn = false;
  }
  return c;
}

inline std::vector<double> linear_grid(double lo, double hi, int steps) {
  if (steps < 1 || !(hi > lo)) throw DomainError("q grid needs q-min < q-max and steps >= 1");
  std::vector<double> g;
  for (int k = 0; k <= steps; ++k) g.push_back(lo + (hi - lo) * k / steps);
  return g;
}

}  // namespace annulus::regions
