#pragma once

// Structural conditions (f1)-(f4) on a nonlinearity, decided in closed form
// for the two power families and by dense geometric sampling otherwise.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "annulus/error.hpp"
#include "annulus/nonlinearity.hpp"

namespace annulus {

enum class Verdict { Holds, Fails, ClosedFormProved, Assumed };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Holds: return "holds";
    case Verdict::Fails: return "fails";
    case Verdict::ClosedFormProved: return "closed-form-proved";
    case Verdict::Assumed: return "assumed";
  }
  return "?";
}

struct ConditionResult {
  std::string condition;  // "f1" .. "f4"
  Verdict verdict = Verdict::Holds;
  std::optional<double> witness_s;
  std::string method;  // "closed-form", "sampled", "landmarks", "assumed"
  std::string note;

  bool satisfied() const { return verdict != Verdict::Fails; }
};

struct ConditionReport {
  int n = 0;
  std::vector<ConditionResult> results;

  const ConditionResult& get(const std::string& name) const {
    for (const auto& r : results) {
      if (r.condition == name) return r;
    }
    throw DomainError("no condition named " + name);
  }
};

struct SampleGrid {
  int points_per_decade = 256;
  double s_floor = 1e-6;
  double s_max = 1e3;
  int min_points_per_decade = 16;
  // Sampled inequalities count as violated only beyond this relative slack.
  double slack = 1e-12;
};

namespace detail {

inline void check_grid(const SampleGrid& grid) {
  if (grid.points_per_decade < grid.min_points_per_decade) {
    throw ResolutionError("condition grid has " + std::to_string(grid.points_per_decade) +
                          " points per decade, minimum is " + std::to_string(grid.min_points_per_decade));
  }
  if (!(grid.s_floor > 0.0) || !(grid.s_max > grid.s_floor)) {
    throw DomainError("condition grid needs 0 < s_floor < s_max");
  }
}

// First grid point above `lo` where `margin` goes negative beyond the slack.
template <class Fn>
std::optional<double> first_violation(Fn&& margin, double lo, const SampleGrid& grid) {
  const double start = std::max(lo, grid.s_floor);
  if (!(start < grid.s_max)) return std::nullopt;
  for (double s : geometric_grid(start, grid.s_max, grid.points_per_decade)) {
    if (s <= lo) continue;
    const auto [value, scale] = margin(s);
    if (value < -grid.slack * std::max(1.0, std::fabs(scale))) return s;
  }
  return std::nullopt;
}

// (f3) margin: (F/f)'(s) - (n-2)/(2n), scaled against (F/f)' itself.
inline auto f3_margin(const Nonlinearity& nl, int n) {
  return [&nl, n](double s) {
    const double d = nl.F_over_f_prime(s);
    return std::pair{d - (n - 2.0) / (2.0 * n), d};
  };
}

// (f4) margin: f'(s)(s - B) - f(s).
inline auto f4_margin(const Nonlinearity& nl) {
  const double B = nl.landmarks().B;
  return [&nl, B](double s) {
    const Values v = nl.eval(s);
    return std::pair{v.fprime * (s - B) - v.f, std::fabs(v.f) + std::fabs(v.fprime * (s - B))};
  };
}

inline ConditionResult f3_closed_form(const Nonlinearity& nl, int n, const SampleGrid& grid) {
  const double p = nl.p();
  const double q = nl.q();
  const double need = (n - 2.0) / (2.0 * n);
  ConditionResult r{"f3", Verdict::ClosedFormProved, std::nullopt, "closed-form", ""};
  if (nl.family() == Family::PowerSum) {
    // g = F f'/f² = p/(p+1) + (p-q)/((p+1)(q+1)) h(s^{p-q}+1); (f3) <=> sup g <= (n+2)/(2n).
    const double bound = (n + 2.0) / (2.0 * n);
    if (p <= q + 1.0) {
      // h increases to 0, sup g = p/(p+1) is not attained.
      r.note = "sup g = p/(p+1)";
      if (p / (p + 1.0) > bound) {
        r.verdict = Verdict::Fails;
        r.witness_s = first_violation(f3_margin(nl, n), 0.0, SampleGrid{grid.points_per_decade, grid.s_floor, 1e150});
      }
    } else {
      const double t_star = 2.0 * (p - q) / (p - q - 1.0);
      const double g_max = (p + q + 1.0) * (p + q + 1.0) / (4.0 * (p + 1.0) * (q + 1.0));
      r.note = "sup g = (p+q+1)^2/(4(p+1)(q+1)) attained at t = 2(p-q)/(p-q-1)";
      if (g_max > bound) {
        r.verdict = Verdict::Fails;
        r.witness_s = std::pow(t_star - 1.0, 1.0 / (p - q));
      }
    }
    return r;
  }
  // PowerDiff, t = s^{p-q} > β^{p-q} = (p+1)/(q+1):
  // (F/f)' = 1/(p+1) + (p-q)(p-q-1)/K /(t-1) + (p-q)²/K /(t-1)²,  K = (p+1)(q+1).
  if (p >= q + 1.0) {
    r.note = "inf (F/f)' = 1/(p+1), approached as s -> infinity";
    if (1.0 / (p + 1.0) < need) {
      r.verdict = Verdict::Fails;
      r.witness_s = first_violation(f3_margin(nl, n), nl.landmarks().beta,
                                    SampleGrid{grid.points_per_decade, grid.s_floor, 1e150});
    }
  } else {
    const double minimum = (1.0 / (p + 1.0)) * (1.0 - (q + 1.0 - p) * (q + 1.0 - p) / (4.0 * (q + 1.0)));
    const double t_star = 1.0 + 2.0 * (p - q) / (q + 1.0 - p);
    r.note = "min (F/f)' = (1 - (q+1-p)^2/(4(q+1)))/(p+1)";
    if (minimum < need) {
      r.verdict = Verdict::Fails;
      r.witness_s = std::pow(t_star, 1.0 / (p - q));
    }
  }
  return r;
}

inline ConditionResult f4_closed_form(const Nonlinearity& nl) {
  const double p = nl.p();
  const double q = nl.q();
  ConditionResult r{"f4", Verdict::ClosedFormProved, std::nullopt, "closed-form", ""};
  if (nl.family() == Family::PowerSum) {
    // f'(s)s - f(s) = (p-1)s^p + (q-1)s^q.
    r.note = "f's - f = (p-1)s^p + (q-1)s^q";
    if (q < 1.0 || p < 1.0) {
      r.verdict = Verdict::Fails;
      r.witness_s = p > 1.0 ? 0.5 * std::pow((1.0 - q) / (p - 1.0), 1.0 / (p - q)) : 1.0;
    }
    return r;
  }
  // f'(s)(s-1) - f(s) = s^{q-1} g(s), g(s) = (p-1)s^{p-q+1} - p s^{p-q} - (q-1)s + q.
  // g(1) = g'(1) = 0 and g''(s) = (p-q)s^{p-q-2}((p-1)(p-q+1)s - p(p-q-1)) > 0 on s > 1 iff p > 1.
  r.note = "g(1) = g'(1) = 0, g'' > 0 on (1, inf) when p > 1";
  if (p <= 1.0) {
    r.verdict = Verdict::Fails;
    auto g = [p, q](double s) {
      return (p - 1.0) * std::pow(s, p - q + 1.0) - p * std::pow(s, p - q) - (q - 1.0) * s + q;
    };
    for (double s : geometric_grid(1.0 + 1e-9, 1e150, 64)) {
      if (g(s) < 0.0) {
        r.witness_s = s;
        break;
      }
    }
  }
  return r;
}

}  // namespace detail

// Decides (f1)-(f4) for dimension n. For the power families (f3) and (f4) are
// decided in closed form and cross-checked by sampling; a disagreement beyond
// the grid slack is reported in the note.
inline ConditionReport check_conditions(const Nonlinearity& nl, int n, const SampleGrid& grid = {}) {
  if (n < 2) throw DomainError("dimension n must be >= 2");
  detail::check_grid(grid);
  ConditionReport report;
  report.n = n;

  if (nl.is_power_family()) {
    report.results.push_back({"f1", Verdict::ClosedFormProved, std::nullopt, "closed-form", "q > 0 gives f' in L1(0,1)"});
  } else {
    report.results.push_back({"f1", Verdict::Assumed, std::nullopt, "assumed", "f' in L1(0,1) is not checked for custom f"});
  }

  if (!nl.has_valid_landmarks()) {
    std::string why;
    try {
      nl.landmarks();
    } catch (const StructureError& e) {
      why = e.what();
    }
    report.results.push_back({"f2", Verdict::Fails, std::nullopt, "landmarks", why});
    return report;
  }
  const Landmarks lm = nl.landmarks();
  report.results.push_back({"f2", nl.is_power_family() ? Verdict::ClosedFormProved : Verdict::Holds, std::nullopt,
                            nl.is_power_family() ? "closed-form" : "landmarks",
                            "B = " + detail::shortest(lm.B) + ", beta = " + detail::shortest(lm.beta)});

  const auto f3_sampled = detail::first_violation(detail::f3_margin(nl, n), lm.beta, grid);
  const auto f4_sampled = detail::first_violation(detail::f4_margin(nl), lm.B, grid);

  if (nl.is_power_family()) {
    auto f3 = detail::f3_closed_form(nl, n, grid);
    if (f3.verdict != Verdict::Fails && f3_sampled) {
      f3.note += "; sampling disagrees at s = " + detail::shortest(*f3_sampled);
    }
    report.results.push_back(f3);
    auto f4 = detail::f4_closed_form(nl);
    if (f4.verdict != Verdict::Fails && f4_sampled) {
      f4.note += "; sampling disagrees at s = " + detail::shortest(*f4_sampled);
    }
    report.results.push_back(f4);
    return report;
  }

  if (f3_sampled) {
    report.results.push_back({"f3", Verdict::Fails, f3_sampled, "sampled", ""});
  } else {
    report.results.push_back({"f3", Verdict::Holds, std::nullopt, "sampled", ""});
  }

  if (f4_sampled) {
    report.results.push_back({"f4", Verdict::Fails, f4_sampled, "sampled", ""});
  } else {
    ConditionResult f4{"f4", Verdict::Holds, std::nullopt, "sampled", ""};
    // Second clause of (f4): f(s) ≢ f'(s)(s - B) on [B, β].
    if (lm.beta > lm.B) {
      bool identical = true;
      for (int k = 1; k < 64 && identical; ++k) {
        const double s = lm.B + (lm.beta - lm.B) * k / 64.0;
        const auto [m, scale] = detail::f4_margin(nl)(s);
        identical = std::fabs(m) <= 1e-12 * std::max(1.0, scale);
      }
      if (identical) {
        f4.verdict = Verdict::Fails;
        f4.note = "f(s) = f'(s)(s-B) identically on [B, beta]";
      }
    }
    report.results.push_back(f4);
  }
  return report;
}

}  // namespace annulus
