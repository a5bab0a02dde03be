#pragma once

// Inverse branches r(s), r̄(s) of a single-peaked profile and the comparison
// functionals built on them:
//   V(s)  = r^{2(n-1)} (u'² + 2F(s))
//   P(s)  = -2n (F/f)(s) r^{n-1} u' - r^n u'² - 2 r^n F(s)      (rising branch)
//   P̄(s) = the same expression on the falling branch
//   W(s)  = r̄ sqrt(u'² + 2F(s))
// with u' evaluated at r(s) (resp. r̄(s)), so that 1/r'(s) = u'(r(s)).

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "annulus/error.hpp"
#include "annulus/nonlinearity.hpp"
#include "annulus/radial_ode.hpp"
#include "annulus/roots.hpp"

namespace annulus {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kGuardBand = 1e-6;  // |s - B| excluded from P when f(B) = 0

// One monotone piece of a profile, viewed as a function of s = u.
class Branch {
 public:
  Branch() = default;
  Branch(std::shared_ptr<const SolutionProfile> prof, std::vector<double> s, std::vector<double> r, bool rising)
      : prof_(std::move(prof)), s_(std::move(s)), r_(std::move(r)), rising_(rising) {}

  bool rising() const { return rising_; }
  double s_min() const { return s_.front(); }
  double s_max() const { return s_.back(); }
  bool covers(double s) const { return s >= s_min() && s <= s_max(); }
  std::size_t size() const { return s_.size(); }

  // Radius where u = s on this branch, found as a root of u(r) - s on the
  // continuous extension between the two bracketing nodes.
  double r(double s) const {
    // Absorb rounding at the ends of the support.
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, s_max());
    if (s > s_max() && s <= s_max() + slack) s = s_max();
    if (s < s_min() && s >= s_min() - slack) s = s_min();
    if (!covers(s)) {
      throw DomainError("s = " + detail::shortest(s) + " outside branch support [" + detail::shortest(s_min()) +
                        ", " + detail::shortest(s_max()) + "]");
    }
    auto it = std::lower_bound(s_.begin(), s_.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - s_.begin());
    if (it != s_.end() && *it == s) return r_[k];
    const double r0 = r_[k - 1], r1 = r_[k];
    auto g = [&](double rr) { return prof_->u(rr) - s; };
    const double g0 = g(r0), g1 = g(r1);
    if (g0 == 0.0) return r0;
    if (g1 == 0.0) return r1;
    if (std::signbit(g0) == std::signbit(g1)) return std::fabs(g0) < std::fabs(g1) ? r0 : r1;
    const double lo = std::min(r0, r1), hi = std::max(r0, r1);
    const double glo = r0 < r1 ? g0 : g1, ghi = r0 < r1 ? g1 : g0;
    return roots::refine(g, lo, hi, glo, ghi, 4.0 * std::numeric_limits<double>::epsilon() * hi).mid();
  }

  // u'(r(s)) = 1/r'(s).
  double uprime(double s) const { return prof_->v(r(s)); }

 private:
  std::shared_ptr<const SolutionProfile> prof_;
  std::vector<double> s_;  // ascending
  std::vector<double> r_;
  bool rising_ = true;
};

struct BranchPair {
  std::shared_ptr<const SolutionProfile> profile;
  Branch rising;
  Branch falling;
  double M = 0.0;
  double c = 0.0;
  double a = 0.0;
};

inline BranchPair invert_branches(const SolutionProfile& profile) {
  const auto pk = profile.peak();
  if (!pk) throw DataError("profile has no peak; branches need u' to change sign once");
  auto prof = std::make_shared<const SolutionProfile>(profile);
  const double M = pk->M, c = pk->c;
  const double tol = 1e-9 * std::max(1.0, M);

  std::vector<double> rs, rr;
  for (const Node& nd : prof->nodes) {
    if (nd.r >= c) break;
    if (!rs.empty() && nd.u <= rs.back()) {
      if (nd.u < rs.back() - tol) throw DataError("u is not increasing on the rising branch at r = " + detail::shortest(nd.r));
      continue;
    }
    if (nd.u >= M) break;
    rs.push_back(nd.u);
    rr.push_back(nd.r);
  }
  rs.push_back(M);
  rr.push_back(c);

  std::vector<double> fs{M}, fr{c};
  for (const Node& nd : prof->nodes) {
    if (nd.r <= c) continue;
    if (nd.u >= fs.back()) {
      if (nd.u > fs.back() + tol) break;  // turned up after a bounce
      continue;
    }
    if (nd.u <= 0.0) {
      if (auto z = prof->first_zero()) {
        fs.push_back(0.0);
        fr.push_back(*z);
      }
      break;
    }
    fs.push_back(nd.u);
    fr.push_back(nd.r);
  }
  if (const auto z = prof->first_zero(); z && fs.back() > 0.0) {
    if (*z > fr.back()) {
      fs.push_back(0.0);
      fr.push_back(*z);
    } else {
      fs.back() = 0.0;
      fr.back() = *z;
    }
  }
  std::reverse(fs.begin(), fs.end());
  std::reverse(fr.begin(), fr.end());

  BranchPair bp;
  bp.profile = prof;
  bp.rising = Branch(prof, std::move(rs), std::move(rr), true);
  bp.falling = Branch(prof, std::move(fs), std::move(fr), false);
  bp.M = M;
  bp.c = c;
  bp.a = prof->problem.a;
  return bp;
}

// ---------------------------------------------------------------------------
// Point evaluations.

namespace fn {

inline bool in_guard_band(const Nonlinearity& nl, double s) {
  const double B = nl.landmarks().B;
  return B > 0.0 && std::fabs(s - B) < kGuardBand;
}

inline double V(const Branch& br, const Nonlinearity& nl, int n, double s) {
  const double r = br.r(s), up = br.uprime(s);
  return std::pow(r, 2.0 * (n - 1)) * (up * up + 2.0 * nl.F(s));
}

// P on either branch; at the peak value it is continued by its limit.
inline double P(const Branch& br, const Nonlinearity& nl, int n, double s) {
  const double r = br.r(s);
  if (s == br.s_max()) return -2.0 * std::pow(r, n) * nl.F(s);
  const double up = br.uprime(s);
  return -2.0 * n * nl.F_over_f(s) * std::pow(r, n - 1) * up - std::pow(r, n) * up * up - 2.0 * std::pow(r, n) * nl.F(s);
}

inline double W(const Branch& br, const Nonlinearity& nl, double s) {
  const double up = br.uprime(s);
  return br.r(s) * std::sqrt(std::max(0.0, up * up + 2.0 * nl.F(s)));
}

// r^{n-1}/r'(s) = r^{n-1} u'.
inline double flux(const Branch& br, int n, double s) { return std::pow(br.r(s), n - 1) * br.uprime(s); }

inline double V_prime(const Branch& br, const Nonlinearity& nl, int n, double s) {
  return 4.0 * (n - 1) * std::pow(br.r(s), 2 * n - 3) / br.uprime(s) * nl.F(s);
}

inline double P_prime(const Branch& br, const Nonlinearity& nl, int n, double s) {
  return (n - 2.0 - 2.0 * n * nl.F_over_f_prime(s)) * flux(br, n, s);
}

// Richardson-extrapolated central difference.
template <class Fn>
double derivative(Fn&& g, double s, double d) {
  auto central = [&](double h) { return (g(s + h) - g(s - h)) / (2.0 * h); };
  return (4.0 * central(0.5 * d) - central(d)) / 3.0;
}

// P on the rising branch extrapolated to s = M from below in t = sqrt(M - s),
// in which P is smooth (u'(r(s)) vanishes like t).
inline double P_limit_extrapolated(const Branch& br, const Nonlinearity& nl, int n, int levels = 6) {
  const double M = br.s_max();
  const double t0 = std::sqrt(0.05 * (M - br.s_min()));
  std::vector<double> t(levels), tab(levels);
  for (int k = 0; k < levels; ++k) {
    t[k] = t0 * std::pow(0.5, k);
    tab[k] = P(br, nl, n, M - t[k] * t[k]);
  }
  // Neville's scheme evaluated at t = 0.
  for (int m = 1; m < levels; ++m) {
    for (int k = levels - 1; k >= m; --k) {
      tab[k] = (t[k - m] * tab[k] - t[k] * tab[k - 1]) / (t[k - m] - t[k]);
    }
  }
  return tab.back();
}

}  // namespace fn

// ---------------------------------------------------------------------------
// Traces.

struct FunctionalTrace {
  std::vector<double> s;  // decreasing from M
  std::vector<double> V, P, Pbar, W;
  std::vector<double> V_prime_formula, P_prime_formula;
  std::vector<double> V_fd, P_fd;
  double P_limit = 0.0;  // -2 c^n F(M)
  bool truncated = false;
  bool guard_band_excluded = false;
  std::string note;
};

inline FunctionalTrace eval_functionals(const BranchPair& br, const Nonlinearity& nl, int n, int points = 401) {
  if (points < 3) throw DomainError("functional trace needs at least 3 points");
  if (n < 2) throw DomainError("dimension n must be >= 2");
  FunctionalTrace tr;
  const double M = br.M;
  const double d = 1e-3 * M;
  tr.P_limit = -2.0 * std::pow(br.c, n) * nl.F(M);
  for (int k = 0; k < points; ++k) {
    const double s = M * (1.0 - static_cast<double>(k) / (points - 1));
    tr.s.push_back(s);
    const bool guard = fn::in_guard_band(nl, s);
    tr.guard_band_excluded |= guard;

    tr.V.push_back(fn::V(br.rising, nl, n, s));
    tr.P.push_back(guard ? kNaN : fn::P(br.rising, nl, n, s));
    const bool on_fall = br.falling.covers(s);
    if (!on_fall) tr.truncated = true;
    tr.Pbar.push_back(on_fall && !guard ? fn::P(br.falling, nl, n, s) : kNaN);
    tr.W.push_back(on_fall ? fn::W(br.falling, nl, s) : kNaN);

    const bool interior = s - d > 0.0 && s + d < M;
    tr.V_prime_formula.push_back(interior ? fn::V_prime(br.rising, nl, n, s) : kNaN);
    tr.P_prime_formula.push_back(interior && !guard ? fn::P_prime(br.rising, nl, n, s) : kNaN);
    const bool fd_ok = interior && !(nl.landmarks().B > 0.0 && std::fabs(s - nl.landmarks().B) < d + kGuardBand);
    tr.V_fd.push_back(interior ? fn::derivative([&](double x) { return fn::V(br.rising, nl, n, x); }, s, d) : kNaN);
    tr.P_fd.push_back(fd_ok ? fn::derivative([&](double x) { return fn::P(br.rising, nl, n, x); }, s, d) : kNaN);
  }
  if (tr.guard_band_excluded) tr.note = "P and Pbar omitted within 1e-6 of B where f vanishes";
  if (tr.truncated) {
    tr.note += std::string(tr.note.empty() ? "" : "; ") + "falling branch ends at s = " +
               detail::shortest(br.falling.s_min());
  }
  return tr;
}

struct DerivativeReport {
  double lo = 0.0;
  double hi = 0.0;
  int points = 0;
  double max_rel_V = 0.0;  // max |fd - formula| over max |formula| on the window
  double max_rel_P = 0.0;
  std::optional<double> max_rel_Pbar;  // when the falling branch covers the window
  double max_P_prime_above_beta = -kInfinity;     // expected <= 0 under (f3)
  double min_Pbar_prime_above_beta = kInfinity;   // expected >= 0 under (f3)
};

// Default interior window [0.1 M, 0.9 M], shifted above B when f(B) = 0.
inline std::pair<double, double> default_window(const BranchPair& br, const Nonlinearity& nl) {
  const double B = nl.landmarks().B;
  double lo = 0.1 * br.M;
  if (B > 0.0) lo = std::max(lo, B + 0.05 * (br.M - B));
  return {lo, 0.9 * br.M};
}

inline DerivativeReport derivative_identity_check(const BranchPair& br, const Nonlinearity& nl, int n,
                                                  std::optional<std::pair<double, double>> window = std::nullopt,
                                                  int points = 64) {
  const auto [lo, hi] = window.value_or(default_window(br, nl));
  const double M = br.M;
  const double d = 1e-3 * M;
  if (!(lo > d) || !(hi < M - d) || !(lo < hi)) {
    throw WindowError("window [" + detail::shortest(lo) + ", " + detail::shortest(hi) +
                      "] must lie strictly inside (0, M) with M = " + detail::shortest(M));
  }
  const double B = nl.landmarks().B;
  if (B > 0.0 && lo - d - kGuardBand < B && B < hi + d + kGuardBand) {
    throw WindowError("window [" + detail::shortest(lo) + ", " + detail::shortest(hi) + "] touches s = B = " +
                      detail::shortest(B) + " where F/f is singular");
  }
  if (points < 2) throw DomainError("derivative check needs at least 2 points");

  DerivativeReport rep;
  rep.lo = lo;
  rep.hi = hi;
  rep.points = points;
  const double beta = nl.landmarks().beta;
  const bool fall = br.falling.covers(lo - d) && br.falling.covers(hi + d);
  double devV = 0, devP = 0, devPb = 0, normV = 0, normP = 0, normPb = 0;
  for (int k = 0; k < points; ++k) {
    const double s = lo + (hi - lo) * k / (points - 1);
    const double fV = fn::V_prime(br.rising, nl, n, s);
    const double fP = fn::P_prime(br.rising, nl, n, s);
    devV = std::max(devV, std::fabs(fn::derivative([&](double x) { return fn::V(br.rising, nl, n, x); }, s, d) - fV));
    devP = std::max(devP, std::fabs(fn::derivative([&](double x) { return fn::P(br.rising, nl, n, x); }, s, d) - fP));
    normV = std::max(normV, std::fabs(fV));
    normP = std::max(normP, std::fabs(fP));
    if (s > beta) rep.max_P_prime_above_beta = std::max(rep.max_P_prime_above_beta, fP);
    if (fall) {
      const double fPb = fn::P_prime(br.falling, nl, n, s);
      devPb = std::max(devPb,
                       std::fabs(fn::derivative([&](double x) { return fn::P(br.falling, nl, n, x); }, s, d) - fPb));
      normPb = std::max(normPb, std::fabs(fPb));
      if (s > beta) rep.min_Pbar_prime_above_beta = std::min(rep.min_Pbar_prime_above_beta, fPb);
    }
  }
  rep.max_rel_V = normV > 0 ? devV / normV : devV;
  rep.max_rel_P = normP > 0 ? devP / normP : devP;
  if (fall) rep.max_rel_Pbar = normPb > 0 ? devPb / normPb : devPb;
  return rep;
}

// ---------------------------------------------------------------------------
// Pairwise comparison of two trajectories with α₁ < α₂.

enum class CompareMode { Finite, Exterior };

enum class StepStatus { Holds, Fails, TriviallyTrue, Vacuous, PremiseNotMet, NotApplicable };

inline const char* to_string(StepStatus s) {
  switch (s) {
    case StepStatus::Holds: return "holds";
    case StepStatus::Fails: return "fails";
    case StepStatus::TriviallyTrue: return "trivially-true";
    case StepStatus::Vacuous: return "vacuous";
    case StepStatus::PremiseNotMet: return "premise-not-met";
    case StepStatus::NotApplicable: return "not-applicable";
  }
  return "?";
}

// One inequality, with margin > 0 meaning it holds.
struct Inequality {
  std::string label;
  bool holds = true;
  double margin = kInfinity;
  std::optional<double> witness_s;
  int samples = 0;
};

struct StepCheck {
  std::string step;
  StepStatus status = StepStatus::NotApplicable;
  std::vector<Inequality> checks;
  std::string note;

  // Status from the checks: holds when all do, fails otherwise.
  void settle() {
    status = std::all_of(checks.begin(), checks.end(), [](const Inequality& q) { return q.holds; }) ? StepStatus::Holds
                                                                                                    : StepStatus::Fails;
  }
};

struct PairReport {
  CompareMode mode = CompareMode::Finite;
  std::string premise_class;
  double alpha1 = 0, alpha2 = 0;
  double M1 = 0, M2 = 0, c1 = 0, c2 = 0;
  StepCheck step1{"step1"}, step2{"step2"}, step3{"step3"}, step4{"step4"}, step5{"step5"}, step6{"step6"};
  std::optional<StepCheck> exterior;
  std::vector<double> intersections;  // r̄₁ = r̄₂, descending in s
  std::optional<double> s_I;
  std::vector<double> J_s, J;

  std::vector<const StepCheck*> steps() const {
    std::vector<const StepCheck*> out{&step1, &step2, &step3, &step4, &step5, &step6};
    if (exterior) out.push_back(&*exterior);
    return out;
  }
};

namespace detail {

// margin(s) > 0 on the open interval (lo, hi) sampled at `count` points.
template <class Margin>
Inequality on_grid(std::string label, double lo, double hi, int count, Margin&& margin, bool include_hi = false) {
  Inequality q{std::move(label)};
  for (int k = 1; k <= count; ++k) {
    const double s = include_hi ? (k == count ? hi : lo + (hi - lo) * k / count) : lo + (hi - lo) * k / (count + 1);
    const double m = margin(s);
    ++q.samples;
    if (m < q.margin) {
      q.margin = m;
      q.witness_s = s;
    }
  }
  q.holds = q.samples > 0 && q.margin > 0.0;
  return q;
}

inline Inequality at_point(std::string label, double s, double margin) {
  return {std::move(label), margin > 0.0, margin, s, 1};
}

}  // namespace detail

struct CompareOptions {
  int grid = 512;                 // Steps 1, 2, 4 and the exterior trace
  int intersection_grid = 2048;   // Step 6
  double tie_tol = 1e-10;         // |r̄₁ - r̄₂| treated as zero, relative to c₁
};

inline PairReport compare_pair(const SolutionProfile& p1, const SolutionProfile& p2, CompareMode mode,
                               const CompareOptions& opts = {}) {
  if (p1.problem.a != p2.problem.a) throw DomainError("profiles have different inner radii");
  if (p1.problem.n != p2.problem.n) throw DomainError("profiles have different dimensions");
  if (!p1.problem.f.same_as(p2.problem.f)) throw DomainError("profiles use different nonlinearities");
  if (!(p1.alpha < p2.alpha)) throw DomainError("compare_pair needs alpha1 < alpha2");

  const Nonlinearity& nl = p1.problem.f;
  const int n = p1.problem.n;
  const double B = nl.landmarks().B, beta = nl.landmarks().beta;
  const BranchPair b1 = invert_branches(p1), b2 = invert_branches(p2);

  PairReport rep;
  rep.mode = mode;
  rep.alpha1 = p1.alpha;
  rep.alpha2 = p2.alpha;
  rep.M1 = b1.M;
  rep.M2 = b2.M;
  rep.c1 = b1.c;
  rep.c2 = b2.c;
  const double M1 = b1.M, M2 = b2.M;

  if (mode == CompareMode::Finite) {
    const auto z1 = p1.first_zero(), z2 = p2.first_zero();
    const bool bvp = z1 && z2 && std::fabs(*z1 - *z2) <= 1e-8 * std::max(*z1, *z2);
    rep.premise_class = bvp ? "BVP pair" : "IVP pair";
  } else {
    auto decays = [](const SolutionProfile& p) { return p.termination == Termination::ReachedRMax && !p.first_zero(); };
    rep.premise_class = decays(p1) && decays(p2) ? "BVP pair" : "IVP pair";
  }

  // Step 1: V₁ < V₂ and r₁ > r₂ on (0, β], flux ordering at β.
  if (beta == 0.0) {
    rep.step1.status = StepStatus::TriviallyTrue;
    rep.step1.note = "beta = 0";
  } else {
    const double top = std::min({beta, M1, M2});
    rep.step1.checks.push_back(detail::on_grid("V1 < V2 on (0, beta]", 0.0, top, opts.grid, [&](double s) {
      return fn::V(b2.rising, nl, n, s) - fn::V(b1.rising, nl, n, s);
    }, true));
    rep.step1.checks.push_back(detail::on_grid("r1 > r2 on (0, beta]", 0.0, top, opts.grid, [&](double s) {
      return b1.rising.r(s) - b2.rising.r(s);
    }, true));
    if (M1 > beta && M2 > beta) {
      rep.step1.checks.push_back(detail::at_point("r1^{n-1}/r1' < r2^{n-1}/r2' at beta", beta,
                                                  fn::flux(b2.rising, n, beta) - fn::flux(b1.rising, n, beta)));
      rep.step1.settle();
    } else {
      rep.step1.settle();
      if (rep.step1.status == StepStatus::Holds) rep.step1.status = StepStatus::NotApplicable;
      rep.step1.note = "a peak lies below beta; only (0, min(beta, M1, M2)] was checked";
    }
  }

  // Step 2: M₁ < M₂, then w < 0 and r₁ > r₂ on (β, M₁).
  {
    auto& st = rep.step2;
    st.checks.push_back(detail::at_point("M1 < M2", M1, M2 - M1));
    const double top = std::min(M1, M2);
    if (top > beta) {
      st.checks.push_back(detail::on_grid("w < 0 on (beta, M1)", beta, top, opts.grid, [&](double s) {
        return fn::flux(b2.rising, n, s) - fn::flux(b1.rising, n, s);
      }));
      st.checks.push_back(detail::on_grid("r1 > r2 on (beta, M1)", beta, top, opts.grid, [&](double s) {
        return b1.rising.r(s) - b2.rising.r(s);
      }));
      st.settle();
    } else {
      st.settle();
      if (st.status == StepStatus::Holds) st.status = StepStatus::Vacuous;
      st.note = "M1 <= beta: the interval (beta, M1) is empty";
    }
  }

  // Step 3: P₁(M₁) > P₂(M₁).
  if (M1 < M2 && !fn::in_guard_band(nl, M1)) {
    const double P1 = fn::P(b1.rising, nl, n, M1);
    const double P2 = fn::P(b2.rising, nl, n, M1);
    rep.step3.checks.push_back(detail::at_point("P1(M1) > P2(M1)", M1, P1 - P2));
    rep.step3.settle();
  } else {
    rep.step3.note = M1 < M2 ? "M1 inside the guard band around B" : "M1 >= M2: P2(M1) undefined";
  }

  // Step 6: intersections of the falling branches.
  const double s_floor = std::max(b1.falling.s_min(), b2.falling.s_min());
  const double s_top = std::min(M1, M2);
  if (s_top > s_floor) {
    auto d = [&](double s) { return b1.falling.r(s) - b2.falling.r(s); };
    const double tie = opts.tie_tol * b1.c;
    const int N = opts.intersection_grid;
    double prev_s = s_top, prev_d = d(s_top);
    bool in_tie = false;
    for (int k = 1; k <= N; ++k) {
      const double s = s_top - (s_top - s_floor) * k / (N + 1);
      const double dk = d(s);
      // A run of ties counts as a single intersection.
      if (std::fabs(dk) <= tie) {
        if (!in_tie) rep.intersections.push_back(s);
        in_tie = true;
        prev_d = 0.0;
        prev_s = s;
        continue;
      }
      in_tie = false;
      if (prev_d != 0.0 && std::signbit(prev_d) != std::signbit(dk)) {
        const auto br = roots::bisect_predicate([&](double x) { return std::signbit(d(x)) != std::signbit(dk); },
                                                s, prev_s, 1e-14 * M1);
        rep.intersections.push_back(br.mid());
      }
      prev_s = s;
      prev_d = dk;
    }
    std::sort(rep.intersections.begin(), rep.intersections.end(), std::greater<>());
    rep.intersections.erase(std::unique(rep.intersections.begin(), rep.intersections.end(),
                                        [&](double x, double y) { return std::fabs(x - y) <= 1e-12 * M1; }),
                            rep.intersections.end());
    if (!rep.intersections.empty()) rep.s_I = rep.intersections.front();
  }
  const bool fall_cover_M1 = b2.falling.covers(M1);
  const bool below_at_M1 = fall_cover_M1 && M1 < M2 && b1.c < b2.falling.r(M1);
  {
    auto& st = rep.step6;
    const double lower = mode == CompareMode::Finite ? B : 0.0;
    if (!below_at_M1) {
      st.status = StepStatus::PremiseNotMet;
      st.note = "requires r1bar(M1) < r2bar(M1)";
    } else {
      const bool found = rep.s_I && *rep.s_I > lower && *rep.s_I < M1;
      Inequality q{mode == CompareMode::Finite ? "intersection in (B, M1)" : "intersection in (0, M1)"};
      q.holds = found;
      q.samples = opts.intersection_grid;
      q.margin = found ? *rep.s_I - lower : -kInfinity;
      q.witness_s = rep.s_I;
      st.checks.push_back(q);
      st.settle();
      if (s_floor > lower) st.note = "falling branches only cover s >= " + detail::shortest(s_floor);
    }
  }

  // Step 4: flux and P̄ ordering on [s_I, M₁].
  if (below_at_M1 && rep.s_I && *rep.s_I >= beta) {
    const double sI = *rep.s_I;
    auto& st = rep.step4;
    st.checks.push_back(detail::on_grid("r1bar^{n-1}/r1bar' > r2bar^{n-1}/r2bar' on [s_I, M1)", sI, M1, opts.grid,
                                        [&](double s) {
                                          return fn::flux(b1.falling, n, s) - fn::flux(b2.falling, n, s);
                                        }));
    st.checks.push_back(detail::on_grid("Pbar1 > Pbar2 on [s_I, M1]", sI, M1, opts.grid, [&](double s) {
      if (fn::in_guard_band(nl, s)) return kInfinity;
      return fn::P(b1.falling, nl, n, s) - fn::P(b2.falling, nl, n, s);
    }, true));
    st.settle();
  } else {
    rep.step4.status = StepStatus::PremiseNotMet;
    rep.step4.note = "requires r1bar(M1) < r2bar(M1) and an intersection in [beta, M1)";
  }

  // Step 5: ordering at β on the falling branches.
  {
    auto& st = rep.step5;
    const bool case_i = below_at_M1 && rep.s_I && *rep.s_I > beta;
    const bool case_ii = fall_cover_M1 && M1 < M2 && !below_at_M1;
    if (!case_i && !case_ii) {
      st.status = StepStatus::PremiseNotMet;
      st.note = "neither premise (i) nor (ii) holds";
    } else if (!b1.falling.covers(beta) || !b2.falling.covers(beta)) {
      st.status = StepStatus::NotApplicable;
      st.note = "falling branches do not reach beta";
    } else {
      const double r1 = b1.falling.r(beta), r2 = b2.falling.r(beta);
      st.checks.push_back(detail::at_point("r1bar(beta) > r2bar(beta)", beta, r1 - r2));
      st.checks.push_back(detail::at_point("r1bar/r1bar' > r2bar/r2bar' at beta", beta,
                                           r1 * b1.falling.uprime(beta) - r2 * b2.falling.uprime(beta)));
      st.settle();
      st.note = case_i ? "premise (i)" : "premise (ii)";
    }
  }

  // Exterior: J(s) = u₁'(r̄₁)² - u₂'(r̄₂)² and J'/J < -(n-1) r̄₁'/r̄₁ where J < 0, r̄₁ < r̄₂.
  if (mode == CompareMode::Exterior && s_top > s_floor) {
    StepCheck st{"exterior"};
    auto J = [&](double s) {
      const double u1 = b1.falling.uprime(s), u2 = b2.falling.uprime(s);
      return u1 * u1 - u2 * u2;
    };
    const double d = 1e-4 * (s_top - s_floor);
    Inequality q{"J'/J < -(n-1) r1bar'/r1bar where J < 0 and r1bar < r2bar"};
    for (int k = 1; k <= opts.grid; ++k) {
      const double s = s_floor + (s_top - s_floor) * k / (opts.grid + 1);
      const double Js = J(s);
      rep.J_s.push_back(s);
      rep.J.push_back(Js);
      if (!(Js < 0.0) || s - d <= s_floor || s + d >= s_top) continue;
      if (!(b1.falling.r(s) < b2.falling.r(s))) continue;
      const double lhs = fn::derivative(J, s, d) / Js;
      const double rhs = -(n - 1.0) / (b1.falling.uprime(s) * b1.falling.r(s));
      ++q.samples;
      const double m = (rhs - lhs) / std::max(std::fabs(lhs), std::fabs(rhs));
      if (m < q.margin) {
        q.margin = m;
        q.witness_s = s;
      }
    }
    if (q.samples == 0) {
      st.status = StepStatus::PremiseNotMet;
      st.note = "no s with J < 0 and r1bar < r2bar on the common falling support";
    } else {
      q.holds = q.margin > 0.0;
      st.checks.push_back(q);
      st.settle();
    }
    rep.exterior = st;
  }
  return rep;
}

}  // namespace annulus
