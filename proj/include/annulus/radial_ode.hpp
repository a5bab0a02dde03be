#pragma once

// Initial value problem for radial solutions
//   u'' + (n-1)/r u' + f(u) = 0,   u(a) = 0,  u'(a) = α,
// integrated as the first-order system (u, v)' = (v, -(n-1)v/r - f(u)) with
// event detection on the continuous extension.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "annulus/dopri5.hpp"
#include "annulus/error.hpp"
#include "annulus/nonlinearity.hpp"
#include "annulus/roots.hpp"

namespace annulus {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct RadialProblem {
  int n = 3;
  double a = 1.0;
  double b = kInfinity;
  Nonlinearity f = Nonlinearity::power_sum(3.0, 1.0);

  bool exterior() const { return std::isinf(b); }

  static RadialProblem annulus(int n, double a, double b, Nonlinearity f) {
    RadialProblem p{n, a, b, std::move(f)};
    p.validate();
    return p;
  }
  static RadialProblem exterior_of(int n, double a, Nonlinearity f) {
    RadialProblem p{n, a, kInfinity, std::move(f)};
    p.validate();
    return p;
  }

  void validate() const {
    if (n < 2) throw DomainError("dimension n must be >= 2");
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("inner radius a must be finite and > 0");
    if (!(b > a)) throw DomainError("outer radius b must exceed a");
    if (exterior()) {
      if (!f.has_valid_landmarks() || !(f.landmarks().B > 0.0)) {
        throw DomainError("the exterior problem needs B > 0 (f must be negative near 0)");
      }
    }
  }

  // Default integration window: b itself, or max(50 a, 100) for the exterior.
  double default_r_max() const { return exterior() ? std::max(50.0 * a, 100.0) : b; }
};

struct IntegratorControls {
  double rtol = 1e-10;
  double atol = 1e-12;
  double event_tol = 1e-10;
  double r_max = std::numeric_limits<double>::quiet_NaN();  // NaN: problem default
  double overflow = 1e8;
  long max_steps = 2'000'000;
  bool stop_at_zero = true;
  bool stop_at_bounce = true;
};

enum class Termination { HitZero, Bounced, ReachedRMax, Diverged };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::HitZero: return "HitZero";
    case Termination::Bounced: return "Bounced";
    case Termination::ReachedRMax: return "ReachedRMax";
    case Termination::Diverged: return "Diverged";
  }
  return "?";
}

struct Node {
  double r;
  double u;
  double v;  // u'(r)
};

struct Peak {
  double c;
  double M;
};

struct LevelCrossing {
  double r;
  std::string level;  // "B" or "beta"
  int direction;      // +1 upward, -1 downward
};

struct Events {
  std::vector<Peak> peaks;            // u' changes sign from + to -
  std::vector<double> zeros;          // u reaches 0 from above
  std::vector<LevelCrossing> levels;  // u crosses B or β
  std::optional<Node> bounce;         // u' = 0 with 0 < u < B after descending
};

// One integrated trajectory. Immutable once returned from integrate().
struct SolutionProfile {
  RadialProblem problem;
  IntegratorControls controls;
  double alpha = 0.0;
  std::vector<Node> nodes;
  std::vector<dopri5::Segment> segments;
  Events events;
  Termination termination = Termination::ReachedRMax;
  std::string diagnostic;
  long rejected_steps = 0;

  double r_begin() const { return nodes.front().r; }
  double r_end() const { return nodes.back().r; }

  std::optional<Peak> peak() const {
    if (events.peaks.empty()) return std::nullopt;
    return events.peaks.front();
  }
  std::optional<double> first_zero() const {
    if (events.zeros.empty()) return std::nullopt;
    return events.zeros.front();
  }

  // (u, u') at radius r from the continuous extension; r is clamped to the
  // integrated range.
  dopri5::State at(double r) const {
    r = std::clamp(r, r_begin(), r_end());
    if (segments.empty()) return {nodes.back().u, nodes.back().v};
    auto it = std::upper_bound(segments.begin(), segments.end(), r,
                               [](double x, const dopri5::Segment& s) { return x < s.r0; });
    const auto& seg = it == segments.begin() ? segments.front() : *std::prev(it);
    return seg.at(r);
  }
  double u(double r) const { return at(r)[0]; }
  double v(double r) const { return at(r)[1]; }
  double energy(double r) const {
    const auto y = at(r);
    return y[1] * y[1] + 2.0 * problem.f.F(std::max(0.0, y[0]));
  }
};

namespace detail {

struct EventCandidate {
  enum Kind { PeakEv, BounceEv, ZeroEv, LevelEv } kind;
  double r;
  dopri5::State y;
  std::string level;
  int direction = 0;
};

// Polish a sign change of component `comp` minus `offset` inside [lo, hi] of a segment.
inline double polish(const dopri5::Segment& seg, int comp, double offset, double lo, double hi) {
  auto g = [&](double r) { return seg.at(r)[comp] - offset; };
  const double glo = g(lo), ghi = g(hi);
  // The sampled end values can differ from the polynomial by an ulp.
  if (std::signbit(glo) == std::signbit(ghi) && glo != 0.0 && ghi != 0.0) {
    return std::fabs(glo) < std::fabs(ghi) ? lo : hi;
  }
  const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(hi));
  return roots::refine(g, lo, hi, glo, ghi, tol).mid();
}

}  // namespace detail

namespace detail {

inline IntegratorControls resolve(const RadialProblem& problem, IntegratorControls controls) {
  problem.validate();
  if (std::isnan(controls.r_max)) controls.r_max = problem.default_r_max();
  if (!(controls.r_max > problem.a)) throw DomainError("r_max must exceed a");
  if (!(controls.rtol > 0.0) || !(controls.atol > 0.0)) throw DomainError("tolerances must be positive");
  return controls;
}

// Adaptive stepping from the last node of `prof` until a terminal event,
// r_max, overflow or step failure. `descending` says a peak was already passed.
inline void advance(SolutionProfile& prof, double h, bool descending) {
  const IntegratorControls& controls = prof.controls;
  const int n = prof.problem.n;
  const Nonlinearity& nl = prof.problem.f;
  const bool have_landmarks = nl.has_valid_landmarks();
  const double B = have_landmarks ? nl.landmarks().B : 0.0;
  const double beta = have_landmarks ? nl.landmarks().beta : 0.0;

  auto rhs = [&](double r, const dopri5::State& y) -> dopri5::State {
    return {y[1], -(n - 1.0) * y[1] / r - nl.f_extended(y[0])};
  };

  double r = prof.nodes.back().r;
  dopri5::State y{prof.nodes.back().u, prof.nodes.back().v};
  dopri5::State k = rhs(r, y);
  h = std::min(h, controls.r_max - r);
  long steps = 0;

  while (true) {
    if (r >= controls.r_max) {
      prof.termination = Termination::ReachedRMax;
      return;
    }
    if (++steps > controls.max_steps) {
      prof.termination = Termination::Diverged;
      prof.diagnostic = "step limit reached at r = " + shortest(r);
      return;
    }
    h = std::min(h, controls.r_max - r);
    dopri5::StepResult step = dopri5::attempt(rhs, r, y, k, h, controls.rtol, controls.atol);
    if (step.error > 1.0) {
      ++prof.rejected_steps;
      h = dopri5::next_step(h, step.error);
      if (h < 1e-14 * std::max(1.0, std::fabs(r))) {
        prof.termination = Termination::Diverged;
        prof.diagnostic = "step size underflow at r = " + shortest(r);
        return;
      }
      continue;
    }
    const double r1 = (controls.r_max - (r + h) < 1e-14 * controls.r_max) ? controls.r_max : r + h;
    step.segment.h = r1 - r;
    const dopri5::Segment& seg = step.segment;

    // Sign changes on a few interior samples of the continuous extension.
    constexpr int kSamples = 4;
    std::vector<EventCandidate> found;
    dopri5::State prev = y;
    double rprev = r;
    bool desc = descending;
    for (int j = 1; j <= kSamples; ++j) {
      const double rs = j == kSamples ? r1 : r + (r1 - r) * j / kSamples;
      const dopri5::State cur = j == kSamples ? step.y1 : seg.at(rs);
      if (prev[1] > 0.0 && cur[1] <= 0.0) {
        const double rc = polish(seg, 1, 0.0, rprev, rs);
        found.push_back({EventCandidate::PeakEv, rc, seg.at(rc)});
        desc = true;
      } else if (prev[1] < 0.0 && cur[1] >= 0.0) {
        const double rc = polish(seg, 1, 0.0, rprev, rs);
        const auto yc = seg.at(rc);
        if (desc && yc[0] > 0.0 && yc[0] < B) found.push_back({EventCandidate::BounceEv, rc, yc});
      }
      if (prev[0] > 0.0 && cur[0] <= 0.0) {
        const double rc = polish(seg, 0, 0.0, rprev, rs);
        found.push_back({EventCandidate::ZeroEv, rc, seg.at(rc)});
      } else if (j == kSamples && r1 == controls.r_max && cur[0] > 0.0 && cur[1] < 0.0 &&
                 cur[0] <= controls.event_tol * -cur[1]) {
        // Zero within event_tol beyond the end of the interval.
        found.push_back({EventCandidate::ZeroEv, r1, cur});
      }
      for (auto [name, level] : {std::pair{"B", B}, std::pair{"beta", beta}}) {
        if (!(level > 0.0)) continue;
        if (std::string_view(name) == "beta" && beta == B) continue;
        const bool up = prev[0] < level && cur[0] >= level;
        const bool down = prev[0] > level && cur[0] <= level;
        if (up || down) {
          const double rc = polish(seg, 0, level, rprev, rs);
          found.push_back({EventCandidate::LevelEv, rc, seg.at(rc), name, up ? 1 : -1});
        }
      }
      prev = cur;
      rprev = rs;
    }
    std::stable_sort(found.begin(), found.end(), [](const auto& x, const auto& z) { return x.r < z.r; });

    std::optional<Node> terminal;
    for (const auto& ev : found) {
      switch (ev.kind) {
        case EventCandidate::PeakEv:
          prof.events.peaks.push_back({ev.r, ev.y[0]});
          descending = true;
          break;
        case EventCandidate::BounceEv:
          prof.events.bounce = Node{ev.r, ev.y[0], ev.y[1]};
          if (controls.stop_at_bounce) {
            terminal = Node{ev.r, ev.y[0], ev.y[1]};
            prof.termination = Termination::Bounced;
          }
          break;
        case EventCandidate::ZeroEv:
          prof.events.zeros.push_back(ev.r);
          if (controls.stop_at_zero) {
            terminal = Node{ev.r, ev.y[0], ev.y[1]};
            prof.termination = Termination::HitZero;
          }
          break;
        case EventCandidate::LevelEv:
          prof.events.levels.push_back({ev.r, ev.level, ev.direction});
          break;
      }
      if (terminal) break;
    }

    prof.segments.push_back(seg);
    if (terminal) {
      prof.nodes.push_back(*terminal);
      return;
    }
    r = r1;
    y = step.y1;
    k = step.k7;
    prof.nodes.push_back({r, y[0], y[1]});
    if (!(std::fabs(y[0]) <= controls.overflow) || !(std::fabs(y[1]) <= controls.overflow)) {
      prof.termination = Termination::Diverged;
      prof.diagnostic = "overflow guard tripped at r = " + shortest(r);
      return;
    }
    h = dopri5::next_step(h, step.error);
  }
}

}  // namespace detail

inline SolutionProfile integrate(const RadialProblem& problem, double alpha, IntegratorControls controls = {}) {
  controls = detail::resolve(problem, controls);
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("initial slope alpha must be finite and > 0");

  const int n = problem.n;
  const double a = problem.a;
  const Nonlinearity& nl = problem.f;

  SolutionProfile prof;
  prof.problem = problem;
  prof.controls = controls;
  prof.alpha = alpha;
  prof.nodes.push_back({a, 0.0, alpha});

  // Seed step from the local expansion about r = a, so the error estimator
  // never sees f' at u = 0 (unbounded when the small exponent is below one).
  const double h = std::min(1e-8 * a / std::max(1.0, alpha), 1e-3 * (controls.r_max - a));
  // ∫₀ʰ F(α t)/α dt by 3-point Gauss-Legendre.
  const double x1 = 0.5 * h * (1.0 - std::sqrt(0.6)), x2 = 0.5 * h, x3 = 0.5 * h * (1.0 + std::sqrt(0.6));
  const double G = 0.5 * h * (5.0 * nl.F(alpha * x1) + 8.0 * nl.F(alpha * x2) + 5.0 * nl.F(alpha * x3)) / 9.0 / alpha;
  const double u1 = alpha * h - (n - 1.0) * alpha * h * h / (2.0 * a) +
                    n * (n - 1.0) * alpha * h * h * h / (6.0 * a * a) - G;
  const double v1 = alpha - (n - 1.0) * alpha * h / a + n * (n - 1.0) * alpha * h * h / (2.0 * a * a) -
                    nl.F(alpha * h) / alpha;
  const dopri5::State y0{0.0, alpha}, y1{u1, v1};
  const dopri5::State k0{alpha, -(n - 1.0) * alpha / a - nl.f_extended(0.0)};
  const dopri5::State k1{v1, -(n - 1.0) * v1 / (a + h) - nl.f_extended(u1)};
  prof.segments.push_back(dopri5::Segment::hermite(a, h, y0, y1, k0, k1));
  prof.nodes.push_back({a + h, u1, v1});

  detail::advance(prof, 1e-4 * a / std::max(1.0, alpha), false);
  return prof;
}

// Continues the radial ODE from an arbitrary state (r0, u0, u0'). Used to
// restart trajectories, e.g. when following a separatrix far into the tail.
inline SolutionProfile integrate_from(const RadialProblem& problem, double r0, double u0, double v0,
                                      IntegratorControls controls, bool descending) {
  controls = detail::resolve(problem, controls);
  if (!(r0 >= problem.a) || !(r0 < controls.r_max)) throw DomainError("restart radius outside [a, r_max)");
  SolutionProfile prof;
  prof.problem = problem;
  prof.controls = controls;
  prof.alpha = std::numeric_limits<double>::quiet_NaN();
  prof.nodes.push_back({r0, u0, v0});
  const double scale = std::max(std::fabs(v0), std::fabs(u0));
  detail::advance(prof, 1e-3 * r0 / std::max(1.0, scale), descending);
  return prof;
}

// ---------------------------------------------------------------------------
// Energy I(r) = u'² + 2F(u), with I'(r) = -2(n-1)u'²/r along solutions.

struct EnergySample {
  double r;
  double I;
  double Iprime_formula;
};

struct EnergyTrace {
  std::vector<EnergySample> samples;  // at the nodes
  double max_positive_jump = 0.0;     // max over consecutive nodes of I(r_{k+1}) - I(r_k)
  double max_jump_ratio = 0.0;        // same, divided by atol + rtol·max|I| of the pair
  double max_abs_fd_deviation = 0.0;  // |dI/dr (finite differences) - formula|, interior segments
  double max_rel_fd_deviation = 0.0;  // the above over max |formula| on the same segments
};

inline EnergyTrace energy_trace(const SolutionProfile& prof) {
  if (prof.nodes.empty()) throw DomainError("empty profile");
  const int n = prof.problem.n;
  const Nonlinearity& nl = prof.problem.f;
  auto energy = [&](const dopri5::State& y) { return y[1] * y[1] + 2.0 * nl.F(std::max(0.0, y[0])); };
  auto formula = [&](double r, const dopri5::State& y) { return -2.0 * (n - 1.0) * y[1] * y[1] / r; };

  EnergyTrace tr;
  tr.samples.reserve(prof.nodes.size());
  for (const Node& nd : prof.nodes) {
    tr.samples.push_back({nd.r, energy({nd.u, nd.v}), formula(nd.r, {nd.u, nd.v})});
  }
  for (std::size_t k = 1; k < tr.samples.size(); ++k) {
    const double jump = tr.samples[k].I - tr.samples[k - 1].I;
    const double scale = prof.controls.atol +
                         prof.controls.rtol * std::max(std::fabs(tr.samples[k].I), std::fabs(tr.samples[k - 1].I));
    tr.max_positive_jump = std::max(tr.max_positive_jump, jump);
    tr.max_jump_ratio = std::max(tr.max_jump_ratio, jump / scale);
  }

  // Central differences inside each segment (Richardson with δ and δ/2) on the
  // interior window: the seed and final segments and the first and last 1% of
  // [a, r_end] are skipped.
  double max_formula = 0.0;
  const double r_lo = prof.nodes.front().r, r_hi = prof.nodes.back().r;
  const double layer = 0.01 * (r_hi - r_lo);
  for (std::size_t k = 1; k + 1 < prof.segments.size(); ++k) {
    const auto& seg = prof.segments[k];
    const double rm = seg.r0 + 0.5 * seg.h;
    if (rm < r_lo + layer || rm > r_hi - layer) continue;
    const double d = seg.h / 8.0;
    auto central = [&](double delta) { return (energy(seg.at(rm + delta)) - energy(seg.at(rm - delta))) / (2.0 * delta); };
    const double fd = (4.0 * central(0.5 * d) - central(d)) / 3.0;
    const double ref = formula(rm, seg.at(rm));
    tr.max_abs_fd_deviation = std::max(tr.max_abs_fd_deviation, std::fabs(fd - ref));
    max_formula = std::max(max_formula, std::fabs(ref));
  }
  tr.max_rel_fd_deviation = max_formula > 0.0 ? tr.max_abs_fd_deviation / max_formula : 0.0;
  return tr;
}

// ---------------------------------------------------------------------------
// Tail limits for the exterior problem: r^{n-1}u' -> L <= 0 and r u' -> 0.

struct TailDiagnostics {
  double L_estimate = 0.0;          // r^{n-1} u' at the last node
  double ru_prime_tail = 0.0;       // r u' at the last node
  double r_last = 0.0;
  bool flux_monotone = false;       // r^{n-1}u' nondecreasing on the last decade where f(u) < 0
  bool ru_prime_decreasing = false; // |r u'| nonincreasing on the last decade
};

inline TailDiagnostics tail_diagnostics(const SolutionProfile& prof, const RadialProblem& problem) {
  if (!problem.exterior()) throw StateError("tail diagnostics need an exterior problem (b = infinity)");
  if (prof.nodes.size() < 3) throw StateError("profile too short for tail diagnostics");
  const double B = problem.f.landmarks().B;
  const Node& last = prof.nodes.back();
  if (prof.termination != Termination::ReachedRMax || !(last.u > 0.0) || !(last.u < B) || last.v > 0.0) {
    throw StateError("profile is not in the decay regime (need r_max reached with 0 < u < B and u' <= 0)");
  }
  const int n = problem.n;
  TailDiagnostics td;
  td.r_last = last.r;
  td.L_estimate = std::pow(last.r, n - 1.0) * last.v;
  td.ru_prime_tail = last.r * last.v;

  const double r_from = last.r / 10.0;
  td.flux_monotone = true;
  td.ru_prime_decreasing = true;
  const Node* prev = nullptr;
  for (const Node& nd : prof.nodes) {
    if (nd.r < r_from) continue;
    if (prev) {
      const double flux0 = std::pow(prev->r, n - 1.0) * prev->v;
      const double flux1 = std::pow(nd.r, n - 1.0) * nd.v;
      const double slack = 1e-9 * std::max(std::fabs(flux0), std::fabs(flux1));
      if (nd.u < B && prev->u < B && flux1 < flux0 - slack) td.flux_monotone = false;
      if (std::fabs(nd.r * nd.v) > std::fabs(prev->r * prev->v) * (1.0 + 1e-9)) td.ru_prime_decreasing = false;
    }
    prev = &nd;
  }
  return td;
}

}  // namespace annulus
