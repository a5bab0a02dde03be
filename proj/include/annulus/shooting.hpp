#pragma once

// Shooting on the initial slope α = u'(a): the first-zero map α ↦ b(α),
// solution finding and counting on a finite annulus, and the Crossing /
// Bouncing separatrix (ground state) for the exterior problem.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "annulus/error.hpp"
#include "annulus/radial_ode.hpp"
#include "annulus/roots.hpp"

namespace annulus {

enum class ShotClass { HitZero, NoZeroBeforeRmax, Bounced, Diverged };

inline const char* to_string(ShotClass c) {
  switch (c) {
    case ShotClass::HitZero: return "HitZero";
    case ShotClass::NoZeroBeforeRmax: return "NoZeroBeforeRmax";
    case ShotClass::Bounced: return "Bounced";
    case ShotClass::Diverged: return "Diverged";
  }
  return "?";
}

inline ShotClass classify(Termination t) {
  switch (t) {
    case Termination::HitZero: return ShotClass::HitZero;
    case Termination::Bounced: return ShotClass::Bounced;
    case Termination::ReachedRMax: return ShotClass::NoZeroBeforeRmax;
    case Termination::Diverged: return ShotClass::Diverged;
  }
  return ShotClass::Diverged;
}

// Window used for b(α) when no r_max is given: max(50 a, 100).
inline double first_zero_window(const RadialProblem& problem) { return std::max(50.0 * problem.a, 100.0); }

struct FirstZero {
  std::optional<double> b;
  ShotClass classification;
};

inline FirstZero first_zero_map(const RadialProblem& problem, double alpha, IntegratorControls controls = {}) {
  controls.stop_at_zero = true;
  controls.stop_at_bounce = true;
  if (std::isnan(controls.r_max)) controls.r_max = first_zero_window(problem);
  const SolutionProfile prof = integrate(problem, alpha, controls);
  return {prof.first_zero(), classify(prof.termination)};
}

// ---------------------------------------------------------------------------
// Finite annulus.

struct ScanOptions {
  double alpha_min = 1e-3;
  double alpha_max = 1e3;
  int grid = 512;
  double alpha_tol = 1e-12;      // root refinement in α
  double boundary_tol = 1e-8;    // |u(b)| accepted for a solution
  double continuum_tol = 1e-9;   // |u(b)| / max(1, max u) counted as "solves"
  double continuum_fraction = 0.9;
  int threads = 0;               // 0: hardware concurrency capped by ANNULUS_THREADS
  IntegratorControls controls;

  void validate() const {
    if (!(alpha_min > 0.0)) throw DomainError("alpha-min must be > 0");
    if (!(alpha_max > alpha_min)) throw DomainError("alpha-min must be below alpha-max");
    if (grid < 2) throw DomainError("scan grid needs at least 2 points");
    if (!(alpha_tol > 0.0) || !(boundary_tol > 0.0)) throw DomainError("tolerances must be positive");
  }
};

struct ScanPoint {
  double alpha = 0.0;
  double u_at_b = 0.0;               // u(b; α), continued through zeros
  bool positive = false;             // u > 0 on (a, b)
  std::optional<double> b_of_alpha;  // first zero, possibly beyond b
  ShotClass classification = ShotClass::NoZeroBeforeRmax;
  double peak_scale = 0.0;           // max |u| on [a, b]
};

struct AnnulusSolution {
  double alpha;
  double u_at_b;
  SolutionProfile profile;
};

struct ShootingResult {
  std::vector<AnnulusSolution> solutions;
  std::vector<ScanPoint> scan;
  std::vector<roots::Bracket> brackets_used;
  bool continuum = false;  // u(b; α) vanishes on most of the grid: non-generic problem
  double alpha_min = 0.0;
  double alpha_max = 0.0;
};

inline int thread_count(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("ANNULUS_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, n);
}

// Runs fn(i) for i in [0, count); results are written by index so the outcome
// does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  threads = static_cast<int>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace detail {

inline void require_finite_b(const RadialProblem& problem) {
  problem.validate();
  if (problem.exterior()) throw DomainError("this operation needs a finite outer radius b");
}

inline IntegratorControls shooting_controls(const RadialProblem& problem, IntegratorControls c) {
  c.stop_at_zero = false;
  c.stop_at_bounce = false;
  c.r_max = problem.b;
  return c;
}

// u(b; α) with the trajectory continued through its zeros.
inline double u_at_b(const RadialProblem& problem, double alpha, const IntegratorControls& controls) {
  const SolutionProfile prof = integrate(problem, alpha, shooting_controls(problem, controls));
  if (prof.termination == Termination::Diverged) return std::numeric_limits<double>::quiet_NaN();
  return prof.nodes.back().u;
}

inline ScanPoint shoot(const RadialProblem& problem, double alpha, const IntegratorControls& controls) {
  ScanPoint pt;
  pt.alpha = alpha;
  const SolutionProfile prof = integrate(problem, alpha, shooting_controls(problem, controls));
  for (const Node& nd : prof.nodes) pt.peak_scale = std::max(pt.peak_scale, std::fabs(nd.u));
  if (prof.termination == Termination::Diverged) {
    pt.u_at_b = std::numeric_limits<double>::quiet_NaN();
    pt.classification = ShotClass::Diverged;
    return pt;
  }
  pt.u_at_b = prof.nodes.back().u;
  if (auto z = prof.first_zero(); z && *z < problem.b) {
    pt.positive = false;
    pt.b_of_alpha = z;
    pt.classification = ShotClass::HitZero;
    return pt;
  }
  pt.positive = true;
  const FirstZero fz = first_zero_map(problem, alpha, controls);
  pt.b_of_alpha = fz.b;
  pt.classification = fz.classification;
  return pt;
}

}  // namespace detail

inline std::vector<double> alpha_grid(double lo, double hi, int count) {
  std::vector<double> g(count);
  for (int k = 0; k < count; ++k) g[k] = lo * std::pow(hi / lo, static_cast<double>(k) / (count - 1));
  g.back() = hi;
  return g;
}

inline ShootingResult solve_annulus(const RadialProblem& problem, const ScanOptions& opts = {}) {
  detail::require_finite_b(problem);
  opts.validate();

  ShootingResult res;
  res.alpha_min = opts.alpha_min;
  res.alpha_max = opts.alpha_max;
  const auto grid = alpha_grid(opts.alpha_min, opts.alpha_max, opts.grid);
  res.scan.resize(grid.size());
  parallel_for(grid.size(), thread_count(opts.threads),
               [&](std::size_t i) { res.scan[i] = detail::shoot(problem, grid[i], opts.controls); });

  std::size_t vanishing = 0;
  for (const auto& pt : res.scan) {
    if (std::fabs(pt.u_at_b) < opts.continuum_tol * std::max(1.0, pt.peak_scale)) ++vanishing;
  }
  if (vanishing > opts.continuum_fraction * grid.size()) {
    res.continuum = true;
    return res;
  }

  // A positive solution sits where the first zero crosses b, i.e. where
  // positivity on (a, b) flips together with the sign of u(b; α).
  for (std::size_t k = 1; k < res.scan.size(); ++k) {
    const ScanPoint& lo = res.scan[k - 1];
    const ScanPoint& hi = res.scan[k];
    if (lo.classification == ShotClass::Diverged || hi.classification == ShotClass::Diverged) continue;
    if (lo.positive == hi.positive) continue;
    if (std::signbit(lo.u_at_b) == std::signbit(hi.u_at_b)) continue;
    res.brackets_used.push_back({lo.alpha, hi.alpha});
  }

  for (const auto& br : res.brackets_used) {
    auto g = [&](double alpha) { return detail::u_at_b(problem, alpha, opts.controls); };
    const auto lo_it = std::find_if(res.scan.begin(), res.scan.end(), [&](const ScanPoint& p) { return p.alpha == br.lo; });
    const double glo = lo_it->u_at_b;
    const double ghi = std::next(lo_it)->u_at_b;
    const double tol = std::max(opts.alpha_tol, 4.0 * std::numeric_limits<double>::epsilon() * br.hi);
    const roots::Bracket root = roots::refine(g, br.lo, br.hi, glo, ghi, tol);
    // Keep the endpoint with the smaller residual.
    const double g_lo = g(root.lo), g_hi = g(root.hi);
    const double alpha = std::fabs(g_lo) <= std::fabs(g_hi) ? root.lo : root.hi;
    const double residual = std::min(std::fabs(g_lo), std::fabs(g_hi));
    if (!(residual <= opts.boundary_tol)) continue;

    IntegratorControls c = opts.controls;
    c.stop_at_zero = true;
    c.stop_at_bounce = false;
    c.r_max = problem.b;
    SolutionProfile prof = integrate(problem, alpha, c);
    if (auto z = prof.first_zero(); z && *z < problem.b - 1e-6 * (problem.b - problem.a)) continue;
    if (!res.solutions.empty() && alpha - res.solutions.back().alpha <= tol) continue;
    res.solutions.push_back({alpha, residual, std::move(prof)});
  }
  std::sort(res.solutions.begin(), res.solutions.end(), [](const auto& x, const auto& y) { return x.alpha < y.alpha; });
  return res;
}

struct SolutionCount {
  int count = 0;
  bool continuum = false;
  ShootingResult result;
};

inline SolutionCount count_solutions(const RadialProblem& problem, double alpha_min, double alpha_max, int grid_size,
                                     ScanOptions opts = {}) {
  opts.alpha_min = alpha_min;
  opts.alpha_max = alpha_max;
  opts.grid = grid_size;
  SolutionCount out;
  out.result = solve_annulus(problem, opts);
  out.continuum = out.result.continuum;
  out.count = static_cast<int>(out.result.solutions.size());
  return out;
}

// ---------------------------------------------------------------------------
// Exterior problem: ground state as the Crossing/Bouncing separatrix.

enum class Side { Crossing, Bouncing };

inline const char* to_string(Side s) { return s == Side::Crossing ? "Crossing" : "Bouncing"; }

struct ExteriorOptions {
  double alpha_min = 1e-3;
  double alpha_max = 1e3;
  int coarse_grid = 64;
  double width_tol = 1e-12;   // final bisection width in α
  double r_max = std::numeric_limits<double>::quiet_NaN();  // NaN: max(50 a, 100)
  double split_tol = 1e-8;    // relative gap between the bracketing trajectories at a restart
  double classify_factor = 4.0;  // trajectories are classified on [a, classify_factor * r_max]
  int max_stages = 60;
  IntegratorControls controls;
};

struct BisectionStep {
  double lo;
  double hi;
  Side lo_side;
  Side hi_side;
};

struct GroundState {
  double alpha_star = 0.0;
  roots::Bracket bracket{};
  std::vector<BisectionStep> trace;
  SolutionProfile profile;   // separatrix followed to r_max by restarts in the tail
  int stages = 0;
  std::optional<TailDiagnostics> tail;
  bool decay_accepted = false;
  std::string note;
};

struct ExteriorResult {
  std::vector<GroundState> solutions;
  std::vector<std::pair<double, Side>> coarse;
};

namespace detail {

inline Side side_of(const SolutionProfile& prof) {
  switch (prof.termination) {
    case Termination::HitZero: return Side::Crossing;
    case Termination::Bounced:
    case Termination::ReachedRMax: return Side::Bouncing;
    case Termination::Diverged: break;
  }
  throw StateError("trajectory diverged while classifying Crossing/Bouncing: " + prof.diagnostic);
}

inline double exterior_r_max(const RadialProblem& problem, const ExteriorOptions& opts) {
  return std::isnan(opts.r_max) ? problem.default_r_max() : opts.r_max;
}

// Controls for Crossing/Bouncing decisions. The window extends past r_max so
// that trajectories near the separatrix have room to declare themselves.
inline IntegratorControls exterior_controls(const RadialProblem& problem, const ExteriorOptions& opts) {
  IntegratorControls c = opts.controls;
  c.stop_at_zero = true;
  c.stop_at_bounce = true;
  c.r_max = std::max(1.0, opts.classify_factor) * exterior_r_max(problem, opts);
  return c;
}

// Largest node radius after `from` up to which the two bracketing
// trajectories agree to `split_tol` relative to the middle one.
inline std::optional<double> splice_radius(const SolutionProfile& mid, const SolutionProfile& lo,
                                           const SolutionProfile& hi, double from, double to, double split_tol) {
  const double limit = std::min({mid.r_end(), lo.r_end(), hi.r_end(), to});
  std::optional<double> best;
  for (const Node& nd : mid.nodes) {
    if (nd.r <= from) continue;
    if (nd.r > limit) break;
    if (!(nd.u > 0.0)) break;
    const double gap = std::fabs(lo.u(nd.r) - hi.u(nd.r));
    if (gap > split_tol * nd.u) break;
    best = nd.r;
  }
  if (best && *best < to && limit >= to) {
    const double gap = std::fabs(lo.u(to) - hi.u(to));
    if (mid.u(to) > 0.0 && gap <= split_tol * mid.u(to)) best = to;
  }
  return best;
}

inline void append_until(SolutionProfile& dst, const SolutionProfile& src, double r_stop) {
  for (const auto& seg : src.segments) {
    if (seg.r0 >= dst.nodes.back().r && seg.r0 < r_stop) dst.segments.push_back(seg);
  }
  for (const Node& nd : src.nodes) {
    if (nd.r > dst.nodes.back().r && nd.r < r_stop) dst.nodes.push_back(nd);
  }
  const auto y = src.at(r_stop);
  dst.nodes.push_back({r_stop, y[0], y[1]});
  for (const auto& lv : src.events.levels) {
    if (lv.r <= r_stop) dst.events.levels.push_back(lv);
  }
}

// Follows the separatrix between the Bouncing trajectory at alpha_b and the
// Crossing trajectory at alpha_c out to r_max. Each stage keeps the middle
// trajectory while the bracketing ones agree, then restarts from that state
// and re-bisects the slope, which recovers the precision lost to the
// exponential instability of the decaying solution.
inline SolutionProfile follow_separatrix(const RadialProblem& problem, double alpha_b, double alpha_c,
                                         const ExteriorOptions& opts, int& stages, std::string& note) {
  const IntegratorControls c = exterior_controls(problem, opts);
  const double target = exterior_r_max(problem, opts);
  const double alpha_mid = 0.5 * (alpha_b + alpha_c);
  const SolutionProfile mid = integrate(problem, alpha_mid, c);
  const SolutionProfile lo = integrate(problem, alpha_b, c);
  const SolutionProfile hi = integrate(problem, alpha_c, c);
  stages = 1;

  const double peak_r = mid.peak() ? mid.peak()->c : problem.a;
  auto rs = splice_radius(mid, lo, hi, peak_r, target, opts.split_tol);
  if (!rs) {
    note = "bracketing trajectories separate before the peak; tail not followed";
    return mid;
  }

  SolutionProfile out;
  out.problem = problem;
  out.controls = c;
  out.alpha = alpha_mid;
  out.nodes.push_back(mid.nodes.front());
  out.events.peaks = mid.events.peaks;
  append_until(out, mid, *rs);
  out.controls.r_max = target;
  if (*rs >= target) return out;

  while (stages < opts.max_stages) {
    const Node start = out.nodes.back();
    IntegratorControls sc = c;
    sc.atol = c.atol * std::min(1.0, std::fabs(start.u));
    auto run = [&](double v) { return integrate_from(problem, start.r, start.u, v, sc, true); };

    // Steeper descent crosses, shallower bounces (start.v < 0).
    double delta = 1e-6;
    double v_cross = start.v * (1.0 + delta), v_bounce = start.v * (1.0 - delta);
    bool bracketed = false;
    for (int widen = 0; widen < 6 && !bracketed; ++widen) {
      bracketed = side_of(run(v_cross)) == Side::Crossing && side_of(run(v_bounce)) == Side::Bouncing;
      if (!bracketed) {
        delta *= 10.0;
        v_cross = start.v * (1.0 + delta);
        v_bounce = start.v * (1.0 - delta);
      }
    }
    if (!bracketed) {
      note = "could not bracket the separatrix slope at r = " + shortest(start.r);
      break;
    }
    for (int it = 0; it < 200; ++it) {
      const double v_mid = 0.5 * (v_cross + v_bounce);
      if (v_mid == v_cross || v_mid == v_bounce) break;
      (side_of(run(v_mid)) == Side::Crossing ? v_cross : v_bounce) = v_mid;
    }
    ++stages;
    const SolutionProfile smid = run(0.5 * (v_cross + v_bounce));
    const auto next = splice_radius(smid, run(v_bounce), run(v_cross), start.r, target, opts.split_tol);
    if (!next || *next <= start.r * (1.0 + 1e-9)) {
      note = "separatrix restart stalled at r = " + shortest(start.r);
      break;
    }
    append_until(out, smid, *next);
    if (*next >= target) {
      out.termination = Termination::ReachedRMax;
      return out;
    }
  }
  if (note.empty()) note = "stage limit reached at r = " + shortest(out.nodes.back().r);
  out.termination = Termination::ReachedRMax;
  out.diagnostic = note;
  return out;
}

}  // namespace detail

inline ExteriorResult solve_exterior(const RadialProblem& problem, const ExteriorOptions& opts = {}) {
  problem.validate();
  if (!problem.exterior()) throw DomainError("solve_exterior needs b = infinity");
  if (!(opts.alpha_min > 0.0) || !(opts.alpha_max > opts.alpha_min)) {
    throw DomainError("exterior alpha range needs 0 < alpha-min < alpha-max");
  }
  if (opts.coarse_grid < 2) throw DomainError("coarse grid needs at least 2 points");
  const IntegratorControls c = detail::exterior_controls(problem, opts);
  auto side = [&](double alpha) { return detail::side_of(integrate(problem, alpha, c)); };

  ExteriorResult res;
  const auto grid = alpha_grid(opts.alpha_min, opts.alpha_max, opts.coarse_grid);
  std::vector<Side> sides(grid.size());
  parallel_for(grid.size(), thread_count(0), [&](std::size_t i) { sides[i] = side(grid[i]); });
  for (std::size_t i = 0; i < grid.size(); ++i) res.coarse.emplace_back(grid[i], sides[i]);
  if (sides.front() == sides.back()) {
    throw BracketError(std::string("both ends of the alpha range classify as ") + to_string(sides.front()) +
                       "; widen [alpha-min, alpha-max] so one end crosses zero and the other bounces");
  }

  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (sides[k - 1] == sides[k]) continue;
    GroundState gs;
    double lo = grid[k - 1], hi = grid[k];
    const Side lo_side = sides[k - 1], hi_side = sides[k];
    gs.trace.push_back({lo, hi, lo_side, hi_side});
    while (hi - lo > opts.width_tol) {
      const double mid = lo + 0.5 * (hi - lo);
      if (mid <= lo || mid >= hi) break;
      (side(mid) == lo_side ? lo : hi) = mid;
      gs.trace.push_back({lo, hi, lo_side, hi_side});
    }
    gs.bracket = {lo, hi};
    gs.alpha_star = gs.bracket.mid();
    const double alpha_b = lo_side == Side::Bouncing ? lo : hi;
    const double alpha_c = lo_side == Side::Crossing ? lo : hi;
    gs.profile = detail::follow_separatrix(problem, alpha_b, alpha_c, opts, gs.stages, gs.note);
    try {
      gs.tail = tail_diagnostics(gs.profile, problem);
      gs.decay_accepted = gs.bracket.width() < opts.width_tol && gs.tail->ru_prime_decreasing;
    } catch (const StateError& e) {
      gs.note += (gs.note.empty() ? "" : "; ") + std::string(e.what());
    }
    res.solutions.push_back(std::move(gs));
  }
  return res;
}

}  // namespace annulus
