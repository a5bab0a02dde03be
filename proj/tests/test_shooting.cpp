#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "annulus/shooting.hpp"
#include "oracles.hpp"

using namespace annulus;

namespace {

RadialProblem plus31(double a, double b, int n = 3) { return RadialProblem::annulus(n, a, b, Nonlinearity::power_sum(3, 1)); }

RadialProblem minus_exterior(int n, double p, double q) {
  return RadialProblem::exterior_of(n, 1.0, Nonlinearity::power_diff(p, q));
}

}  // namespace

TEST(FirstZeroMap, LinearHookZeroIsIndependentOfAmplitude) {
  const auto problem = RadialProblem::annulus(3, 1.0, 2.0, Nonlinearity::linear());
  for (double alpha : {1e-3, 0.1, 1.0, 3.14, 100.0, 1e3}) {
    const auto fz = first_zero_map(problem, alpha);
    ASSERT_EQ(fz.classification, ShotClass::HitZero);
    EXPECT_NEAR(*fz.b, 2.0, 1e-8) << alpha;
  }
}

TEST(FirstZeroMap, PowerSumZeroIsFiniteAndDecreasing) {
  const auto problem = plus31(1.0, 2.0);
  const auto grid = alpha_grid(1e-3, 1e3, 25);
  double prev = kInfinity;
  for (double alpha : grid) {
    const auto fz = first_zero_map(problem, alpha);
    ASSERT_EQ(fz.classification, ShotClass::HitZero) << alpha;
    EXPECT_LT(*fz.b, prev) << alpha;
    prev = *fz.b;
  }
}

TEST(FirstZeroMap, WellTrajectoryWithSmallSlopeDoesNotCross) {
  const auto fz = first_zero_map(minus_exterior(3, 3, 1), 1e-4);
  EXPECT_TRUE(fz.classification == ShotClass::Bounced || fz.classification == ShotClass::NoZeroBeforeRmax);
  EXPECT_FALSE(fz.b);
}

TEST(SolveAnnulus, UniqueSolutionMatchesReferenceShooting) {
  ScanOptions opts;
  opts.grid = 256;
  const auto res = solve_annulus(plus31(1.0, 2.0), opts);
  ASSERT_FALSE(res.continuum);
  ASSERT_EQ(res.solutions.size(), 1u);
  const double alpha = res.solutions[0].alpha;

  oracle::Radial ref{3, [](double u) { return u * u * u + u; }};
  auto g = [&](double al) { return ref.shoot(1.0, al, 2.0, 2e-5)[0]; };
  const double ref_alpha = oracle::bisect(g, 10.0, 20.0, 1e-11);
  EXPECT_NEAR(alpha, ref_alpha, 1e-6 * ref_alpha);

  // Re-integrating the reported slope returns to zero at b.
  IntegratorControls c;
  c.stop_at_zero = false;
  c.r_max = 2.0;
  const auto prof = integrate(plus31(1.0, 2.0), alpha, c);
  EXPECT_LE(std::fabs(prof.nodes.back().u), 1e-8);
  for (const auto& nd : prof.nodes) {
    if (nd.r > 1.0 && nd.r < 2.0 - 1e-6) EXPECT_GT(nd.u, 0.0);
  }
}

TEST(SolveAnnulus, ExhaustiveScanHasOneSignChange) {
  // 4096 slopes, counted directly without the solver.
  const auto problem = plus31(1.0, 2.0);
  IntegratorControls c;
  c.stop_at_zero = false;
  c.rtol = 1e-8;
  c.atol = 1e-10;
  c.r_max = 2.0;
  const auto grid = alpha_grid(1e-3, 1e3, 4096);
  std::vector<int> positive(grid.size());
  parallel_for(grid.size(), thread_count(0), [&](std::size_t i) {
    const auto prof = integrate(problem, grid[i], c);
    const auto z = prof.first_zero();
    positive[i] = !(z && *z < 2.0);
  });
  int changes = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) changes += positive[i] != positive[i - 1];
  EXPECT_EQ(changes, 1);
}

TEST(SolveAnnulus, SolutionsAreSortedAndDistinct) {
  ScanOptions opts;
  opts.alpha_min = 1.0;
  opts.alpha_max = 1e4;
  const auto res = solve_annulus(RadialProblem::annulus(3, 0.01, 4.5, Nonlinearity::power_sum(7, 2)), opts);
  ASSERT_GE(res.solutions.size(), 2u);
  for (std::size_t k = 1; k < res.solutions.size(); ++k) {
    EXPECT_GT(res.solutions[k].alpha - res.solutions[k - 1].alpha, opts.alpha_tol);
  }
  for (const auto& sol : res.solutions) EXPECT_LE(std::fabs(sol.u_at_b), opts.boundary_tol);
}

TEST(SolveAnnulus, LinearHookIsReportedAsContinuum) {
  ScanOptions opts;
  opts.grid = 64;
  const auto res = solve_annulus(RadialProblem::annulus(3, 1.0, 2.0, Nonlinearity::linear()), opts);
  EXPECT_TRUE(res.continuum);
  EXPECT_TRUE(res.solutions.empty());
  EXPECT_EQ(res.scan.size(), 64u);
}

TEST(SolveAnnulus, ScanIsIndependentOfThreadCount) {
  ScanOptions one, many;
  one.grid = many.grid = 96;
  one.threads = 1;
  many.threads = 4;
  const auto a = solve_annulus(plus31(0.5, 1.5), one);
  const auto b = solve_annulus(plus31(0.5, 1.5), many);
  ASSERT_EQ(a.scan.size(), b.scan.size());
  for (std::size_t k = 0; k < a.scan.size(); ++k) {
    EXPECT_EQ(a.scan[k].alpha, b.scan[k].alpha);
    EXPECT_EQ(a.scan[k].u_at_b, b.scan[k].u_at_b);
    EXPECT_EQ(a.scan[k].classification, b.scan[k].classification);
  }
  ASSERT_EQ(a.solutions.size(), b.solutions.size());
  for (std::size_t k = 0; k < a.solutions.size(); ++k) EXPECT_EQ(a.solutions[k].alpha, b.solutions[k].alpha);
}

TEST(SolveAnnulus, PreconditionsAreEnforced) {
  ScanOptions bad;
  bad.alpha_min = 10;
  bad.alpha_max = 1;
  EXPECT_THROW(solve_annulus(plus31(1, 2), bad), DomainError);
  EXPECT_THROW(solve_annulus(minus_exterior(3, 3, 1)), DomainError);
  EXPECT_THROW(count_solutions(plus31(1, 2), 1, 10, 1), DomainError);
}

TEST(CountSolutions, UniquenessRegimesCountOneAndAreGridStable) {
  struct Case {
    int n;
    double p, q, a, b;
  };
  for (const Case& c : {Case{3, 3, 1, 0.5, 1.5}, Case{6, 2, 1, 1, 2}, Case{2, 3, 1, 1, 2}}) {
    const auto problem = RadialProblem::annulus(c.n, c.a, c.b, Nonlinearity::power_sum(c.p, c.q));
    const auto coarse = count_solutions(problem, 1e-3, 1e3, 128);
    const auto fine = count_solutions(problem, 1e-3, 1e3, 256);
    EXPECT_EQ(coarse.count, 1) << problem.f.label() << " n=" << c.n;
    EXPECT_EQ(fine.count, coarse.count) << problem.f.label() << " n=" << c.n;
    EXPECT_FALSE(coarse.continuum);
  }
}

TEST(CountSolutions, EmptyWhenRangeMissesTheSolution) {
  const auto res = count_solutions(plus31(1, 2), 1e-3, 1.0, 32);
  EXPECT_EQ(res.count, 0);
  EXPECT_EQ(res.result.scan.size(), 32u);
  EXPECT_EQ(res.result.alpha_max, 1.0);
}

TEST(Exterior, GroundStateMatchesIndependentBisection) {
  ExteriorOptions opts;
  opts.r_max = 50.0;
  const auto res = solve_exterior(minus_exterior(3, 3, 1), opts);
  ASSERT_EQ(res.solutions.size(), 1u);
  const auto& gs = res.solutions[0];
  EXPECT_LT(gs.bracket.width(), 1e-12);

  oracle::Radial ref{3, [](double u) { return u * u * u - u; }};
  double lo = 1.0, hi = 10.0;  // bounces at lo, crosses at hi
  ASSERT_EQ(ref.crossing_or_bouncing(1.0, lo, 1.0, 60.0, 2e-3), -1);
  ASSERT_EQ(ref.crossing_or_bouncing(1.0, hi, 1.0, 60.0, 2e-3), +1);
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (ref.crossing_or_bouncing(1.0, mid, 1.0, 60.0, 2e-3) > 0 ? hi : lo) = mid;
  }
  EXPECT_NEAR(gs.alpha_star, 0.5 * (lo + hi), 1e-7);
}

TEST(Exterior, BisectionKeepsOneCrossingAndOneBouncingEnd) {
  ExteriorOptions opts;
  opts.r_max = 50.0;
  const auto problem = minus_exterior(3, 3, 1);
  const auto res = solve_exterior(problem, opts);
  ASSERT_EQ(res.solutions.size(), 1u);
  const auto& trace = res.solutions[0].trace;
  ASSERT_GT(trace.size(), 30u);
  IntegratorControls c;
  c.r_max = 200.0;
  for (std::size_t k = 0; k < trace.size(); k += 7) {
    const auto& st = trace[k];
    EXPECT_NE(st.lo_side, st.hi_side);
    EXPECT_EQ(detail::side_of(integrate(problem, st.lo, c)), st.lo_side) << k;
    EXPECT_EQ(detail::side_of(integrate(problem, st.hi, c)), st.hi_side) << k;
    if (k > 0) EXPECT_LE(st.hi - st.lo, trace[k - 1].hi - trace[k - 1].lo);
  }
}

TEST(Exterior, GroundStateDecays) {
  ExteriorOptions opts;
  opts.r_max = 50.0;
  const auto problem = minus_exterior(3, 3, 1);
  const auto gs = solve_exterior(problem, opts).solutions.at(0);
  EXPECT_TRUE(gs.decay_accepted) << gs.note;
  ASSERT_TRUE(gs.tail);
  EXPECT_LT(std::fabs(gs.tail->ru_prime_tail), 1e-3);
  EXPECT_LE(gs.tail->L_estimate, 0.0);
  EXPECT_TRUE(gs.tail->flux_monotone);
  EXPECT_NEAR(gs.profile.r_end(), 50.0, 1e-9);
  for (const auto& nd : gs.profile.nodes) {
    if (nd.r > gs.profile.peak()->c) EXPECT_GT(nd.u, 0.0);
  }
}

TEST(Exterior, PlanarGroundStateIsUnique) {
  ExteriorOptions opts;
  opts.r_max = 50.0;
  const auto res = solve_exterior(minus_exterior(2, 3, 2), opts);
  ASSERT_EQ(res.solutions.size(), 1u);
  const auto& gs = res.solutions[0];
  EXPECT_LT(gs.bracket.width(), 1e-12);
  ASSERT_TRUE(gs.tail);
  EXPECT_LE(gs.tail->L_estimate, 0.0);
  EXPECT_TRUE(gs.tail->ru_prime_decreasing);
}

TEST(Exterior, LargeSlopeCrosses) {
  const auto problem = minus_exterior(3, 3, 1);
  const auto fz = first_zero_map(problem, 50.0);
  EXPECT_EQ(fz.classification, ShotClass::HitZero);
  oracle::Radial ref{3, [](double u) { return u * u * u - u; }};
  ASSERT_TRUE(fz.b);
  const auto z = ref.first_zero(1.0, 50.0, 10.0, 1e-4);
  ASSERT_TRUE(z);
  EXPECT_NEAR(*fz.b, *z, 1e-8);
}

TEST(Exterior, SameSideRangeIsBracketError) {
  ExteriorOptions opts;
  opts.alpha_min = 10;
  opts.alpha_max = 20;
  try {
    solve_exterior(minus_exterior(3, 3, 1), opts);
    FAIL() << "expected BracketError";
  } catch (const BracketError& e) {
    EXPECT_NE(std::string(e.what()).find("widen"), std::string::npos);
  }
}

TEST(Exterior, NeedsNegativePartAndInfiniteRadius) {
  EXPECT_THROW(solve_exterior(plus31(1, 2)), DomainError);
  EXPECT_THROW(RadialProblem::exterior_of(3, 1, Nonlinearity::power_sum(3, 1)), DomainError);
}
