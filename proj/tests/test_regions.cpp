#include <cmath>
#include <optional>
#include <string>

#include <gtest/gtest.h>

#include "annulus/conditions.hpp"
#include "annulus/regions.hpp"
#include "oracles.hpp"
#include "region_table.hpp"

using namespace annulus;
using namespace annulus::regions;

TEST(Regions, UpperCurveAtTurningPointIsCriticalExponent) {
  for (int n : {3, 4, 5}) {
    EXPECT_NEAR(P_upper(n, 4.0 / (n - 2)), (n + 2.0) / (n - 2.0), 1e-14) << n;
  }
}

TEST(Regions, UpperCurveAtOne) { EXPECT_NEAR(P_upper(3, 1), (4 + std::sqrt(40.0)) / 3, 1e-14); }

TEST(Regions, LowerCurveBelowDiagonal) {
  EXPECT_LT(P_lower(3, 0.5), 0.5);
  EXPECT_NEAR(P_lower(3, 1e-12), -1.0, 1e-10);
  EXPECT_NEAR(P_upper(3, 1e-12), 7.0 / 3.0, 1e-10);
}

TEST(Regions, RadicandOutsideDomainIsDomainError) {
  EXPECT_THROW(P_upper(3, 5.0), DomainError);
  EXPECT_THROW(P_lower(3, 6.0), DomainError);
  EXPECT_THROW(P_upper(2, 1.0), DomainError);
  EXPECT_THROW(P_upper(3, 0.0), DomainError);
  try {
    P_upper(4, 3.5);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("(n+2)/(n-2)"), std::string::npos);
  }
}

TEST(Regions, Constants) {
  EXPECT_EQ(critical_exponent(3), 5.0);
  EXPECT_TRUE(std::isinf(critical_exponent(2)));
  EXPECT_EQ(q_turn(3), 4.0);
  EXPECT_NEAR(q_cap(3), (4 + std::sqrt(30.0)) / 2, 1e-15);
  EXPECT_NEAR(q_cap(3), 4.7386, 1e-4);
}

using golden::Minus;
using golden::Plus;

TEST(Regions, GoldenTable) {
  for (const golden::Row& row : golden::kRegions) {
    const auto v = classify(row.family, row.n, row.p, row.q);
    const std::string where = std::string(to_string(row.family)) + " n=" + std::to_string(row.n) +
                              " p=" + std::to_string(row.p) + " q=" + std::to_string(row.q);
    if (row.condition) {
      ASSERT_TRUE(v.condition) << where;
      EXPECT_EQ(*v.condition, row.condition) << where;
      EXPECT_EQ(v.verdict(), std::string("UniqueByCondition") + row.condition) << where;
    } else {
      EXPECT_FALSE(v.condition) << where;
      EXPECT_EQ(v.verdict(), "OutsideAllConditions") << where;
    }
    if (row.family == Minus) EXPECT_EQ(v.finite_b_applies, row.finite_b) << where;
  }
}

TEST(Regions, PlanarPlusBound) {
  const double bound = 2 + 2 * std::sqrt(2.0);
  EXPECT_TRUE(classify_plus(2, bound, 1).unique());
  EXPECT_FALSE(classify_plus(2, bound * (1 + 1e-12), 1).unique());
}

TEST(Regions, MinusSecondConditionTracksUpperCurve) {
  const double q = 4.5, p = P_upper(3, q);
  EXPECT_EQ(classify_minus(3, p, q).verdict(), "UniqueByCondition(ii)");
  EXPECT_EQ(classify_minus(3, std::nextafter(p, 10.0), q).verdict(), "OutsideAllConditions");
}

TEST(Regions, VerdictCarriesBoundaryValues) {
  const auto v = classify_plus(3, 3, 1);
  ASSERT_TRUE(v.boundary.P_of_q && v.boundary.P_minus_of_q && v.boundary.q_cap);
  EXPECT_EQ(*v.boundary.P_of_q, P_upper(3, 1));
  EXPECT_EQ(*v.boundary.P_minus_of_q, P_lower(3, 1));
  EXPECT_EQ(v.boundary.critical_exponent, 5.0);
  EXPECT_FALSE(classify_plus(3, 7, 6).boundary.P_of_q);
}

TEST(Regions, FiredConditionReevaluatesTrue) {
  oracle::Gen gen(41);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = gen.integer(2, 9);
    const double q = gen.uniform(0.05, 6.0);
    const double p = q + gen.uniform(0.01, 6.0);
    const auto plus = classify_plus(n, p, q);
    if (plus.condition) {
      const std::string c = *plus.condition;
      const double crit = critical_exponent(n);
      if (c == "(i)") EXPECT_TRUE(n >= 6 && q >= 1 && q < p && p <= crit);
      if (c == "(ii)") EXPECT_TRUE(n > 2 && n < 6 && 4.0 / (n - 2) <= q && p <= crit);
      if (c == "(iii)") EXPECT_TRUE(n > 2 && n < 6 && q < 4.0 / (n - 2) && p <= P_upper(n, q));
      if (c == "(iv)") EXPECT_TRUE(n == 2 && p <= q + 1 + 2 * std::sqrt(q + 1));
    }
    const auto minus = classify_minus(n, p, q);
    if (minus.condition) {
      const std::string c = *minus.condition;
      if (c == "(i)") EXPECT_TRUE(n > 2 && q <= 4.0 / (n - 2) && p <= critical_exponent(n));
      if (c == "(ii)") EXPECT_TRUE(n > 2 && q > 4.0 / (n - 2) && q < q_cap(n) && p <= P_upper(n, q));
      if (c == "(iii)") EXPECT_EQ(n, 2);
      EXPECT_EQ(minus.finite_b_applies, p > 1);
    }
  }
}

TEST(Regions, ExponentOrderIsRequired) {
  EXPECT_THROW(classify_plus(3, 1, 3), DomainError);
  EXPECT_THROW(classify_minus(3, 1, 1), DomainError);
  EXPECT_THROW(classify_plus(1, 3, 1), DomainError);
  EXPECT_THROW(parse_family("times"), DomainError);
}

TEST(RegionsProperty, CurvesStraddleTheDiagonal) {
  for (int n : {3, 4, 5, 6, 8}) {
    const double cap = q_cap(n);
    for (int k = 1; k < 2000; ++k) {
      const double q = cap * k / 2000.0;
      EXPECT_LE(P_lower(n, q), q) << n << " " << q;
      EXPECT_LT(q, P_upper(n, q)) << n << " " << q;
    }
  }
}

TEST(RegionsProperty, UpperCurveRisesThenFalls) {
  for (int n : {3, 4, 5}) {
    const double crit = critical_exponent(n);
    const auto curve = region_curve(n, Plus, linear_grid(0.01, crit - 0.01, 600));
    EXPECT_TRUE(curve.increasing_below_turn) << n;
    EXPECT_TRUE(curve.decreasing_above_turn) << n;
    const double spacing = (crit - 0.02) / 600;
    EXPECT_NEAR(curve.argmax_q, q_turn(n), spacing) << n;

    // Golden-section search on -P.
    double lo = 0.01, hi = crit - 0.01;
    const double g = (std::sqrt(5.0) - 1) / 2;
    for (int it = 0; it < 200; ++it) {
      const double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
      (P_upper(n, x1) > P_upper(n, x2) ? hi : lo) = (P_upper(n, x1) > P_upper(n, x2) ? x2 : x1);
    }
    EXPECT_NEAR(0.5 * (lo + hi), q_turn(n), 1e-6) << n;
    EXPECT_NEAR(curve.argmax_q, 0.5 * (lo + hi), spacing) << n;
  }
}

TEST(RegionsProperty, InfimumBelowTurnIsTheLeftEnd) {
  const auto grid = linear_grid(0.05, 4.7, 400);
  const auto curve = region_curve(3, Plus, grid);
  ASSERT_TRUE(curve.infimum_below_turn);
  EXPECT_EQ(*curve.infimum_below_turn, curve.rows.front().P);
  EXPECT_NEAR(*curve.infimum_below_turn, P_upper(3, 0.05), 0.0);
  // Tends to (n+4)/n at the origin; P(1) sits below (n+4)/2.
  EXPECT_NEAR(P_upper(3, 1e-10), 7.0 / 3.0, 1e-9);
  EXPECT_LT(P_upper(3, 1), 3.5);
}

TEST(RegionsProperty, ConsistentWithSampledSubcriticality) {
  oracle::Gen gen(43);
  int unique = 0, beyond = 0;
  SampleGrid grid;
  grid.points_per_decade = 64;
  for (int trial = 0; trial < 120; ++trial) {
    const int n = gen.integer(2, 8);
    const double q = gen.uniform(0.1, 5.0);
    const double p = q + gen.uniform(0.01, 4.0);
    const auto v = classify_plus(n, p, q);
    const bool far_beyond = n > 2 && p > 1.05 * critical_exponent(n);
    if (!v.unique() && !far_beyond) continue;
    // Same f through the sampled path.
    const auto nl = Nonlinearity::custom(
        "sampled", [p, q](double s) { return std::pow(s, p) + std::pow(s, q); },
        [p, q](double s) { return p * std::pow(s, p - 1) + q * std::pow(s, q - 1); },
        [p, q](double s) { return std::pow(s, p + 1) / (p + 1) + std::pow(s, q + 1) / (q + 1); });
    const auto rep = check_conditions(nl, n, grid);
    if (v.unique()) {
      ++unique;
      EXPECT_TRUE(rep.get("f3").satisfied()) << "n=" << n << " p=" << p << " q=" << q;
    } else {
      ++beyond;
      EXPECT_FALSE(rep.get("f3").satisfied()) << "n=" << n << " p=" << p << " q=" << q;
    }
  }
  EXPECT_GT(unique, 10);
  EXPECT_GT(beyond, 10);
}
