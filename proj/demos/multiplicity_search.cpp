// Looks for an annulus with several positive solutions when f(u) = u^p + u^q
// with q below and p above the critical exponent. The first-zero map b(alpha)
// is scanned at fixed inner radius; when it folds, any b strictly between a
// local minimum and the following local maximum is hit at least three times.
// Usage: multiplicity_search [a] [p] [q] [n]

#include <cstdio>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <vector>

#include "annulus/shooting.hpp"

using namespace annulus;

int main(int argc, char** argv) {
  const double a = argc > 1 ? std::atof(argv[1]) : 0.01;
  const double p = argc > 2 ? std::atof(argv[2]) : 7.0;
  const double q = argc > 3 ? std::atof(argv[3]) : 2.0;
  const int n = argc > 4 ? std::atoi(argv[4]) : 3;
  try {
    const Nonlinearity nl = Nonlinearity::power_sum(p, q);
    const RadialProblem open = RadialProblem::annulus(n, a, first_zero_window({n, a, kInfinity, nl}), nl);
    const auto alphas = alpha_grid(1.0, 1e4, 400);
    std::vector<double> b(alphas.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_for(alphas.size(), thread_count(0), [&](std::size_t i) {
      if (auto z = first_zero_map(open, alphas[i]).b) b[i] = *z;
    });

    std::vector<std::size_t> minima, maxima;
    for (std::size_t i = 1; i + 1 < b.size(); ++i) {
      if (std::isnan(b[i - 1]) || std::isnan(b[i]) || std::isnan(b[i + 1])) continue;
      if (b[i] < b[i - 1] && b[i] < b[i + 1]) minima.push_back(i);
      if (b[i] > b[i - 1] && b[i] > b[i + 1]) maxima.push_back(i);
    }
    for (auto i : minima) std::printf("local min of b(alpha): b = %.6g at alpha = %.6g\n", b[i], alphas[i]);
    for (auto i : maxima) std::printf("local max of b(alpha): b = %.6g at alpha = %.6g\n", b[i], alphas[i]);
    if (minima.empty() || maxima.empty()) {
      std::printf("b(alpha) does not fold on [1, 1e4] at a = %g\n", a);
      return 0;
    }
    const double lo = b[minima.front()], hi = b[maxima.back()];
    if (!(lo < hi)) {
      std::printf("fold too shallow at a = %g\n", a);
      return 0;
    }
    const double target = 0.5 * (lo + hi);
    const auto res = count_solutions(RadialProblem::annulus(n, a, target, nl), 1.0, 1e4, 512);
    std::printf("b = %.6g: %d solution(s)\n", target, res.count);
    for (const auto& sol : res.result.solutions) {
      std::printf("  alpha* = %.15g  max u = %.6g\n", sol.alpha, sol.profile.peak() ? sol.profile.peak()->M : std::numeric_limits<double>::quiet_NaN());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "%s: %s\n", e.name(), e.what());
    return 1;
  }
  return 0;
}
