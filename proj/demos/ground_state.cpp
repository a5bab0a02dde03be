// Ground state of the exterior problem for f(u) = u^p - u^q.
// Usage: ground_state [n] [p] [q] [out.csv]

#include <cstdio>
#include <cstdlib>
#include <string>

#include "annulus/io.hpp"
#include "annulus/shooting.hpp"

using namespace annulus;

int main(int argc, char** argv) {
  const int n = argc > 1 ? std::atoi(argv[1]) : 3;
  const double p = argc > 2 ? std::atof(argv[2]) : 3.0;
  const double q = argc > 3 ? std::atof(argv[3]) : 1.0;
  try {
    const RadialProblem problem = RadialProblem::exterior_of(n, 1.0, Nonlinearity::power_diff(p, q));
    ExteriorOptions opts;
    opts.r_max = 50.0;
    const ExteriorResult res = solve_exterior(problem, opts);
    for (const GroundState& gs : res.solutions) {
      std::printf("alpha* = %.15g  bracket width = %.3g  bisection steps = %zu  stages = %d\n", gs.alpha_star,
                  gs.bracket.width(), gs.trace.size(), gs.stages);
      if (auto pk = gs.profile.peak()) std::printf("peak u(%.6g) = %.10g\n", pk->c, pk->M);
      if (gs.tail) {
        std::printf("tail at r = %g: r^(n-1) u' = %.6g, r u' = %.3g, flux monotone = %s\n", gs.tail->r_last,
                    gs.tail->L_estimate, gs.tail->ru_prime_tail, gs.tail->flux_monotone ? "yes" : "no");
      }
      std::printf("decay accepted = %s%s%s\n", gs.decay_accepted ? "yes" : "no", gs.note.empty() ? "" : "; ",
                  gs.note.c_str());
      if (argc > 4) io::write_profile(argv[4], gs.profile, "separatrix");
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "%s: %s\n", e.name(), e.what());
    return 1;
  }
  return 0;
}
