#pragma once

// Command-line front end. run() takes the argument vector and streams so the
// same code serves the executable and in-process tests.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "annulus/conditions.hpp"
#include "annulus/functionals.hpp"
#include "annulus/io.hpp"
#include "annulus/regions.hpp"
#include "annulus/shooting.hpp"

namespace annulus::cli {

enum ExitCode : int { Ok = 0, DomainFailure = 2, BracketFailure = 3, ResolutionFailure = 4, InternalFailure = 5 };

inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Bracket: return BracketFailure;
    case ErrorKind::Resolution: return ResolutionFailure;
    case ErrorKind::Internal: return InternalFailure;
    default: return DomainFailure;
  }
}

using json = io::json;

// Reads a flat `key = value` file. Blank lines and lines starting with '#'
// are skipped; surrounding quotes on values are removed.
inline std::vector<std::pair<std::string, std::string>> read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DomainError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    std::replace(key.begin(), key.end(), '_', '-');
    out.emplace_back(key, value);
  }
  return out;
}

// Splices config entries into the argument list after the subcommand, unless
// the same flag is already given on the command line.
inline std::vector<std::string> expand_config(std::vector<std::string> args) {
  auto it = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a == "--config" || a.rfind("--config=", 0) == 0; });
  if (it == args.end()) return args;
  std::string path;
  if (*it == "--config") {
    if (std::next(it) == args.end()) throw DomainError("--config needs a path");
    path = *std::next(it);
    args.erase(it, it + 2);
  } else {
    path = it->substr(9);
    args.erase(it);
  }
  const std::vector<std::string> given(args.begin(), args.end());
  auto has = [&](const std::string& flag) {
    return std::any_of(given.begin(), given.end(), [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : read_config(path)) {
    const std::string flag = "--" + key;
    if (has(flag)) continue;
    if (value == "true") {
      extra.push_back(flag);
    } else if (value != "false") {
      extra.push_back(flag);
      extra.push_back(value);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

struct Options {
  // problem
  int n = 3;
  double a = 1.0;
  std::optional<double> b;
  std::string f = "plus:p=3,q=1";
  // integration
  std::optional<double> alpha;
  std::optional<double> rmax;
  double rtol = 1e-10;
  double atol = 1e-12;
  double event_tol = 1e-10;
  // shooting
  double alpha_min = 1e-3;
  double alpha_max = 1e3;
  int grid = 512;
  int coarse = 64;
  // functionals / compare
  std::string profile, p1, p2, mode = "finite";
  int points = 401;
  // regions
  std::string family = "plus";
  double p = 3.0, q = 1.0;
  double q_min = 0.05, q_max = 4.7;
  int steps = 400;
  // conditions
  int per_decade = 256;
  // output
  std::string out;
  bool dry_run = false;

  IntegratorControls controls() const {
    IntegratorControls c;
    c.rtol = rtol;
    c.atol = atol;
    c.event_tol = event_tol;
    if (rmax) c.r_max = *rmax;
    return c;
  }
};

namespace detail {

inline void check_controls(const Options& o) {
  if (!(o.rtol > 0.0) || !(o.atol > 0.0) || !(o.event_tol > 0.0)) throw DomainError("tolerances must be positive");
  if (o.rmax && !(*o.rmax > o.a)) throw DomainError("--rmax must exceed --a");
}

inline RadialProblem finite_problem(const Options& o) {
  if (!o.b) throw DomainError("this subcommand needs --b");
  return RadialProblem::annulus(o.n, o.a, *o.b, Nonlinearity::parse(o.f));
}

inline ScanOptions scan_options(const Options& o) {
  ScanOptions s;
  s.alpha_min = o.alpha_min;
  s.alpha_max = o.alpha_max;
  s.grid = o.grid;
  s.controls = o.controls();
  s.validate();
  return s;
}

inline std::filesystem::path numbered(const std::string& base, std::size_t k, std::size_t count) {
  if (count <= 1) return base;
  std::filesystem::path p(base);
  return p.parent_path() / (p.stem().string() + "_" + std::to_string(k + 1) + p.extension().string());
}

inline json profile_summary(const SolutionProfile& prof) {
  json j = {{"alpha", io::jnum(prof.alpha)},
            {"termination", to_string(prof.termination)},
            {"nodes", prof.nodes.size()},
            {"r_end", prof.r_end()}};
  if (auto pk = prof.peak()) j["peak"] = {{"c", pk->c}, {"M", pk->M}};
  if (auto z = prof.first_zero()) j["zero"] = *z;
  if (!prof.diagnostic.empty()) j["diagnostic"] = prof.diagnostic;
  return j;
}

// --- subcommands ---------------------------------------------------------

inline json cmd_solve(const Options& o) {
  check_controls(o);
  const Nonlinearity nl = Nonlinearity::parse(o.f);
  if (o.alpha) {
    // Single trajectory. Without --b the problem is exterior when f allows it.
    double b = o.b.value_or(kInfinity);
    if (!o.b && !(nl.has_valid_landmarks() && nl.landmarks().B > 0.0)) b = o.rmax.value_or(first_zero_window({o.n, o.a, kInfinity, nl}));
    const RadialProblem problem{o.n, o.a, b, nl};
    problem.validate();
    if (!(*o.alpha > 0.0)) throw DomainError("--alpha must be > 0");
    if (o.dry_run) return {{"plan", "integrate"}, {"problem", io::problem_json(problem)}, {"alpha", *o.alpha}};
    const SolutionProfile prof = integrate(problem, *o.alpha, o.controls());
    if (!o.out.empty()) io::write_profile(o.out, prof);
    json j = profile_summary(prof);
    j["problem"] = io::problem_json(problem);
    if (!o.out.empty()) j["out"] = o.out;
    return j;
  }
  const RadialProblem problem = finite_problem(o);
  const ScanOptions s = scan_options(o);
  if (o.dry_run) {
    return {{"plan", "solve_annulus"}, {"problem", io::problem_json(problem)}, {"alpha_range", {s.alpha_min, s.alpha_max}}, {"grid", s.grid}};
  }
  const ShootingResult res = solve_annulus(problem, s);
  json sols = json::array();
  for (std::size_t k = 0; k < res.solutions.size(); ++k) {
    const auto& sol = res.solutions[k];
    json js = profile_summary(sol.profile);
    js["u_at_b"] = sol.u_at_b;
    if (!o.out.empty()) {
      const auto path = numbered(o.out, k, res.solutions.size());
      io::write_profile(path, sol.profile);
      js["out"] = path.string();
    }
    sols.push_back(js);
  }
  return {{"problem", io::problem_json(problem)},
          {"alpha_range", {s.alpha_min, s.alpha_max}},
          {"grid", s.grid},
          {"continuum", res.continuum},
          {"count", res.solutions.size()},
          {"solutions", sols}};
}

inline json cmd_scan(const Options& o) {
  check_controls(o);
  const RadialProblem problem = finite_problem(o);
  const ScanOptions s = scan_options(o);
  if (o.dry_run) {
    return {{"plan", "scan"}, {"problem", io::problem_json(problem)}, {"alpha_range", {s.alpha_min, s.alpha_max}},
            {"grid", s.grid}, {"out", o.out}};
  }
  const ShootingResult res = solve_annulus(problem, s);
  if (!o.out.empty()) io::write_atomic(o.out, io::scan_csv(res.scan));
  json brackets = json::array();
  for (const auto& br : res.brackets_used) brackets.push_back({br.lo, br.hi});
  json alphas = json::array();
  for (const auto& sol : res.solutions) alphas.push_back(sol.alpha);
  return {{"problem", io::problem_json(problem)},
          {"alpha_range", {s.alpha_min, s.alpha_max}},
          {"grid", s.grid},
          {"continuum", res.continuum},
          {"sign_changes", res.brackets_used.size()},
          {"count", res.solutions.size()},
          {"alpha_star", alphas},
          {"brackets", brackets}};
}

inline json cmd_exterior(const Options& o) {
  check_controls(o);
  const RadialProblem problem = RadialProblem::exterior_of(o.n, o.a, Nonlinearity::parse(o.f));
  ExteriorOptions e;
  e.alpha_min = o.alpha_min;
  e.alpha_max = o.alpha_max;
  e.coarse_grid = o.coarse;
  if (o.rmax) e.r_max = *o.rmax;
  e.controls = o.controls();
  e.controls.r_max = std::numeric_limits<double>::quiet_NaN();
  if (!(e.alpha_min > 0.0) || !(e.alpha_max > e.alpha_min)) throw DomainError("alpha-min must be below alpha-max");
  if (o.dry_run) {
    return {{"plan", "exterior"}, {"problem", io::problem_json(problem)}, {"alpha_range", {e.alpha_min, e.alpha_max}},
            {"r_max", io::jnum(o.rmax.value_or(problem.default_r_max()))}};
  }
  const ExteriorResult res = solve_exterior(problem, e);
  json sols = json::array();
  for (std::size_t k = 0; k < res.solutions.size(); ++k) {
    const GroundState& gs = res.solutions[k];
    json js = {{"alpha_star", gs.alpha_star},
               {"bracket", {gs.bracket.lo, gs.bracket.hi}},
               {"bracket_width", gs.bracket.width()},
               {"bisection_steps", gs.trace.size()},
               {"stages", gs.stages},
               {"decay_accepted", gs.decay_accepted},
               {"tail", gs.tail ? io::to_json(*gs.tail) : json(nullptr)},
               {"note", gs.note}};
    js["profile"] = profile_summary(gs.profile);
    if (!o.out.empty()) {
      const auto path = numbered(o.out, k, res.solutions.size());
      io::write_profile(path, gs.profile, "separatrix");
      js["out"] = path.string();
    }
    sols.push_back(js);
  }
  return {{"problem", io::problem_json(problem)}, {"count", res.solutions.size()}, {"solutions", sols}};
}

inline json cmd_functionals(const Options& o) {
  if (o.profile.empty()) throw DomainError("functionals needs --profile");
  if (o.points < 3) throw DomainError("--points must be >= 3");
  if (o.dry_run) return {{"plan", "functionals"}, {"profile", o.profile}, {"out", o.out}, {"points", o.points}};
  const SolutionProfile prof = io::read_profile(o.profile);
  const BranchPair br = invert_branches(prof);
  const Nonlinearity& nl = prof.problem.f;
  const int n = prof.problem.n;
  const FunctionalTrace tr = eval_functionals(br, nl, n, o.points);
  if (!o.out.empty()) io::write_atomic(o.out, io::trace_csv(tr));
  json j = {{"M", br.M},
            {"c", br.c},
            {"P_limit", tr.P_limit},
            {"P_limit_extrapolated", fn::P_limit_extrapolated(br.rising, nl, n)},
            {"truncated", tr.truncated},
            {"guard_band_excluded", tr.guard_band_excluded},
            {"note", tr.note}};
  try {
    j["derivative_check"] = io::to_json(derivative_identity_check(br, nl, n));
  } catch (const WindowError& e) {
    j["derivative_check"] = {{"error", e.name()}, {"message", e.what()}};
  }
  return j;
}

inline json cmd_compare(const Options& o) {
  if (o.p1.empty() || o.p2.empty()) throw DomainError("compare needs --p1 and --p2");
  if (o.mode != "finite" && o.mode != "exterior") throw DomainError("--mode must be finite or exterior");
  if (o.dry_run) return {{"plan", "compare"}, {"p1", o.p1}, {"p2", o.p2}, {"mode", o.mode}, {"out", o.out}};
  const SolutionProfile a = io::read_profile(o.p1), b = io::read_profile(o.p2);
  const PairReport rep = compare_pair(a, b, o.mode == "finite" ? CompareMode::Finite : CompareMode::Exterior);
  const json full = io::to_json(rep);
  if (!o.out.empty()) io::write_atomic(o.out, full.dump(2) + "\n");
  json steps = json::object();
  for (const StepCheck* st : rep.steps()) steps[st->step] = to_string(st->status);
  return {{"premise_class", rep.premise_class}, {"M1", rep.M1}, {"M2", rep.M2}, {"s_I", io::jopt(rep.s_I)}, {"steps", steps}};
}

inline json cmd_region(const Options& o) {
  const auto fam = regions::parse_family(o.family);
  if (o.dry_run) return {{"plan", "region"}, {"family", o.family}, {"n", o.n}, {"p", o.p}, {"q", o.q}};
  return io::to_json(regions::classify(fam, o.n, o.p, o.q));
}

inline json cmd_region_curve(const Options& o) {
  const auto fam = regions::parse_family(o.family);
  const auto grid = regions::linear_grid(o.q_min, o.q_max, o.steps);
  // The radicand is positive on an interval of q, so the end points validate the grid.
  regions::P_upper(o.n, o.q_min);
  regions::P_upper(o.n, o.q_max);
  if (o.dry_run) return {{"plan", "region-curve"}, {"n", o.n}, {"q_range", {o.q_min, o.q_max}}, {"steps", o.steps}, {"out", o.out}};
  const auto curve = regions::region_curve(o.n, fam, grid);
  if (!o.out.empty()) io::write_atomic(o.out, io::curve_csv(curve));
  return {{"family", regions::to_string(fam)},
          {"n", o.n},
          {"rows", curve.rows.size()},
          {"argmax_q", curve.argmax_q},
          {"max_P", curve.max_P},
          {"q_turn", regions::q_turn(o.n)},
          {"infimum_below_turn", io::jopt(curve.infimum_below_turn)},
          {"increasing_below_turn", curve.increasing_below_turn},
          {"decreasing_above_turn", curve.decreasing_above_turn}};
}

inline json cmd_conditions(const Options& o) {
  SampleGrid g;
  g.points_per_decade = o.per_decade;
  const Nonlinearity nl = Nonlinearity::parse(o.f);
  if (o.n < 2) throw DomainError("dimension n must be >= 2");
  if (o.dry_run) return {{"plan", "conditions"}, {"f", nl.label()}, {"n", o.n}, {"points_per_decade", g.points_per_decade}};
  json j = io::to_json(check_conditions(nl, o.n, g));
  j["f"] = nl.label();
  return j;
}

}  // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"Radial solutions of semilinear problems on annuli and exterior domains", "annulus"};
  app.require_subcommand(1);

  auto problem_flags = [&](CLI::App* sub, bool with_b) {
    sub->add_option("--n", o.n, "dimension");
    sub->add_option("--a", o.a, "inner radius");
    if (with_b) sub->add_option("--b", o.b, "outer radius");
    sub->add_option("--f", o.f, "nonlinearity, e.g. plus:p=3,q=1 | minus:p=3,q=1 | linear | power:p=5");
  };
  auto control_flags = [&](CLI::App* sub) {
    sub->add_option("--rmax", o.rmax, "integration cap");
    sub->add_option("--rtol", o.rtol);
    sub->add_option("--atol", o.atol);
    sub->add_option("--event-tol", o.event_tol);
  };
  auto scan_flags = [&](CLI::App* sub) {
    sub->add_option("--alpha-min", o.alpha_min);
    sub->add_option("--alpha-max", o.alpha_max);
  };

  auto* solve = app.add_subcommand("solve", "integrate one trajectory (--alpha) or solve the annulus problem");
  problem_flags(solve, true);
  control_flags(solve);
  scan_flags(solve);
  solve->add_option("--alpha", o.alpha, "initial slope u'(a)");
  solve->add_option("--grid", o.grid);
  solve->add_option("--out", o.out, "profile CSV (JSON sidecar written next to it)");

  auto* scan = app.add_subcommand("scan", "scan alpha and count solutions on a finite annulus");
  problem_flags(scan, true);
  control_flags(scan);
  scan_flags(scan);
  scan->add_option("--grid", o.grid);
  scan->add_option("--out", o.out, "scan CSV");

  auto* ext = app.add_subcommand("exterior", "ground state on the exterior of a ball");
  problem_flags(ext, false);
  control_flags(ext);
  scan_flags(ext);
  ext->add_option("--coarse", o.coarse, "coarse alpha grid for Crossing/Bouncing classification");
  ext->add_option("--out", o.out, "profile CSV");

  auto* func = app.add_subcommand("functionals", "V, P, Pbar, W along a profile");
  func->add_option("--profile", o.profile)->required();
  func->add_option("--points", o.points);
  func->add_option("--out", o.out, "trace CSV");

  auto* cmp = app.add_subcommand("compare", "stepwise comparison of two profiles");
  cmp->add_option("--p1", o.p1)->required();
  cmp->add_option("--p2", o.p2)->required();
  cmp->add_option("--mode", o.mode)->check(CLI::IsMember({"finite", "exterior"}));
  cmp->add_option("--out", o.out, "report JSON");

  auto* reg = app.add_subcommand("region", "uniqueness region verdict for (n, p, q)");
  reg->add_option("--family", o.family)->check(CLI::IsMember({"plus", "minus"}));
  reg->add_option("--n", o.n);
  reg->add_option("--p", o.p);
  reg->add_option("--q", o.q);

  auto* curve = app.add_subcommand("region-curve", "tabulate P(q) and P_minus(q)");
  curve->add_option("--family", o.family)->check(CLI::IsMember({"plus", "minus"}));
  curve->add_option("--n", o.n);
  curve->add_option("--q-min", o.q_min);
  curve->add_option("--q-max", o.q_max);
  curve->add_option("--steps", o.steps);
  curve->add_option("--out", o.out, "curve CSV");

  auto* cond = app.add_subcommand("conditions", "check (f1)-(f4) for a nonlinearity");
  cond->add_option("--f", o.f);
  cond->add_option("--n", o.n);
  cond->add_option("--points-per-decade", o.per_decade);

  for (auto* sub : {solve, scan, ext, func, cmp, reg, curve, cond}) sub->add_flag("--dry-run", o.dry_run, "validate and print the plan only");

  json summary;
  try {
    args = expand_config(std::move(args));
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
    std::string name = app.get_subcommands().front()->get_name();
    json result;
    if (name == "solve") result = detail::cmd_solve(o);
    else if (name == "scan") result = detail::cmd_scan(o);
    else if (name == "exterior") result = detail::cmd_exterior(o);
    else if (name == "functionals") result = detail::cmd_functionals(o);
    else if (name == "compare") result = detail::cmd_compare(o);
    else if (name == "region") result = detail::cmd_region(o);
    else if (name == "region-curve") result = detail::cmd_region_curve(o);
    else result = detail::cmd_conditions(o);
    summary = {{"status", "ok"}, {"command", name}, {"dry_run", o.dry_run}};
    summary.update(result);
    out << summary.dump() << '\n';
    return Ok;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return Ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return Ok;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    out << json{{"status", "error"}, {"error", "DomainError"}, {"message", e.what()}}.dump() << '\n';
    return DomainFailure;
  } catch (const Error& e) {
    err << e.name() << ": " << e.what() << '\n';
    out << json{{"status", "error"}, {"error", e.name()}, {"message", e.what()}}.dump() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "InternalError: " << e.what() << '\n';
    out << json{{"status", "error"}, {"error", "InternalError"}, {"message", e.what()}}.dump() << '\n';
    return InternalFailure;
  }
}

}  // namespace annulus::cli
