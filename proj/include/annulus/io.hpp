#pragma once

// CSV/JSON emission and loading. Numbers are written in the shortest form
// that round-trips to the same double; files are written atomically.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "annulus/conditions.hpp"
#include "annulus/error.hpp"
#include "annulus/functionals.hpp"
#include "annulus/radial_ode.hpp"
#include "annulus/regions.hpp"
#include "annulus/shooting.hpp"

namespace annulus::io {

using json = nlohmann::ordered_json;

inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return detail::shortest(x);
}

// JSON has no NaN or infinity; those become null or a string.
inline json jnum(double x) {
  if (std::isnan(x)) return nullptr;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

template <class T>
json jopt(const std::optional<T>& x) {
  if (!x) return nullptr;
  if constexpr (std::is_floating_point_v<T>) {
    return jnum(*x);
  } else {
    return *x;
  }
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DomainError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw DomainError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DomainError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  auto p = csv;
  p += ".json";
  return p;
}

// ---------------------------------------------------------------------------
// Profiles.

inline std::string profile_csv(const SolutionProfile& prof) {
  std::string out = "r,u,u_prime,I\n";
  const Nonlinearity& nl = prof.problem.f;
  for (const Node& nd : prof.nodes) {
    const double I = nd.v * nd.v + 2.0 * nl.F(std::max(0.0, nd.u));
    out += num(nd.r) + ',' + num(nd.u) + ',' + num(nd.v) + ',' + num(I) + '\n';
  }
  return out;
}

inline json problem_json(const RadialProblem& p) {
  return {{"n", p.n}, {"a", p.a}, {"b", jnum(p.b)}, {"f", p.f.label()}};
}

inline json controls_json(const IntegratorControls& c) {
  return {{"rtol", c.rtol},         {"atol", c.atol},
          {"event_tol", c.event_tol}, {"r_max", jnum(c.r_max)},
          {"overflow", c.overflow}, {"max_steps", c.max_steps},
          {"stop_at_zero", c.stop_at_zero}, {"stop_at_bounce", c.stop_at_bounce}};
}

inline json events_json(const Events& ev) {
  json peaks = json::array(), levels = json::array();
  for (const Peak& p : ev.peaks) peaks.push_back({{"c", p.c}, {"M", p.M}});
  for (const LevelCrossing& l : ev.levels) levels.push_back({{"r", l.r}, {"level", l.level}, {"direction", l.direction}});
  json bounce = nullptr;
  if (ev.bounce) bounce = {{"r", ev.bounce->r}, {"u", ev.bounce->u}};
  return {{"peaks", peaks}, {"zeros", ev.zeros}, {"level_crossings", levels}, {"bounce", bounce}};
}

// `source` says how to rebuild the trajectory: {"kind": "ivp"} re-integrates
// from alpha; anything else is rebuilt from the CSV nodes.
inline json profile_sidecar(const SolutionProfile& prof, const std::string& source_kind = "ivp") {
  return {{"problem", problem_json(prof.problem)},
          {"alpha", jnum(prof.alpha)},
          {"controls", controls_json(prof.controls)},
          {"termination", to_string(prof.termination)},
          {"diagnostic", prof.diagnostic},
          {"nodes", prof.nodes.size()},
          {"source", {{"kind", source_kind}}},
          {"events", events_json(prof.events)}};
}

inline void write_profile(const std::filesystem::path& csv, const SolutionProfile& prof,
                          const std::string& source_kind = "ivp") {
  write_atomic(csv, profile_csv(prof));
  write_atomic(sidecar_path(csv), profile_sidecar(prof, source_kind).dump(2) + "\n");
}

inline double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("not a number: '" + std::string(s) + "'");
  return x;
}

inline double json_double(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

inline RadialProblem problem_from_json(const json& j) {
  RadialProblem p{j.at("n").get<int>(), json_double(j.at("a")), json_double(j.at("b")),
                  Nonlinearity::parse(j.at("f").get<std::string>())};
  p.validate();
  return p;
}

inline IntegratorControls controls_from_json(const json& j) {
  IntegratorControls c;
  c.rtol = json_double(j.at("rtol"));
  c.atol = json_double(j.at("atol"));
  c.event_tol = json_double(j.at("event_tol"));
  c.r_max = json_double(j.at("r_max"));
  c.overflow = json_double(j.at("overflow"));
  c.max_steps = j.at("max_steps").get<long>();
  c.stop_at_zero = j.at("stop_at_zero").get<bool>();
  c.stop_at_bounce = j.at("stop_at_bounce").get<bool>();
  return c;
}

inline std::vector<Node> read_profile_nodes(const std::filesystem::path& csv) {
  std::istringstream in(read_file(csv));
  std::string line;
  if (!std::getline(in, line) || line.rfind("r,u,u_prime", 0) != 0) {
    throw DataError(csv.string() + ": expected header r,u,u_prime,I");
  }
  std::vector<Node> nodes;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      cols.push_back(rest.substr(0, pos));
    }
    cols.push_back(rest);
    if (cols.size() < 3) throw DataError(csv.string() + ": short row '" + line + "'");
    nodes.push_back({parse_double(cols[0]), parse_double(cols[1]), parse_double(cols[2])});
  }
  if (nodes.size() < 2) throw DataError(csv.string() + ": fewer than two nodes");
  return nodes;
}

// Loads a profile written by write_profile. IVP profiles are re-integrated
// from the recorded alpha and controls; others are rebuilt from the nodes
// with cubic Hermite pieces whose end slopes come from the ODE itself.
inline SolutionProfile read_profile(const std::filesystem::path& csv) {
  const json meta = json::parse(read_file(sidecar_path(csv)));
  const RadialProblem problem = problem_from_json(meta.at("problem"));
  const IntegratorControls controls = controls_from_json(meta.at("controls"));
  const std::string kind = meta.at("source").at("kind").get<std::string>();
  if (kind == "ivp") return integrate(problem, json_double(meta.at("alpha")), controls);

  SolutionProfile prof;
  prof.problem = problem;
  prof.controls = controls;
  prof.alpha = json_double(meta.at("alpha"));
  prof.nodes = read_profile_nodes(csv);
  const int n = problem.n;
  auto rhs = [&](const Node& nd) {
    return dopri5::State{nd.v, -(n - 1.0) * nd.v / nd.r - problem.f.f_extended(nd.u)};
  };
  for (std::size_t k = 1; k < prof.nodes.size(); ++k) {
    const Node &x = prof.nodes[k - 1], &y = prof.nodes[k];
    prof.segments.push_back(dopri5::Segment::hermite(x.r, y.r - x.r, {x.u, x.v}, {y.u, y.v}, rhs(x), rhs(y)));
  }
  const json& ev = meta.at("events");
  for (const auto& p : ev.at("peaks")) prof.events.peaks.push_back({json_double(p.at("c")), json_double(p.at("M"))});
  for (const auto& z : ev.at("zeros")) prof.events.zeros.push_back(json_double(z));
  const std::string term = meta.at("termination").get<std::string>();
  for (auto t : {Termination::HitZero, Termination::Bounced, Termination::ReachedRMax, Termination::Diverged}) {
    if (term == to_string(t)) prof.termination = t;
  }
  return prof;
}

// ---------------------------------------------------------------------------
// Scans and traces.

inline std::string scan_csv(const std::vector<ScanPoint>& scan) {
  std::string out = "alpha,b_of_alpha,classification,u_at_b\n";
  for (const auto& pt : scan) {
    out += num(pt.alpha) + ',' + (pt.b_of_alpha ? num(*pt.b_of_alpha) : std::string()) + ',' +
           to_string(pt.classification) + ',' + num(pt.u_at_b) + '\n';
  }
  return out;
}

inline std::string trace_csv(const FunctionalTrace& tr) {
  std::string out = "s,V,P,Pbar,W,V_fd,P_fd\n";
  for (std::size_t k = 0; k < tr.s.size(); ++k) {
    out += num(tr.s[k]) + ',' + num(tr.V[k]) + ',' + num(tr.P[k]) + ',' + num(tr.Pbar[k]) + ',' + num(tr.W[k]) + ',' +
           num(tr.V_fd[k]) + ',' + num(tr.P_fd[k]) + '\n';
  }
  return out;
}

inline std::string curve_csv(const regions::RegionCurve& c) {
  std::string out = "q,P,P_minus,critical_exponent\n";
  for (const auto& r : c.rows) out += num(r.q) + ',' + num(r.P) + ',' + num(r.P_minus) + ',' + num(r.critical) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// JSON reports.

inline json to_json(const ConditionReport& rep) {
  json rows = json::array();
  for (const auto& r : rep.results) {
    rows.push_back({{"condition", r.condition},
                    {"verdict", to_string(r.verdict)},
                    {"satisfied", r.satisfied()},
                    {"witness_s", jopt(r.witness_s)},
                    {"method", r.method},
                    {"note", r.note}});
  }
  return {{"n", rep.n}, {"conditions", rows}};
}

inline json to_json(const regions::RegionVerdict& v) {
  return {{"family", regions::to_string(v.family)},
          {"n", v.n},
          {"p", v.p},
          {"q", v.q},
          {"verdict", v.verdict()},
          {"condition", jopt(v.condition)},
          {"finite_b_applies", v.finite_b_applies},
          {"boundary_values",
           {{"P_of_q", jopt(v.boundary.P_of_q)},
            {"P_minus_of_q", jopt(v.boundary.P_minus_of_q)},
            {"critical_exponent", jnum(v.boundary.critical_exponent)},
            {"q_cap", jopt(v.boundary.q_cap)}}}};
}

inline json to_json(const Inequality& q) {
  return {{"label", q.label}, {"holds", q.holds}, {"margin", jnum(q.margin)}, {"witness_s", jopt(q.witness_s)},
          {"samples", q.samples}};
}

inline json to_json(const StepCheck& st) {
  json checks = json::array();
  for (const auto& q : st.checks) checks.push_back(to_json(q));
  return {{"status", to_string(st.status)}, {"checks", checks}, {"note", st.note}};
}

inline json to_json(const PairReport& rep) {
  json steps = json::object();
  for (const StepCheck* st : rep.steps()) steps[st->step] = to_json(*st);
  return {{"mode", rep.mode == CompareMode::Finite ? "finite" : "exterior"},
          {"premise_class", rep.premise_class},
          {"alpha1", rep.alpha1},
          {"alpha2", rep.alpha2},
          {"M1", rep.M1},
          {"M2", rep.M2},
          {"c1", rep.c1},
          {"c2", rep.c2},
          {"s_I", jopt(rep.s_I)},
          {"intersections", rep.intersections},
          {"steps", steps}};
}

inline json to_json(const DerivativeReport& d) {
  return {{"window", {d.lo, d.hi}},
          {"points", d.points},
          {"max_rel_V", d.max_rel_V},
          {"max_rel_P", d.max_rel_P},
          {"max_rel_Pbar", jopt(d.max_rel_Pbar)},
          {"max_P_prime_above_beta", jnum(d.max_P_prime_above_beta)},
          {"min_Pbar_prime_above_beta", jnum(d.min_Pbar_prime_above_beta)}};
}

inline json to_json(const TailDiagnostics& t) {
  return {{"L_estimate", t.L_estimate},
          {"ru_prime_tail", t.ru_prime_tail},
          {"r_last", t.r_last},
          {"flux_monotone", t.flux_monotone},
          {"ru_prime_decreasing", t.ru_prime_decreasing}};
}

}  // namespace annulus::io
