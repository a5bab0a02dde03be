#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "annulus/cli.hpp"

namespace fs = std::filesystem;
using annulus::cli::run;
using json = nlohmann::ordered_json;

namespace {

struct Result {
  int code;
  json summary;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(std::move(args), out, err);
  const std::string text = out.str();
  json j;
  if (!text.empty() && text.front() == '{') j = json::parse(text.substr(0, text.find('\n')));
  return {code, j, err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("annulus_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_F(CliTest, RegionVerdict) {
  const auto r = invoke({"region", "--family", "plus", "--n", "6", "--p", "2", "--q", "1.5"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.summary["status"], "ok");
  EXPECT_EQ(r.summary["verdict"], "UniqueByCondition(i)");
}

TEST_F(CliTest, MinusRegionReportsFiniteRider) {
  const auto r = invoke({"region", "--family", "minus", "--n", "2", "--p", "0.9", "--q", "0.5"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.summary["verdict"], "UniqueByCondition(iii)");
  EXPECT_EQ(r.summary["finite_b_applies"], false);
}

TEST_F(CliTest, InvertedAlphaRangeIsDomainErrorAndWritesNothing) {
  const auto out = path("scan.csv");
  const auto r = invoke({"scan", "--n", "3", "--a", "1", "--b", "2", "--f", "plus:p=3,q=1", "--alpha-min", "10",
                         "--alpha-max", "1", "--out", out});
  EXPECT_EQ(r.code, annulus::cli::DomainFailure);
  EXPECT_EQ(r.summary["status"], "error");
  EXPECT_EQ(r.summary["error"], "DomainError");
  EXPECT_FALSE(fs::exists(out));
  EXPECT_TRUE(fs::is_empty(dir_));
}

TEST_F(CliTest, LinearHookSurfacesContinuum) {
  const auto r = invoke({"solve", "--n", "3", "--a", "1", "--b", "2", "--f", "linear", "--grid", "48"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.summary["continuum"], true);
  EXPECT_EQ(r.summary["count"], 0);
}

TEST_F(CliTest, ScanCsvIsBitIdenticalAcrossRuns) {
  const auto a = path("a.csv"), b = path("b.csv");
  const std::vector<std::string> base{"scan", "--n", "3", "--a", "1", "--b", "2", "--f", "plus:p=3,q=1", "--grid", "40"};
  auto with = [&](const std::string& out) {
    auto v = base;
    v.push_back("--out");
    v.push_back(out);
    return v;
  };
  ASSERT_EQ(invoke(with(a)).code, 0);
  ASSERT_EQ(invoke(with(b)).code, 0);
  const std::string ta = slurp(a), tb = slurp(b);
  EXPECT_EQ(ta, tb);
  EXPECT_EQ(ta.rfind("alpha,b_of_alpha,classification,u_at_b\n", 0), 0u);
  EXPECT_EQ(ta.find('\r'), std::string::npos);
  EXPECT_FALSE(fs::exists(a + ".tmp"));
}

TEST_F(CliTest, ScanReportsCountAndSignChanges) {
  const auto r = invoke({"scan", "--n", "3", "--a", "0.01", "--b", "4.5", "--f", "plus:p=7,q=2", "--alpha-min", "1",
                         "--alpha-max", "1e4", "--grid", "512"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.summary["count"], r.summary["sign_changes"]);
  EXPECT_EQ(r.summary["alpha_star"].size(), r.summary["count"].get<std::size_t>());
}

TEST_F(CliTest, NumbersRoundTrip) {
  const auto out = path("p.csv");
  ASSERT_EQ(invoke({"solve", "--n", "3", "--a", "1", "--b", "2", "--f", "plus:p=3,q=1", "--alpha", "15.25", "--out", out}).code, 0);
  std::istringstream in(slurp(out));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "r,u,u_prime,I");
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      const double x = std::stod(cell);
      EXPECT_EQ(annulus::io::num(x), cell);
    }
    ++rows;
  }
  EXPECT_GT(rows, 10);
}

TEST_F(CliTest, SolveWritesProfileAndSidecar) {
  const auto out = path("sol.csv");
  const auto r = invoke({"solve", "--n", "3", "--a", "1", "--b", "2", "--f", "plus:p=3,q=1", "--grid", "64", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.summary["count"], 1);
  ASSERT_TRUE(fs::exists(out));
  ASSERT_TRUE(fs::exists(out + ".json"));
  const auto side = json::parse(slurp(out + ".json"));
  EXPECT_EQ(side["problem"]["f"], "plus:p=3,q=1");
  EXPECT_EQ(side["termination"], "HitZero");
  EXPECT_NEAR(side["alpha"].get<double>(), 15.2537752406, 1e-8);
}

TEST_F(CliTest, FunctionalsAndCompareReadProfiles) {
  const auto p1 = path("p1.csv"), p2 = path("p2.csv"), trace = path("trace.csv"), report = path("report.json");
  ASSERT_EQ(invoke({"solve", "--n", "3", "--a", "1", "--b", "60", "--f", "plus:p=3,q=1", "--alpha", "1", "--out", p1}).code, 0);
  ASSERT_EQ(invoke({"solve", "--n", "3", "--a", "1", "--b", "60", "--f", "plus:p=3,q=1", "--alpha", "2", "--out", p2}).code, 0);

  const auto f = invoke({"functionals", "--profile", p1, "--out", trace, "--points", "51"});
  ASSERT_EQ(f.code, 0) << f.err;
  EXPECT_NEAR(f.summary["P_limit"].get<double>(), f.summary["P_limit_extrapolated"].get<double>(),
              1e-6 * std::fabs(f.summary["P_limit"].get<double>()));
  const std::string t = slurp(trace);
  EXPECT_EQ(t.rfind("s,V,P,Pbar,W,V_fd,P_fd\n", 0), 0u);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 52);

  const auto c = invoke({"compare", "--p1", p1, "--p2", p2, "--mode", "finite", "--out", report});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(c.summary["steps"]["step1"], "trivially-true");
  EXPECT_EQ(c.summary["steps"]["step2"], "holds");
  EXPECT_EQ(c.summary["steps"]["step3"], "holds");
  const auto rep = json::parse(slurp(report));
  EXPECT_EQ(rep["steps"]["step2"]["status"], "holds");
  EXPECT_FALSE(rep["steps"]["step2"]["checks"].empty());
}

TEST_F(CliTest, ExteriorGroundState) {
  const auto out = path("gs.csv");
  const auto r = invoke({"exterior", "--n", "3", "--a", "1", "--f", "minus:p=3,q=1", "--rmax", "50", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_EQ(r.summary["count"], 1);
  const auto& sol = r.summary["solutions"][0];
  EXPECT_LT(sol["bracket_width"].get<double>(), 1e-12);
  EXPECT_EQ(sol["decay_accepted"], true);
  const auto side = json::parse(slurp(out + ".json"));
  EXPECT_EQ(side["source"]["kind"], "separatrix");
  // Rebuilt from nodes, not re-integrated.
  const auto f = invoke({"functionals", "--profile", out, "--points", "21"});
  EXPECT_EQ(f.code, 0) << f.err;
}

TEST_F(CliTest, ExteriorSameSideRangeIsBracketError) {
  const auto r = invoke({"exterior", "--n", "3", "--a", "1", "--f", "minus:p=3,q=1", "--alpha-min", "10", "--alpha-max", "20"});
  EXPECT_EQ(r.code, annulus::cli::BracketFailure);
  EXPECT_EQ(r.summary["error"], "BracketError");
}

TEST_F(CliTest, CoarseConditionGridIsResolutionError) {
  const auto r = invoke({"conditions", "--f", "plus:p=3,q=1", "--n", "3", "--points-per-decade", "2"});
  EXPECT_EQ(r.code, annulus::cli::ResolutionFailure);
  EXPECT_EQ(r.summary["error"], "ResolutionError");
}

TEST_F(CliTest, ConditionsReportFields) {
  const auto r = invoke({"conditions", "--f", "plus:p=7,q=2", "--n", "3"});
  ASSERT_EQ(r.code, 0);
  const auto& rows = r.summary["conditions"];
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& row : rows) {
    EXPECT_TRUE(row.contains("condition"));
    EXPECT_TRUE(row.contains("verdict"));
    EXPECT_TRUE(row.contains("witness_s"));
    EXPECT_TRUE(row.contains("method"));
  }
  EXPECT_EQ(rows[2]["verdict"], "fails");
}

TEST_F(CliTest, EverySubcommandHasDryRun) {
  const auto prof = path("p.csv");
  ASSERT_EQ(invoke({"solve", "--b", "3", "--alpha", "2", "--out", prof}).code, 0);
  const std::vector<std::vector<std::string>> cmds{
      {"solve", "--b", "2"},
      {"scan", "--b", "2", "--out", path("never.csv")},
      {"exterior", "--f", "minus:p=3,q=1"},
      {"functionals", "--profile", prof, "--out", path("never.csv")},
      {"compare", "--p1", prof, "--p2", prof},
      {"region"},
      {"region-curve", "--out", path("never.csv")},
      {"conditions"},
  };
  for (auto cmd : cmds) {
    cmd.push_back("--dry-run");
    const auto r = invoke(cmd);
    EXPECT_EQ(r.code, 0) << cmd[0] << ": " << r.err;
    EXPECT_EQ(r.summary["dry_run"], true) << cmd[0];
    EXPECT_TRUE(r.summary.contains("plan")) << cmd[0];
  }
  EXPECT_FALSE(fs::exists(path("never.csv")));
}

TEST_F(CliTest, DryRunStillValidates) {
  const auto r = invoke({"scan", "--b", "2", "--alpha-min", "5", "--alpha-max", "1", "--dry-run"});
  EXPECT_EQ(r.code, annulus::cli::DomainFailure);
}

TEST_F(CliTest, RegionCurveWritesTable) {
  const auto out = path("curve.csv");
  const auto r = invoke({"region-curve", "--family", "plus", "--n", "3", "--q-min", "0.05", "--q-max", "4.7",
                         "--steps", "400", "--out", out});
  ASSERT_EQ(r.code, 0);
  EXPECT_NEAR(r.summary["argmax_q"].get<double>(), 4.0, 4.65 / 400);
  EXPECT_EQ(r.summary["increasing_below_turn"], true);
  EXPECT_EQ(r.summary["decreasing_above_turn"], true);
  const std::string t = slurp(out);
  EXPECT_EQ(t.rfind("q,P,P_minus,critical_exponent\n", 0), 0u);
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 402);
}

TEST_F(CliTest, RegionCurveOutsideRadicandIsDomainError) {
  const auto r = invoke({"region-curve", "--n", "3", "--q-min", "0.05", "--q-max", "5.5"});
  EXPECT_EQ(r.code, annulus::cli::DomainFailure);
}

TEST_F(CliTest, ConfigFileMirrorsFlags) {
  const auto cfg = path("run.cfg");
  std::ofstream(cfg) << "# region check\nfamily = \"minus\"\nn = 3\np = 3\nq = 1\n";
  const auto r = invoke({"region", "--config", cfg});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.summary["verdict"], "UniqueByCondition(i)");
  EXPECT_EQ(r.summary["family"], "minus");
  // Command-line flags win over the file.
  const auto o = invoke({"region", "--config", cfg, "--p", "5.5"});
  EXPECT_EQ(o.summary["verdict"], "OutsideAllConditions");
  std::ofstream(path("flags.cfg")) << "alpha_min = 1\nalpha_max = 2\ndry_run = true\nb = 2\n";
  const auto s = invoke({"scan", "--config", path("flags.cfg")});
  EXPECT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(s.summary["dry_run"], true);
  EXPECT_EQ(s.summary["alpha_range"][0], 1.0);
}

TEST_F(CliTest, BadInputsAreDomainErrors) {
  EXPECT_EQ(invoke({"solve", "--b", "2", "--f", "times:p=1"}).code, annulus::cli::DomainFailure);
  EXPECT_EQ(invoke({"solve", "--b", "2", "--alpha", "-1"}).code, annulus::cli::DomainFailure);
  EXPECT_EQ(invoke({"region", "--family", "other"}).code, annulus::cli::DomainFailure);
  EXPECT_EQ(invoke({"nosuch"}).code, annulus::cli::DomainFailure);
  EXPECT_EQ(invoke({"exterior", "--f", "plus:p=3,q=1"}).code, annulus::cli::DomainFailure);
  EXPECT_EQ(invoke({"functionals", "--profile", path("missing.csv")}).code, annulus::cli::DomainFailure);
}
