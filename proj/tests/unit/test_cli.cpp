#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome necli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = narrow_escape::cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv(narrow_escape::cli::output_dir_env);
    dir_ = fs::temp_directory_path() /
           ("necli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override {
    unsetenv(narrow_escape::cli::output_dir_env);
    fs::remove_all(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
  }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, AsymCircle) {
  const Outcome r = necli({"asym", "--shape", "circle", "--V", "100", "--a", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["tool"], "necli");
  EXPECT_EQ(j["schema"], 1);
  EXPECT_EQ(j["command"], "asym");
  EXPECT_DOUBLE_EQ(j["records"][0]["value"].get<double>(), 25.0);
  EXPECT_EQ(j["config"]["V"], 100.0);
}

TEST_F(Cli, CollinsFields) {
  const Outcome r = necli({"collins", "--eps", "0.05"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json rec = json::parse(r.out)["records"][0];
  for (const char* k : {"b0", "leading", "c_factor", "mfpt_center", "mfpt_average", "rel_correction", "ratio",
                        "operator_norm", "norm_bound", "double_integral_ratio"}) {
    EXPECT_TRUE(rec.contains(k)) << k;
  }
  EXPECT_NEAR(rec["b0"].get<double>(), 21.540491, 1e-5);
  EXPECT_NEAR(rec["ratio"].get<double>(), 0.1902, 1e-3);
}

TEST_F(Cli, CompareColumns) {
  const Outcome r = necli({"compare", "--geometry", "cylinder", "--paths", "200", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\ngeometry,mc,mc_stderr,leading,leading_gap,two_term,two_term_gap,collins,collins_gap,"
                       "spectral,spectral_gap,exact,exact_gap,window_ie,window_ie_gap\n"),
            std::string::npos)
      << r.out;
  EXPECT_NE(r.out.find("\ncylinder,"), std::string::npos);
}

TEST_F(Cli, SimulateRecordSchema) {
  const Outcome r = necli({"simulate", "--geometry", "ball", "--eps", "0.5", "--paths", "100", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["records"].size(), 1u);
  for (const auto& col : narrow_escape::sim_record_columns()) EXPECT_TRUE(j["records"][0].contains(col)) << col;
  EXPECT_EQ(j["records"][0]["seed"], 3);
  EXPECT_GT(j["config"]["dt"].get<double>(), 0.0);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(necli({"asym", "--bogus", "1"}).code, 2);
  EXPECT_EQ(necli({"frobnicate"}).code, 2);
  EXPECT_EQ(necli({"asym", "--shape", "triangle"}).code, 2);
  const Outcome bad = necli({"asym", "--shape", "circle", "--V", "-1", "--a", "1"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_EQ(bad.err.rfind("error: domain:", 0), 0u) << bad.err;
  // Flags that do not apply to the chosen formula or geometry are rejected.
  EXPECT_EQ(necli({"asym", "--shape", "circle", "--V", "1", "--a", "0.1", "--b", "0.05"}).code, 2);
  EXPECT_EQ(necli({"simulate", "--geometry", "ball", "--L", "2", "--paths", "10"}).code, 2);
  EXPECT_EQ(necli({"spectral", "--N", "8"}).code, 2);
  EXPECT_EQ(necli({"--format", "json", "--append", "asym", "--shape", "circle", "--V", "1", "--a", "0.1"}).code, 2);
}

TEST_F(Cli, SolverErrorExitCode) {
  {
    std::ofstream m(path("dup.txt"));
    m << "0 0 0.1\n0 0 0.1\n";
  }
  const Outcome r = necli({"window", "--mesh", path("dup.txt")});
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(r.err.rfind("error: solver:", 0), 0u) << r.err;
  {
    std::ofstream m(path("bad.txt"));
    m << "0 0\n";
  }
  EXPECT_EQ(necli({"window", "--mesh", path("bad.txt")}).code, 2);
}

TEST_F(Cli, ReplayRoundTrip) {
  const std::string first = path("first.json");
  ASSERT_EQ(necli({"--out", first, "simulate", "--geometry", "cylinder", "--paths", "150", "--seed", "9"}).code, 0);
  const std::string second = path("second.json");
  const Outcome r = necli({"--replay", first, "--out", second});
  ASSERT_EQ(r.code, 0) << r.err;
  json a = json::parse(slurp(first)), b = json::parse(slurp(second));
  a["records"][0].erase("elapsed_s");
  b["records"][0].erase("elapsed_s");
  EXPECT_EQ(a, b);

  // CSV output replays as well.
  const std::string csv = path("first.csv");
  ASSERT_EQ(necli({"--out", csv, "--format", "csv", "collins", "--eps", "0.2", "--nquad", "64"}).code, 0);
  const Outcome rc = necli({"--replay", csv});
  ASSERT_EQ(rc.code, 0) << rc.err;
  EXPECT_EQ(json::parse(rc.out)["config"]["nquad"], 64);
}

TEST_F(Cli, ReplayErrors) {
  std::ofstream(path("junk.json")) << "{\"command\": \"nope\", \"config\": {}}";
  EXPECT_EQ(necli({"--replay", path("junk.json")}).code, 2);
  EXPECT_EQ(necli({"--replay", path("missing.json")}).code, 2);
}

TEST_F(Cli, CsvAppendKeepsOneHeader) {
  const std::string out = path("runs.csv");
  for (int seed : {1, 2}) {
    const Outcome r = necli({"--out", out, "--format", "csv", "--append", "simulate", "--geometry", "cylinder",
                         "--paths", "50", "--seed", std::to_string(seed)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const std::string text = slurp(out);
  std::size_t headers = 0, pos = 0;
  while ((pos = text.find("geometry,params,", pos)) != std::string::npos) ++headers, ++pos;
  EXPECT_EQ(headers, 1u);
  std::size_t rows = 0;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) rows += line.rfind("cylinder,", 0) == 0;
  EXPECT_EQ(rows, 2u);
  // A different column set may not be appended.
  EXPECT_EQ(necli({"--out", out, "--format", "csv", "--append", "collins", "--eps", "0.3", "--nquad", "32"}).code, 2);
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  setenv(narrow_escape::cli::output_dir_env, dir_.c_str(), 1);
  const Outcome r = necli({"sphere", "--ratios", "0.1", "0.2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  ASSERT_TRUE(fs::exists(dir_ / "sphere.json"));
  EXPECT_EQ(json::parse(slurp(path("sphere.json")))["records"].size(), 2u);
  ASSERT_EQ(necli({"--out", "sub/x.csv", "--format", "csv", "sphere"}).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "sub" / "x.csv"));
}

TEST_F(Cli, VersionAndHelp) {
  EXPECT_EQ(necli({"--version"}).out, std::string(narrow_escape::version) + "\n");
  const Outcome h = necli({"collins", "--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("--nquad"), std::string::npos);
}
