#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string output;
};

Result sh(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + PAINMTL_CLI + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
  const int status = pclose(p);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("painmtl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpExitsZero) {
  EXPECT_EQ(sh("--help").code, 0);
  for (const char* sub : {"synth", "extract", "run"}) {
    const auto r = sh(std::string(sub) + " --help");
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.output.find("--"), std::string::npos);
  }
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(sh("").code, 2);
  EXPECT_EQ(sh("bogus").code, 2);
  const auto r = sh("synth --per-class 0 --out " + p("x"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("--per-class"), std::string::npos);
  EXPECT_EQ(sh("synth --heterogeneity 1.5 --out " + p("x")).code, 2);
  EXPECT_EQ(sh("run --data " + p("missing")).code, 2);
  EXPECT_EQ(sh("extract --data " + p("missing.csv")).code, 2);
}

TEST_F(CliTest, SynthIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(sh("synth --subjects 2 --per-class 2 --sample-rate 128 --seed 9 --out " + p("a")).code, 0);
  ASSERT_EQ(sh("synth --subjects 2 --per-class 2 --sample-rate 128 --seed 9 --out " + p("b")).code, 0);
  EXPECT_EQ(slurp(p("a/dataset.csv")), slurp(p("b/dataset.csv")));
  EXPECT_EQ(slurp(p("a/ground_truth.csv")), slurp(p("b/ground_truth.csv")));
  ASSERT_EQ(sh("synth --subjects 2 --per-class 2 --sample-rate 128 --seed 10 --out " + p("c")).code, 0);
  EXPECT_NE(slurp(p("a/dataset.csv")), slurp(p("c/dataset.csv")));
}

TEST_F(CliTest, SynthBioVidShape) {
  const auto r = sh("synth --subjects 87 --per-class 20 --sample-rate 100 --out " + p("big"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(lines(slurp(p("big/dataset.csv"))), 8701u);
  EXPECT_EQ(lines(slurp(p("big/ground_truth.csv"))), 8701u);
}

TEST_F(CliTest, ExtractSchemaAndIdempotence) {
  ASSERT_EQ(sh("synth --subjects 2 --per-class 2 --sample-rate 100 --out " + p("d")).code, 0);
  ASSERT_EQ(sh("extract --data " + p("d") + " --ecg-high 40").code, 0);
  const std::string first = slurp(p("d/features.csv"));
  std::istringstream in(first);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(std::count(header.begin(), header.end(), ',') + 1, 2 + 17 + 17);
  EXPECT_EQ(lines(first), 21u);
  ASSERT_EQ(sh("extract --data " + p("d/dataset.csv") + " --ecg-high 40 --jobs 3 --out " + p("again.csv")).code, 0);
  EXPECT_EQ(first, slurp(p("again.csv")));
}

TEST_F(CliTest, ExtractBandAboveNyquistIsUsageError) {
  ASSERT_EQ(sh("synth --subjects 1 --per-class 1 --sample-rate 100 --out " + p("d")).code, 0);
  const auto r = sh("extract --data " + p("d"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("--ecg-high"), std::string::npos);
}

TEST_F(CliTest, FlatEcgRowIsMasked) {
  std::ofstream csv(p("flat.csv"));
  csv << "subject_id,label,sample_rate_hz,sc_window,ecg_window\n";
  for (const char* label : {"BLN", "P4"}) {
    csv << "S01," << label << ",100,";
    for (int i = 0; i < 550; ++i) csv << (i ? ";" : "") << 2.0 + 0.001 * i;
    csv << ",";
    for (int i = 0; i < 550; ++i) csv << (i ? ";" : "") << 0;
    csv << "\n";
  }
  csv.close();
  const auto r = sh("extract --data " + p("flat.csv") + " --ecg-high 40");
  ASSERT_EQ(r.code, 0) << r.output;
  std::istringstream in(slurp(p("features.csv")));
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  ASSERT_EQ(cells.size(), 36u);
  for (int j = 0; j < 12; ++j) EXPECT_EQ(cells[19 + j], "1") << j;
  for (int j = 12; j < 17; ++j) EXPECT_EQ(cells[19 + j], "0") << j;
}

TEST_F(CliTest, MalformedInputIsIoError) {
  std::ofstream(p("bad.csv")) << "subject_id,label,sample_rate_hz,sc_window,ecg_window\nS01,P9,100,1;2;3,\n";
  const auto r = sh("extract --data " + p("bad.csv"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("row"), std::string::npos);
}

TEST_F(CliTest, RunSeparatesStrongEffect) {
  ASSERT_EQ(sh("synth --subjects 6 --per-class 10 --sample-rate 512 --effect-size 1.0 --out " + p("d")).code, 0);
  ASSERT_EQ(sh("extract --data " + p("d")).code, 0);
  const auto r = sh("run --data " + p("d") + " --classifier lr --features sc --k 5 --format csv --out " + p("res"));
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string summary = slurp(p("res/summary.csv"));
  EXPECT_NE(r.output.find(summary), std::string::npos);
  std::istringstream in(summary);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "task,classifier,feature_set,k,n_folds,mean_acc,std_acc,invalid_hrv_windows");
  std::getline(in, line);
  std::vector<std::string> cells;
  std::stringstream ss(line);
  for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
  ASSERT_EQ(cells.size(), 8u);
  EXPECT_GE(std::stod(cells[5]), 0.95);
  EXPECT_EQ(lines(slurp(p("res/folds.csv"))), 6u);
}

TEST_F(CliTest, RunExtractsRawOnTheFly) {
  ASSERT_EQ(sh("synth --subjects 3 --per-class 4 --sample-rate 100 --out " + p("d")).code, 0);
  const auto r = sh("run --data " + p("d") + " --classifier svm-l --k 2 --ecg-high 40 --out " + p("res"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("SVM-L"), std::string::npos);
}

TEST_F(CliTest, ResultsDirFromEnvironmentAndDeterminism) {
  ASSERT_EQ(sh("synth --subjects 3 --per-class 6 --sample-rate 100 --out " + p("d")).code, 0);
  ASSERT_EQ(sh("extract --data " + p("d") + " --ecg-high 40").code, 0);
  const std::string args = "run --data " + p("d") + " --classifier mtnn --k 3 --epochs 20";
  ASSERT_EQ(sh(args, "PAINMTL_RESULTS_DIR=" + p("env1")).code, 0);
  ASSERT_EQ(sh(args + " --jobs 2", "PAINMTL_RESULTS_DIR=" + p("env2")).code, 0);
  EXPECT_EQ(slurp(p("env1/folds.csv")), slurp(p("env2/folds.csv")));
  EXPECT_EQ(slurp(p("env1/summary.csv")), slurp(p("env2/summary.csv")));
  EXPECT_FALSE(slurp(p("env1/folds.csv")).empty());
}

TEST_F(CliTest, ConfigFileAndFlagPrecedence) {
  std::ofstream(p("cfg.json")) << R"({"synth": {"n_subjects": 2, "per_class": 3, "sample_rate_hz": 100}})";
  ASSERT_EQ(sh("synth --config " + p("cfg.json") + " --out " + p("a")).code, 0);
  EXPECT_EQ(lines(slurp(p("a/dataset.csv"))), 31u);
  ASSERT_EQ(sh("synth --config " + p("cfg.json") + " --per-class 1 --out " + p("b")).code, 0);
  EXPECT_EQ(lines(slurp(p("b/dataset.csv"))), 11u);

  std::ofstream(p("typo.json")) << R"({"synth": {"n_subject": 2}})";
  EXPECT_EQ(sh("synth --config " + p("typo.json") + " --out " + p("c")).code, 2);
  std::ofstream(p("section.json")) << R"({"model": {}})";
  EXPECT_EQ(sh("synth --config " + p("section.json") + " --out " + p("c")).code, 2);
}

TEST_F(CliTest, SweepCoversTheGrid) {
  ASSERT_EQ(sh("synth --subjects 2 --per-class 4 --sample-rate 100 --out " + p("d")).code, 0);
  ASSERT_EQ(sh("extract --data " + p("d") + " --ecg-high 40").code, 0);
  const auto r = sh("run --data " + p("d") + " --sweep --k 2 --epochs 5 --out " + p("res"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(lines(slurp(p("res/summary.csv"))), 49u);
  EXPECT_EQ(lines(slurp(p("res/folds.csv"))), 1u + 48u * 2u);
  std::size_t na = 0;
  for (std::size_t pos = 0; (pos = r.output.find("n/a", pos)) != std::string::npos; ++pos) ++na;
  EXPECT_EQ(na, 4u * 3u);
}
