#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "painmtl/errors.hpp"
#include "painmtl/eval.hpp"

using namespace painmtl;

namespace {

Dataset featured(std::size_t subjects, std::size_t per_class, double effect, double heterogeneity, std::uint64_t seed) {
  SynthConfig c;
  c.n_subjects = subjects;
  c.per_class = per_class;
  c.effect_size = effect;
  c.subject_heterogeneity = heterogeneity;
  c.seed = seed;
  auto ds = synthesize_dataset(c).dataset;
  extract_all(ds);
  return ds;
}

const Dataset& shared_data() {
  static const Dataset ds = featured(4, 10, 1.0, 0.0, 5);
  return ds;
}

ExperimentOptions quick() {
  ExperimentOptions o;
  o.nn.max_epochs = 30;
  return o;
}

}  // namespace

TEST(ParseTest, NamesRoundTrip) {
  for (Classifier c : kAllClassifiers) EXPECT_EQ(parse_classifier(to_string(c)), c);
  for (FeatureSet f : kAllFeatureSets) EXPECT_EQ(parse_feature_set(to_string(f)), f);
  EXPECT_EQ(parse_classifier("mtnn"), Classifier::MtNn);
  EXPECT_EQ(parse_classifier("svm-l"), Classifier::SvmLinear);
  EXPECT_EQ(parse_feature_set("sc+ecg"), FeatureSet::SCECG);
  EXPECT_THROW(parse_classifier("svm-rbf"), ConfigError);
  EXPECT_THROW(parse_feature_set("emg"), ConfigError);
}

TEST(FeatureColumnsTest, Projection) {
  EXPECT_EQ(feature_columns(FeatureSet::SC).size(), 12u);
  EXPECT_EQ(feature_columns(FeatureSet::ECG).front(), 12u);
  EXPECT_EQ(feature_columns(FeatureSet::ECG).size(), 5u);
  EXPECT_EQ(feature_columns(FeatureSet::SCECG).size(), 17u);
}

TEST(ExperimentSpecTest, Validation) {
  ExperimentSpec s;
  s.task = ClassLabel::BLN;
  EXPECT_THROW(s.validate(), ConfigError);
  s.task = ClassLabel::P1;
  s.k = 1;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(FormatTest, Cells) {
  EXPECT_EQ(format_cell(0.8275, 0.0186), "82.75(1.86)");
  EXPECT_EQ(format_cell(0.5, 0.0), "50.00(0.00)");
  EXPECT_EQ(format_cell(1.0, 0.1), "100.00(10.00)");
}

TEST(ReportTableTest, EmptyIsHeaderOnly) {
  const auto text = report_table({});
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_NE(text.find("SC+ECG"), std::string::npos);
  const auto csv = report_table({}, TableFormat::Csv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
}

TEST(ReportTableTest, FullGridLayout) {
  std::vector<CvReport> reports;
  for (ClassLabel t : kAllTasks)
    for (Classifier c : kAllClassifiers)
      for (FeatureSet f : kAllFeatureSets) {
        CvReport r;
        r.spec.task = t;
        r.spec.classifier = c;
        r.spec.feature_set = f;
        r.mean_acc = 0.8275;
        r.std_acc = 0.0186;
        reports.push_back(r);
      }
  const auto text = report_table(reports);
  std::istringstream in(text);
  std::string line;
  int result_rows = 0, na_rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.find("n/a") != std::string::npos)
      ++na_rows;
    else if (line.find("82.75(1.86)") != std::string::npos)
      ++result_rows;
  }
  EXPECT_EQ(result_rows, 16);
  EXPECT_EQ(na_rows, 4);
  EXPECT_LT(text.find("BLN vs P4"), text.find("BLN vs P1"));
  const auto csv = report_table(reports, TableFormat::Csv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 49);
}

TEST(ReportTableTest, MissingCellsShowDash) {
  CvReport r;
  r.spec.classifier = Classifier::MtNn;
  r.spec.feature_set = FeatureSet::SC;
  r.mean_acc = 0.9;
  const auto text = report_table({&r, 1});
  EXPECT_NE(text.find("90.00(0.00)"), std::string::npos);
  EXPECT_NE(text.find(" -"), std::string::npos);
  EXPECT_EQ(text.find("SVM-RBF"), std::string::npos);
}

TEST(SummarizeTest, MeanAndSampleStd) {
  CvReport r;
  for (double a : {0.5, 0.75, 1.0}) r.folds.push_back({r.folds.size(), a, 4});
  summarize(r);
  EXPECT_DOUBLE_EQ(r.mean_acc, 0.75);
  EXPECT_DOUBLE_EQ(r.std_acc, 0.25);
}

TEST(RunExperimentTest, StrongEffectLinearSeparates) {
  ExperimentSpec s;
  s.classifier = Classifier::LR;
  s.feature_set = FeatureSet::SC;
  s.k = 5;
  const auto r = run_experiment(s, shared_data());
  ASSERT_EQ(r.folds.size(), 5u);
  EXPECT_GE(r.mean_acc, 0.95);
  double m = 0.0;
  for (const auto& f : r.folds) {
    m += f.accuracy;
    EXPECT_EQ(f.n_test, 16u);
  }
  EXPECT_NEAR(r.mean_acc, m / 5.0, 1e-12);
}

TEST(RunExperimentTest, DeterministicAndThreadIndependent) {
  ExperimentSpec s;
  s.classifier = Classifier::MtNn;
  s.k = 5;
  auto o = quick();
  const auto a = run_experiment(s, shared_data(), o);
  const auto b = run_experiment(s, shared_data(), o);
  o.jobs = 3;
  const auto c = run_experiment(s, shared_data(), o);
  EXPECT_EQ(a.folds, b.folds);
  EXPECT_EQ(a.folds, c.folds);
  EXPECT_EQ(a.mean_acc, c.mean_acc);
}

TEST(RunExperimentTest, EcgColumnsOfZerosMatchScOnly) {
  Dataset zeroed = shared_data();
  for (auto& smp : zeroed.samples)
    for (std::size_t j = kNumScFeatures; j < kNumFeatures; ++j) smp.features->values[j] = 0.0;
  ExperimentSpec sc;
  sc.classifier = Classifier::LR;
  sc.feature_set = FeatureSet::SC;
  sc.k = 5;
  ExperimentSpec all = sc;
  all.feature_set = FeatureSet::SCECG;
  EXPECT_EQ(run_experiment(sc, zeroed).folds, run_experiment(all, zeroed).folds);
}

TEST(RunExperimentTest, CountsInvalidHrvWindows) {
  Dataset ds = shared_data();
  for (std::size_t i = 0; i < ds.size(); i += 9) ds.samples[i].features->valid[14] = false;
  ExperimentSpec s;
  s.classifier = Classifier::LR;
  s.k = 5;
  std::size_t expected = 0;
  for (std::size_t i = 0; i < ds.size(); i += 9)
    if (ds.samples[i].label == ClassLabel::BLN || ds.samples[i].label == ClassLabel::P4) ++expected;
  EXPECT_EQ(run_experiment(s, ds).invalid_hrv_windows, expected);
}

TEST(RunExperimentTest, Errors) {
  Dataset raw = synthesize_dataset({.n_subjects = 2, .per_class = 3, .sample_rate_hz = 128.0}).dataset;
  ExperimentSpec s;
  s.k = 2;
  EXPECT_THROW(run_experiment(s, raw), SchemaError);

  ExperimentSpec too_many = s;
  too_many.k = 20;
  EXPECT_THROW(run_experiment(too_many, shared_data()), TooFewSamples);

  // A fold whose training partition has one class only.
  Dataset one_sided = shared_data();
  ExperimentSpec lr;
  lr.classifier = Classifier::LR;
  lr.task = ClassLabel::P3;
  lr.k = 2;
  Dataset no_p3;
  for (const auto& smp : one_sided.samples)
    if (smp.label != ClassLabel::P3) no_p3.samples.push_back(smp);
  try {
    run_experiment(lr, no_p3);
    FAIL() << "expected FoldError";
  } catch (const FoldError& e) {
    EXPECT_EQ(e.fold(), 0u);
    EXPECT_NE(std::string(e.what()).find("fold 0"), std::string::npos);
  }
}

TEST(FoldCsvTest, Layout) {
  CvReport r;
  r.spec.classifier = Classifier::StNn;
  r.spec.feature_set = FeatureSet::ECG;
  r.spec.task = ClassLabel::P2;
  r.folds = {{0, 0.5, 4}, {1, 0.75, 4}};
  std::ostringstream out;
  write_fold_csv({&r, 1}, out);
  EXPECT_EQ(out.str(),
            "task,classifier,feature_set,fold,accuracy\nBLN vs P2,ST-NN,ECG,0,0.5\nBLN vs P2,ST-NN,ECG,1,0.75\n");
}
