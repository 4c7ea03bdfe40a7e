#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "painmtl/baselines.hpp"
#include "painmtl/data.hpp"
#include "painmtl/nn.hpp"

namespace painmtl {

enum class Classifier { LR, SvmLinear, StNn, MtNn };
enum class FeatureSet { SC, ECG, SCECG };

inline constexpr Classifier kAllClassifiers[] = {Classifier::LR, Classifier::SvmLinear, Classifier::StNn,
                                                 Classifier::MtNn};
inline constexpr FeatureSet kAllFeatureSets[] = {FeatureSet::SC, FeatureSet::ECG, FeatureSet::SCECG};
inline constexpr ClassLabel kAllTasks[] = {ClassLabel::P4, ClassLabel::P3, ClassLabel::P2, ClassLabel::P1};

// Display names: LR, SVM-L, ST-NN, MT-NN and SC, ECG, SC+ECG.
std::string_view to_string(Classifier c);
std::string_view to_string(FeatureSet f);
// Case-insensitive; dashes optional ("mtnn", "MT-NN", "svm-l", "sc+ecg").
// Throw ConfigError.
Classifier parse_classifier(std::string_view text);
FeatureSet parse_feature_set(std::string_view text);

// Column indices into the 17-feature vector: SC 0-11, ECG 12-16, SC+ECG is
// their concatenation.
std::vector<std::size_t> feature_columns(FeatureSet f);

struct ExperimentSpec {
  Classifier classifier = Classifier::MtNn;
  FeatureSet feature_set = FeatureSet::SCECG;
  ClassLabel task = ClassLabel::P4;  // positive class against BLN
  std::size_t k = 10;
  std::uint64_t seed = 1;

  // Throws ConfigError.
  void validate() const;
};

struct ExperimentOptions {
  TrainConfig nn{};
  std::vector<std::size_t> shared_layers = {32};
  std::vector<std::size_t> task_layers = {8};
  double l2 = kDefaultL2;
  double svm_c = kDefaultSvmC;
  bool grid_search = false;
  // Fit standardization once on the whole binary dataset instead of on each
  // training partition.
  bool global_standardization = false;
  LinearConfig linear{};
  std::size_t jobs = 1;  // folds trained concurrently
};

struct FoldResult {
  std::size_t fold_index = 0;
  double accuracy = 0.0;
  std::size_t n_test = 0;

  bool operator==(const FoldResult&) const = default;
};

struct CvReport {
  ExperimentSpec spec;
  std::vector<FoldResult> folds;
  double mean_acc = 0.0;  // unweighted mean over folds
  double std_acc = 0.0;   // sample std over folds
  // Windows of the binary dataset whose HRV features are masked invalid.
  std::size_t invalid_hrv_windows = 0;
};

// Mean and sample std of fold accuracies.
void summarize(CvReport& report);

// Binary view -> within-subject stratified folds -> per fold: standardize,
// select columns, train, score. Every sample must carry features (see
// extract_all). Errors inside a fold are rethrown as FoldError.
//
// Seeds: folds use derive_seed(spec.seed, {kFolds}); the model of fold f
// uses derive_seed(spec.seed, {kTraining, f, classifier}).
CvReport run_experiment(const ExperimentSpec& spec, const Dataset& ds, const ExperimentOptions& options = {});

enum class TableFormat { Human, Csv };

// Human: rows grouped by binary task (P4 first) and classifier, columns SC,
// ECG, SC+ECG, cells "mean(std)" in percent with 2 decimals. Task groups
// containing a baseline also show an SVM-RBF row of "n/a". Csv: one summary
// line per report.
std::string report_table(std::span<const CvReport> reports, TableFormat format = TableFormat::Human);

// "82.75(1.86)" for mean 0.8275, std 0.0186.
std::string format_cell(double mean, double std);

// task,classifier,feature_set,fold,accuracy
void write_fold_csv(std::span<const CvReport> reports, std::ostream& out);

}  // namespace painmtl
