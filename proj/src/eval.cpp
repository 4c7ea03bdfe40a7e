#include "painmtl/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "painmtl/errors.hpp"
#include "painmtl/random.hpp"

namespace painmtl {

std::string_view to_string(Classifier c) {
  switch (c) {
    case Classifier::LR:
      return "LR";
    case Classifier::SvmLinear:
      return "SVM-L";
    case Classifier::StNn:
      return "ST-NN";
    case Classifier::MtNn:
      return "MT-NN";
  }
  return "?";
}

std::string_view to_string(FeatureSet f) {
  switch (f) {
    case FeatureSet::SC:
      return "SC";
    case FeatureSet::ECG:
      return "ECG";
    case FeatureSet::SCECG:
      return "SC+ECG";
  }
  return "?";
}

namespace {

std::string normalize(std::string_view text) {
  std::string out;
  for (char ch : text)
    if (ch != '-' && ch != '_') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return out;
}

}  // namespace

Classifier parse_classifier(std::string_view text) {
  const auto n = normalize(text);
  if (n == "lr" || n == "logistic") return Classifier::LR;
  if (n == "svml" || n == "svm") return Classifier::SvmLinear;
  if (n == "stnn") return Classifier::StNn;
  if (n == "mtnn") return Classifier::MtNn;
  throw ConfigError("unknown classifier '" + std::string(text) + "' (expected lr, svm-l, stnn or mtnn)");
}

FeatureSet parse_feature_set(std::string_view text) {
  const auto n = normalize(text);
  if (n == "sc") return FeatureSet::SC;
  if (n == "ecg") return FeatureSet::ECG;
  if (n == "sc+ecg" || n == "all") return FeatureSet::SCECG;
  throw ConfigError("unknown feature set '" + std::string(text) + "' (expected sc, ecg or sc+ecg)");
}

std::vector<std::size_t> feature_columns(FeatureSet f) {
  std::vector<std::size_t> cols;
  const std::size_t lo = f == FeatureSet::ECG ? kNumScFeatures : 0;
  const std::size_t hi = f == FeatureSet::SC ? kNumScFeatures : kNumFeatures;
  for (std::size_t j = lo; j < hi; ++j) cols.push_back(j);
  return cols;
}

void ExperimentSpec::validate() const {
  if (task == ClassLabel::BLN) throw ConfigError("task must be one of P1..P4");
  if (k < 2) throw ConfigError("k must be >= 2");
}

void summarize(CvReport& report) {
  const std::size_t n = report.folds.size();
  report.mean_acc = 0.0;
  report.std_acc = 0.0;
  if (n == 0) return;
  for (const auto& f : report.folds) report.mean_acc += f.accuracy;
  report.mean_acc /= static_cast<double>(n);
  if (n < 2) return;
  double ss = 0.0;
  for (const auto& f : report.folds) ss += (f.accuracy - report.mean_acc) * (f.accuracy - report.mean_acc);
  report.std_acc = std::sqrt(ss / static_cast<double>(n - 1));
}

namespace {

std::vector<double> project(const FeatureVector& f, const std::vector<std::size_t>& cols) {
  std::vector<double> out;
  out.reserve(cols.size());
  for (auto j : cols) out.push_back(f.values[j]);
  return out;
}

double run_fold(const ExperimentSpec& spec, const ExperimentOptions& opt, const Dataset& view,
                const std::vector<std::string>& subjects, const std::vector<FeatureVector>& all_features,
                const std::optional<StandardizationStats>& global_stats, const FoldAssignment& folds, std::size_t fold,
                std::size_t& n_test) {
  const auto train_idx = folds.train_indices(fold);
  const auto test_idx = folds.test_indices(fold);
  n_test = test_idx.size();

  std::vector<FeatureVector> train_rows, test_rows;
  for (auto i : train_idx) train_rows.push_back(all_features[i]);
  for (auto i : test_idx) test_rows.push_back(all_features[i]);
  const StandardizationStats stats = global_stats ? *global_stats : fit_standardization(train_rows);
  train_rows = apply_standardization(train_rows, stats);
  test_rows = apply_standardization(test_rows, stats);

  const auto cols = feature_columns(spec.feature_set);
  const std::uint64_t seed =
      derive_seed(spec.seed, {stream::kTraining, fold, static_cast<std::uint64_t>(spec.classifier)});

  if (spec.classifier == Classifier::LR || spec.classifier == Classifier::SvmLinear) {
    LabeledMatrix tr, te;
    for (std::size_t r = 0; r < train_rows.size(); ++r) {
      tr.x.push_back(project(train_rows[r], cols));
      tr.y.push_back(view.samples[train_idx[r]].binary_target());
    }
    for (std::size_t r = 0; r < test_rows.size(); ++r) {
      te.x.push_back(project(test_rows[r], cols));
      te.y.push_back(view.samples[test_idx[r]].binary_target());
    }
    LinearConfig lc = opt.linear;
    lc.seed = seed;
    const bool logistic = spec.classifier == Classifier::LR;
    const LinearKind kind = logistic ? LinearKind::Logistic : LinearKind::Hinge;
    double reg = logistic ? opt.l2 : opt.svm_c;
    if (opt.grid_search) reg = select_regularization(tr, kind, kRegularizationGrid, lc);
    const LinearModel m = logistic ? train_logistic(tr, reg, lc) : train_linear_svm(tr, reg, lc);
    return linear_accuracy(m, te);
  }

  NetworkSpec ns;
  ns.input_dim = cols.size();
  ns.shared_layers = opt.shared_layers;
  ns.task_layers = opt.task_layers;
  const bool multi = spec.classifier == Classifier::MtNn;
  ns.task_ids = multi ? subjects : std::vector<std::string>{"population"};

  auto to_examples = [&](const std::vector<FeatureVector>& rows, const std::vector<std::size_t>& idx) {
    std::vector<Example> out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Sample& s = view.samples[idx[r]];
      const std::size_t task =
          multi ? static_cast<std::size_t>(std::lower_bound(subjects.begin(), subjects.end(), s.subject_id) -
                                           subjects.begin())
                : 0;
      out.push_back({project(rows[r], cols), s.binary_target(), task});
    }
    return out;
  };
  const auto train_set = to_examples(train_rows, train_idx);
  const auto test_set = to_examples(test_rows, test_idx);
  TrainConfig cfg = opt.nn;
  cfg.seed = seed;
  const TrainResult tr = train(ns, cfg, train_set);
  return predict_accuracy(tr.params, ns, test_set);
}

}  // namespace

CvReport run_experiment(const ExperimentSpec& spec, const Dataset& ds, const ExperimentOptions& opt) {
  spec.validate();
  const Dataset view = binary_view(ds, spec.task);
  if (view.samples.empty()) throw TooFewSamples("no samples for BLN vs " + std::string(to_string(spec.task)));

  CvReport report;
  report.spec = spec;
  std::vector<FeatureVector> features;
  features.reserve(view.samples.size());
  for (const auto& s : view.samples) {
    if (!s.features)
      throw SchemaError("sample of subject " + s.subject_id + " has no features; run feature extraction first");
    features.push_back(*s.features);
    bool hrv_ok = true;
    for (std::size_t j = kNumScFeatures; j < kNumFeatures; ++j) hrv_ok = hrv_ok && s.features->valid[j];
    if (!hrv_ok) ++report.invalid_hrv_windows;
  }

  const auto folds = kfold_split(view, spec.k, derive_seed(spec.seed, {stream::kFolds}));
  const auto subjects = view.subjects();
  std::optional<StandardizationStats> global;
  if (opt.global_standardization) global = fit_standardization(features);

  report.folds.resize(spec.k);
  std::vector<std::exception_ptr> errors(spec.k);
  auto work = [&](std::size_t fold) {
    try {
      std::size_t n_test = 0;
      const double acc = run_fold(spec, opt, view, subjects, features, global, folds, fold, n_test);
      report.folds[fold] = {fold, acc, n_test};
    } catch (const std::exception& e) {
      errors[fold] = std::make_exception_ptr(FoldError(fold, e.what()));
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(opt.jobs, spec.k));
  if (jobs == 1) {
    for (std::size_t f = 0; f < spec.k; ++f) work(f);
  } else {
    for (std::size_t start = 0; start < spec.k; start += jobs) {
      std::vector<std::thread> threads;
      for (std::size_t f = start; f < std::min(spec.k, start + jobs); ++f) threads.emplace_back(work, f);
      for (auto& t : threads) t.join();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  summarize(report);
  return report;
}

std::string format_cell(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f(%.2f)", mean * 100.0, std * 100.0);
  return buf;
}

namespace {

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string report_table(std::span<const CvReport> reports, TableFormat format) {
  std::ostringstream out;
  if (format == TableFormat::Csv) {
    out << "task,classifier,feature_set,k,n_folds,mean_acc,std_acc,invalid_hrv_windows\n";
    for (const auto& r : reports) {
      out << "BLN vs " << to_string(r.spec.task) << ',' << to_string(r.spec.classifier) << ','
          << to_string(r.spec.feature_set) << ',' << r.spec.k << ',' << r.folds.size() << ','
          << format_double(r.mean_acc) << ',' << format_double(r.std_acc) << ',' << r.invalid_hrv_windows << '\n';
    }
    return out.str();
  }

  constexpr std::size_t kTaskW = 13, kClsW = 12, kCellW = 15;
  auto emit = [&out](std::string line) {
    line.erase(line.find_last_not_of(' ') + 1);
    out << line << '\n';
  };
  std::string header = pad("Binary task", kTaskW) + pad("Classifier", kClsW);
  for (FeatureSet f : kAllFeatureSets) header += pad(std::string(to_string(f)), kCellW);
  emit(header);

  // (task, classifier, feature set) -> cell; the last report wins on duplicates.
  std::map<std::tuple<int, int, int>, std::string> cells;
  for (const auto& r : reports)
    cells[{static_cast<int>(r.spec.task), static_cast<int>(r.spec.classifier), static_cast<int>(r.spec.feature_set)}] =
        format_cell(r.mean_acc, r.std_acc);

  auto has_row = [&](ClassLabel task, Classifier c) {
    for (FeatureSet f : kAllFeatureSets)
      if (cells.count({static_cast<int>(task), static_cast<int>(c), static_cast<int>(f)})) return true;
    return false;
  };

  for (ClassLabel task : kAllTasks) {
    bool first = true;
    auto label = [&] {
      std::string s = first ? "BLN vs " + std::string(to_string(task)) : "";
      first = false;
      return pad(s, kTaskW);
    };
    const bool baselines = has_row(task, Classifier::LR) || has_row(task, Classifier::SvmLinear);
    for (Classifier c : kAllClassifiers) {
      if (has_row(task, c)) {
        std::string row = label() + pad(std::string(to_string(c)), kClsW);
        for (FeatureSet f : kAllFeatureSets) {
          const auto it = cells.find({static_cast<int>(task), static_cast<int>(c), static_cast<int>(f)});
          row += pad(it == cells.end() ? "-" : it->second, kCellW);
        }
        emit(row);
      }
      if (c == Classifier::SvmLinear && baselines) {
        std::string row = label() + pad("SVM-RBF", kClsW);
        for (std::size_t i = 0; i < 3; ++i) row += pad("n/a", kCellW);
        emit(row);
      }
    }
  }
  return out.str();
}

void write_fold_csv(std::span<const CvReport> reports, std::ostream& out) {
  out << "task,classifier,feature_set,fold,accuracy\n";
  for (const auto& r : reports)
    for (const auto& f : r.folds)
      out << "BLN vs " << to_string(r.spec.task) << ',' << to_string(r.spec.classifier) << ','
          << to_string(r.spec.feature_set) << ',' << f.fold_index << ',' << format_double(f.accuracy) << '\n';
}

}  // namespace painmtl
