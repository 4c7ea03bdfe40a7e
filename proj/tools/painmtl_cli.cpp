// painmtl: synthesize data, extract features, run cross-validated experiments.
//
// Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 experiment failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "painmtl/data.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace painmtl;

namespace {

enum Exit { kOk = 0, kIo = 1, kUsage = 2, kExperiment = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::error_code ec;
  if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + p.string());
}

// Config file: a JSON object whose sections ("synth", "train", "experiment")
// mirror SynthConfig, TrainConfig and ExperimentSpec. A key is only applied
// when the matching flag was not given on the command line.
class Overlay {
 public:
  using Setter = std::function<void(const json&)>;

  void bind(const std::string& section, const std::string& key, const CLI::Option* flag, Setter set) {
    keys_[section][key] = {flag, std::move(set)};
  }

  void apply(const fs::path& path) const {
    json doc;
    try {
      doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw UsageError("config " + path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw UsageError("config " + path.string() + ": expected a JSON object");
    for (const auto& [section, body] : doc.items()) {
      const auto sec = keys_.find(section);
      if (sec == keys_.end()) throw UsageError("config: unknown section '" + section + "'");
      if (!body.is_object()) throw UsageError("config: section '" + section + "' must be an object");
      for (const auto& [key, value] : body.items()) {
        const auto it = sec->second.find(key);
        if (it == sec->second.end()) throw UsageError("config: unknown key '" + section + "." + key + "'");
        if (it->second.first && it->second.first->count() > 0) continue;
        try {
          it->second.second(value);
        } catch (const json::exception& e) {
          throw UsageError("config: bad value for '" + section + "." + key + "': " + e.what());
        }
      }
    }
  }

 private:
  std::map<std::string, std::map<std::string, std::pair<const CLI::Option*, Setter>>> keys_;
};

template <typename T>
Overlay::Setter assign(T& target) {
  return [&target](const json& v) { target = v.get<T>(); };
}

fs::path default_results_dir() {
  if (const char* env = std::getenv("PAINMTL_RESULTS_DIR"); env && *env) return env;
  return "results";
}

// A directory resolves to features.csv when present, else dataset.csv.
Dataset load_data(const fs::path& path, const ExtractionConfig& ext, std::size_t jobs,
                  std::size_t* invalid_hrv = nullptr) {
  fs::path file = path;
  if (fs::is_directory(path)) {
    file = path / "features.csv";
    if (!fs::exists(file)) file = path / "dataset.csv";
    if (!fs::exists(file)) throw UsageError("no features.csv or dataset.csv in " + path.string());
  } else if (!fs::exists(path)) {
    throw UsageError("data path does not exist: " + path.string());
  }
  std::istringstream in(read_file(file));
  Dataset ds = load_csv(in);
  bool raw = false;
  for (const auto& s : ds.samples) raw = raw || !s.features;
  const std::size_t invalid = raw ? extract_all(ds, ext, jobs) : 0;
  if (invalid_hrv) *invalid_hrv = invalid;
  return ds;
}

struct NnFlags {
  TrainConfig cfg;
  std::vector<std::size_t> shared = {32};
  std::vector<std::size_t> task = {8};
  std::string optimizer = "adam";
};

void add_nn_flags(CLI::App* cmd, NnFlags& f, Overlay& ov) {
  auto* lr = cmd->add_option("--lr", f.cfg.learning_rate, "Learning rate")->capture_default_str();
  auto* bs = cmd->add_option("--batch-size", f.cfg.batch_size, "Mini-batch size")
                 ->check(CLI::PositiveNumber)
                 ->capture_default_str();
  auto* ep = cmd->add_option("--epochs", f.cfg.max_epochs, "Maximum training epochs")
                 ->check(CLI::PositiveNumber)
                 ->capture_default_str();
  auto* dr = cmd->add_option("--dropout", f.cfg.dropout_rate, "Dropout rate in [0, 1)")
                 ->check(CLI::Range(0.0, 0.999999))
                 ->capture_default_str();
  auto* mn = cmd->add_option("--max-norm", f.cfg.max_norm, "Max-norm bound on each unit's incoming weights")
                 ->capture_default_str();
  auto* pa = cmd->add_option("--patience", f.cfg.patience, "Early-stopping patience in epochs")->capture_default_str();
  auto* vf = cmd->add_option("--val-fraction", f.cfg.validation_fraction, "Validation fraction")
                 ->check(CLI::Range(0.0, 0.9))
                 ->capture_default_str();
  auto* op = cmd->add_option("--optimizer", f.optimizer, "adam or sgd")
                 ->check(CLI::IsMember({"adam", "sgd"}))
                 ->capture_default_str();
  auto* sh = cmd->add_option("--shared-layers", f.shared, "Shared hidden layer widths")->capture_default_str();
  auto* tl = cmd->add_option("--task-layers", f.task, "Per-task hidden layer widths")->capture_default_str();
  ov.bind("train", "learning_rate", lr, assign(f.cfg.learning_rate));
  ov.bind("train", "batch_size", bs, assign(f.cfg.batch_size));
  ov.bind("train", "max_epochs", ep, assign(f.cfg.max_epochs));
  ov.bind("train", "dropout_rate", dr, assign(f.cfg.dropout_rate));
  ov.bind("train", "max_norm", mn, assign(f.cfg.max_norm));
  ov.bind("train", "patience", pa, assign(f.cfg.patience));
  ov.bind("train", "validation_fraction", vf, assign(f.cfg.validation_fraction));
  ov.bind("train", "optimizer", op, assign(f.optimizer));
  ov.bind("train", "shared_layers", sh, assign(f.shared));
  ov.bind("train", "task_layers", tl, assign(f.task));
}

// synth

struct SynthArgs {
  SynthConfig cfg;
  fs::path out;
  std::optional<fs::path> config;
};

int cmd_synth(const SynthArgs& a) {
  const SynthResult r = synthesize_dataset(a.cfg);
  std::ostringstream data, truth;
  save_raw_csv(r.dataset, data);
  save_ground_truth_csv(r.dataset, r.truth, truth);
  write_file(a.out / "dataset.csv", data.str());
  write_file(a.out / "ground_truth.csv", truth.str());
  std::cout << "wrote " << r.dataset.size() << " samples (" << a.cfg.n_subjects << " subjects x 5 classes x "
            << a.cfg.per_class << ") to " << (a.out / "dataset.csv").string() << "\n";
  return kOk;
}

// extract

void add_band_flags(CLI::App* cmd, ExtractionConfig& ext) {
  cmd->add_option("--ecg-low", ext.ecg_band.low_hz, "ECG bandpass low edge (Hz)")->capture_default_str();
  cmd->add_option("--ecg-high", ext.ecg_band.high_hz, "ECG bandpass high edge (Hz), below Nyquist")
      ->capture_default_str();
}

struct ExtractArgs {
  fs::path data;
  ExtractionConfig ext;
  std::optional<fs::path> out;
  std::size_t jobs = 1;
};

int cmd_extract(const ExtractArgs& a) {
  fs::path in = a.data;
  if (fs::is_directory(in)) in = in / "dataset.csv";
  if (!fs::exists(in)) throw UsageError("data path does not exist: " + in.string());
  std::istringstream text(read_file(in));
  Dataset ds = load_csv(text);
  const std::size_t invalid = extract_all(ds, a.ext, a.jobs);
  const fs::path out = a.out ? *a.out : in.parent_path() / "features.csv";
  std::ostringstream csv;
  save_features_csv(ds, csv);
  write_file(out, csv.str());
  std::cout << "extracted " << ds.size() << " windows to " << out.string() << "; " << invalid
            << " without usable HRV features\n";
  return kOk;
}

// run

struct RunArgs {
  fs::path data;
  std::optional<fs::path> out;
  std::optional<fs::path> config;
  std::string classifier = "mtnn";
  std::string features = "sc+ecg";
  std::string task = "P4";
  ExperimentSpec spec;
  ExperimentOptions opt;
  ExtractionConfig ext;
  NnFlags nn;
  bool sweep = false;
  std::string format = "human";
};

int cmd_run(RunArgs& a) {
  if (!fs::exists(a.data)) throw UsageError("data path does not exist: " + a.data.string());
  std::vector<ExperimentSpec> specs;
  try {
    a.spec.classifier = parse_classifier(a.classifier);
    a.spec.feature_set = parse_feature_set(a.features);
    a.spec.task = parse_label(a.task);
    a.spec.validate();
    a.nn.cfg.optimizer = a.nn.optimizer == "sgd" ? Optimizer::Sgd : Optimizer::Adam;
    a.nn.cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  a.opt.nn = a.nn.cfg;
  a.opt.shared_layers = a.nn.shared;
  a.opt.task_layers = a.nn.task;

  if (a.sweep) {
    for (ClassLabel t : kAllTasks)
      for (Classifier c : kAllClassifiers)
        for (FeatureSet f : kAllFeatureSets) {
          ExperimentSpec s = a.spec;
          s.task = t;
          s.classifier = c;
          s.feature_set = f;
          specs.push_back(s);
        }
  } else {
    specs.push_back(a.spec);
  }

  std::size_t invalid = 0;
  const Dataset ds = load_data(a.data, a.ext, a.opt.jobs, &invalid);
  if (invalid > 0) std::cerr << invalid << " windows without usable HRV features (kept as masked zeros)\n";

  std::vector<CvReport> reports;
  int status = kOk;
  for (const auto& s : specs) {
    try {
      reports.push_back(run_experiment(s, ds, a.opt));
    } catch (const Error& e) {
      std::cerr << "experiment " << to_string(s.classifier) << " " << to_string(s.feature_set) << " BLN vs "
                << to_string(s.task) << " failed: " << e.what() << "\n";
      status = kExperiment;
    }
  }

  const fs::path out = a.out ? *a.out : default_results_dir();
  std::ostringstream folds;
  write_fold_csv(reports, folds);
  write_file(out / "folds.csv", folds.str());
  write_file(out / "summary.csv", report_table(reports, TableFormat::Csv));
  std::cout << report_table(reports, a.format == "csv" ? TableFormat::Csv : TableFormat::Human);
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized pain recognition from skin conductance and ECG"};
  app.require_subcommand(1);
  Overlay synth_ov, run_ov;

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Write a synthetic raw dataset and its ground truth");
  auto* s_subj = synth->add_option("--subjects", sa.cfg.n_subjects, "Number of subjects")
                     ->check(CLI::PositiveNumber)
                     ->capture_default_str();
  auto* s_pc = synth->add_option("--per-class", sa.cfg.per_class, "Windows per subject and class")
                   ->check(CLI::PositiveNumber)
                   ->capture_default_str();
  auto* s_fs = synth->add_option("--sample-rate", sa.cfg.sample_rate_hz, "Sample rate in Hz (>= 100)")
                   ->check(CLI::Range(100.0, 1e6))
                   ->capture_default_str();
  auto* s_eff = synth->add_option("--effect-size", sa.cfg.effect_size, "Phasic SC increment at P4 (uS)")
                    ->check(CLI::NonNegativeNumber)
                    ->capture_default_str();
  auto* s_het = synth
                    ->add_option("--heterogeneity", sa.cfg.subject_heterogeneity,
                                 "Subject heterogeneity in [0, 1]; h/2 of subjects respond in reverse")
                    ->check(CLI::Range(0.0, 1.0))
                    ->capture_default_str();
  auto* s_noise = synth->add_option("--noise", sa.cfg.noise_sd, "Measurement noise sd")
                      ->check(CLI::NonNegativeNumber)
                      ->capture_default_str();
  auto* s_seed = synth->add_option("--seed", sa.cfg.seed, "Random seed")->capture_default_str();
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--config", sa.config, "JSON config file (flags take precedence)");
  synth_ov.bind("synth", "n_subjects", s_subj, assign(sa.cfg.n_subjects));
  synth_ov.bind("synth", "per_class", s_pc, assign(sa.cfg.per_class));
  synth_ov.bind("synth", "sample_rate_hz", s_fs, assign(sa.cfg.sample_rate_hz));
  synth_ov.bind("synth", "effect_size", s_eff, assign(sa.cfg.effect_size));
  synth_ov.bind("synth", "subject_heterogeneity", s_het, assign(sa.cfg.subject_heterogeneity));
  synth_ov.bind("synth", "noise_sd", s_noise, assign(sa.cfg.noise_sd));
  synth_ov.bind("synth", "seed", s_seed, assign(sa.cfg.seed));

  ExtractArgs ea;
  auto* extract = app.add_subcommand("extract", "Compute the 17 features of every window of a raw CSV");
  extract->add_option("--data", ea.data, "Raw CSV, or a directory holding dataset.csv")->required();
  extract->add_option("--out", ea.out, "Feature CSV (default: features.csv next to the input)");
  add_band_flags(extract, ea.ext);
  extract->add_option("--jobs", ea.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Cross-validate one experiment, or the full grid with --sweep");
  run->add_option("--data", ra.data, "Feature or raw CSV, or a directory holding one")->required();
  auto* r_cls = run->add_option("--classifier", ra.classifier, "lr, svm-l, stnn or mtnn")->capture_default_str();
  auto* r_feat = run->add_option("--features", ra.features, "sc, ecg or sc+ecg")->capture_default_str();
  auto* r_task = run->add_option("--task", ra.task, "Positive class against BLN: P1..P4")->capture_default_str();
  auto* r_k = run->add_option("--k", ra.spec.k, "Number of folds")->capture_default_str();
  auto* r_seed = run->add_option("--seed", ra.spec.seed, "Random seed")->capture_default_str();
  auto* r_l2 = run->add_option("--l2", ra.opt.l2, "Logistic regression L2 penalty")->capture_default_str();
  auto* r_c = run->add_option("--svm-c", ra.opt.svm_c, "Linear SVM C")->capture_default_str();
  auto* r_grid = run->add_flag("--grid-search", ra.opt.grid_search,
                               "Select L2 / C per fold by inner 3-fold search over {0.01, 0.1, 1, 10}");
  auto* r_glob = run->add_flag("--global-standardization", ra.opt.global_standardization,
                               "Standardize on the whole binary dataset instead of each training partition");
  run->add_flag("--sweep", ra.sweep, "Run all 4 tasks x 4 classifiers x 3 feature sets");
  run->add_option("--out", ra.out, "Results directory (default: $PAINMTL_RESULTS_DIR or ./results)");
  run->add_option("--format", ra.format, "Table printed to stdout")
      ->check(CLI::IsMember({"human", "csv"}))
      ->capture_default_str();
  run->add_option("--jobs", ra.opt.jobs, "Folds trained concurrently")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  run->add_option("--config", ra.config, "JSON config file (flags take precedence)");
  add_nn_flags(run, ra.nn, run_ov);
  add_band_flags(run, ra.ext);
  run_ov.bind("experiment", "classifier", r_cls, assign(ra.classifier));
  run_ov.bind("experiment", "feature_set", r_feat, assign(ra.features));
  run_ov.bind("experiment", "task", r_task, assign(ra.task));
  run_ov.bind("experiment", "k", r_k, assign(ra.spec.k));
  run_ov.bind("experiment", "seed", r_seed, assign(ra.spec.seed));
  run_ov.bind("experiment", "l2", r_l2, assign(ra.opt.l2));
  run_ov.bind("experiment", "svm_c", r_c, assign(ra.opt.svm_c));
  run_ov.bind("experiment", "grid_search", r_grid, assign(ra.opt.grid_search));
  run_ov.bind("experiment", "global_standardization", r_glob, assign(ra.opt.global_standardization));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) {
      if (sa.config) synth_ov.apply(*sa.config);
      try {
        return cmd_synth(sa);
      } catch (const ConfigError& e) {
        throw UsageError(e.what());
      }
    }
    if (*extract) return cmd_extract(ea);
    if (*run) {
      if (ra.config) run_ov.apply(*ra.config);
      return cmd_run(ra);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const LabelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const BandEdgeError& e) {
    std::cerr << "error: " << e.what() << " (set --ecg-low/--ecg-high for this sample rate)\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExperiment;
  }
  return kUsage;
}
