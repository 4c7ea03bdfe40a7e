#include "painmtl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <thread>

#include "painmtl/errors.hpp"
#include "painmtl/random.hpp"

namespace painmtl {

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::BLN:
      return "BLN";
    case ClassLabel::P1:
      return "P1";
    case ClassLabel::P2:
      return "P2";
    case ClassLabel::P3:
      return "P3";
    case ClassLabel::P4:
      return "P4";
  }
  return "?";
}

ClassLabel parse_label(std::string_view text) {
  for (ClassLabel l : kAllLabels)
    if (to_string(l) == text) return l;
  throw LabelError("unknown class label '" + std::string(text) + "' (expected BLN, P1, P2, P3 or P4)");
}

std::vector<std::string> Dataset::subjects() const {
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.subject_id);
  return {ids.begin(), ids.end()};
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- CSV

namespace {

const std::vector<std::string> kRawHeader = {"subject_id", "label", "sample_rate_hz", "sc_window", "ecg_window"};

std::vector<std::string> features_header() {
  std::vector<std::string> h = {"subject_id", "label"};
  for (std::size_t i = 0; i < kNumFeatures; ++i) h.push_back((i < 10 ? "f0" : "f") + std::to_string(i));
  for (std::size_t i = 0; i < kNumFeatures; ++i) h.push_back((i < 10 ? "mask0" : "mask") + std::to_string(i));
  return h;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view text, std::size_t row, std::string_view column) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
    throw ParseError(row, "invalid number '" + std::string(text) + "' in column " + std::string(column));
  return v;
}

std::optional<SampledSignal> parse_window(std::string_view cell, double fs, std::size_t row, std::string_view column) {
  if (cell.empty()) return std::nullopt;
  std::vector<double> samples;
  for (auto tok : split(cell, ';')) samples.push_back(parse_double(tok, row, column));
  SampledSignal sig(std::move(samples), fs);
  if (std::abs(sig.duration_s() - kWindowDurationS) > 1.0 / fs + 1e-12)
    throw SchemaError("row " + std::to_string(row) + ": " + std::string(column) + " lasts " +
                      format_double(sig.duration_s()) + " s, expected 5.5 s");
  return sig;
}

void check_subject_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",;\r\n\"") != std::string::npos)
    throw SchemaError("subject id '" + id + "' is empty or contains a separator character");
}

void write_window(std::ostream& out, const std::optional<SampledSignal>& w) {
  if (!w) return;
  bool first = true;
  for (double v : w->samples()) {
    if (!first) out << ';';
    out << format_double(v);
    first = false;
  }
}

}  // namespace

Dataset load_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty input: header row is mandatory");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  for (auto h : split(line, ',')) header.emplace_back(h);

  const auto feat_header = features_header();
  const bool raw = header == kRawHeader;
  const bool feats = header == feat_header;
  if (!raw && !feats) {
    for (const auto& col : {"subject_id", "label"})
      if (std::find(header.begin(), header.end(), col) == header.end())
        throw SchemaError(std::string("missing column '") + col + "'");
    throw SchemaError(
        "header matches neither the raw schema (subject_id,label,sample_rate_hz,sc_window,ecg_window) nor "
        "the feature schema (subject_id,label,f00..f16,mask00..mask16)");
  }

  Dataset ds;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw ParseError(row,
                       "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
    Sample s;
    s.subject_id = std::string(cells[0]);
    if (s.subject_id.empty()) throw ParseError(row, "empty subject_id");
    try {
      s.label = parse_label(cells[1]);
    } catch (const LabelError& e) {
      throw LabelError("row " + std::to_string(row) + ": " + e.what());
    }
    if (raw) {
      const double fs = parse_double(cells[2], row, "sample_rate_hz");
      if (!(fs > 0.0)) throw ParseError(row, "sample_rate_hz must be positive");
      try {
        s.sc_window = parse_window(cells[3], fs, row, "sc_window");
        s.ecg_window = parse_window(cells[4], fs, row, "ecg_window");
      } catch (const InvalidSignal& e) {
        throw ParseError(row, e.what());
      }
      if (!s.sc_window && !s.ecg_window) throw ParseError(row, "both windows are empty");
    } else {
      FeatureVector f;
      for (std::size_t j = 0; j < kNumFeatures; ++j) {
        f.values[j] = parse_double(cells[2 + j], row, header[2 + j]);
        const auto m = cells[2 + kNumFeatures + j];
        if (m == "1") {
          f.valid[j] = true;
        } else if (m == "0") {
          f.valid[j] = false;
        } else {
          throw ParseError(row, "mask column " + header[2 + kNumFeatures + j] + " must be 0 or 1");
        }
      }
      s.features = f;
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open " + path.string());
  return load_csv(in);
}

void save_raw_csv(const Dataset& ds, std::ostream& out) {
  for (std::size_t i = 0; i < kRawHeader.size(); ++i) out << (i ? "," : "") << kRawHeader[i];
  out << '\n';
  for (const auto& s : ds.samples) {
    check_subject_id(s.subject_id);
    const SampledSignal* ref = s.sc_window ? &*s.sc_window : s.ecg_window ? &*s.ecg_window : nullptr;
    if (ref == nullptr) throw SchemaError("sample of subject " + s.subject_id + " has no raw window");
    if (s.sc_window && s.ecg_window && s.sc_window->sample_rate_hz() != s.ecg_window->sample_rate_hz())
      throw SchemaError("SC and ECG windows of subject " + s.subject_id + " differ in sample rate");
    out << s.subject_id << ',' << to_string(s.label) << ',' << format_double(ref->sample_rate_hz()) << ',';
    write_window(out, s.sc_window);
    out << ',';
    write_window(out, s.ecg_window);
    out << '\n';
  }
}

void save_features_csv(const Dataset& ds, std::ostream& out) {
  const auto header = features_header();
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& s : ds.samples) {
    check_subject_id(s.subject_id);
    if (!s.features) throw SchemaError("sample of subject " + s.subject_id + " has no features");
    out << s.subject_id << ',' << to_string(s.label);
    for (double v : s.features->values) out << ',' << format_double(v);
    for (bool m : s.features->valid) out << ',' << (m ? '1' : '0');
    out << '\n';
  }
}

// ---------------------------------------------------------------- synthesis

namespace {

struct Wave {
  double offset_s;  // relative to the R peak, scaled by sqrt(RR) for P and T
  double amplitude_mv;
  double width_s;
  bool rate_scaled;
};

// P, Q, R, S, T as Gaussian bumps.
constexpr std::array<Wave, 5> kEcgWaves = {{
    {-0.16, 0.12, 0.020, true},
    {-0.025, -0.10, 0.008, false},
    {0.0, 1.0, 0.010, false},
    {0.025, -0.20, 0.008, false},
    {0.26, 0.30, 0.045, true},
}};

constexpr std::array<double, 5> kClassLevel = {0.0, 0.25, 0.5, 0.75, 1.0};

// Spontaneous phasic activity present in every window (uS).
constexpr double kBasePhasicUs = 0.2;

double quantize(double v) { return std::round(v * 1e5) / 1e5; }

std::size_t window_samples(double fs) { return static_cast<std::size_t>(std::lround(kWindowDurationS * fs)); }

// Logistic rise starting about 1 s into the window, exponential recovery
// after 3 s.
double phasic_shape(double t) {
  const double rise = 1.0 / (1.0 + std::exp(-(t - 1.75) / 0.25));
  const double recovery = t > 3.0 ? std::exp(-(t - 3.0) / 3.0) : 1.0;
  return rise * recovery;
}

}  // namespace

SampledSignal render_ecg(std::span<const double> beats, double duration_s, double fs, double noise_sd,
                         std::uint64_t seed) {
  if (!(fs > 0.0) || !(duration_s > 0.0)) throw ConfigError("ECG duration and sample rate must be positive");
  if (noise_sd < 0.0) throw ConfigError("noise_sd must be non-negative");
  const auto n = static_cast<std::size_t>(std::lround(duration_s * fs));
  std::vector<double> x(n, 0.0);
  for (std::size_t b = 0; b < beats.size(); ++b) {
    double rr = 1.0;
    if (b + 1 < beats.size()) {
      rr = beats[b + 1] - beats[b];
    } else if (b > 0) {
      rr = beats[b] - beats[b - 1];
    }
    const double scale = std::sqrt(std::clamp(rr, 0.2, 2.0));
    for (const Wave& w : kEcgWaves) {
      const double centre = beats[b] + (w.rate_scaled ? w.offset_s * scale : w.offset_s);
      const auto lo = static_cast<std::ptrdiff_t>(std::floor((centre - 5.0 * w.width_s) * fs));
      const auto hi = static_cast<std::ptrdiff_t>(std::ceil((centre + 5.0 * w.width_s) * fs));
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0);
           i <= std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(n) - 1); ++i) {
        const double d = (static_cast<double>(i) / fs - centre) / w.width_s;
        x[static_cast<std::size_t>(i)] += w.amplitude_mv * std::exp(-0.5 * d * d);
      }
    }
  }
  if (noise_sd > 0.0) {
    Rng rng(derive_seed(seed, {stream::kNoise}));
    for (double& v : x) v += noise_sd * rng.normal();
  }
  return SampledSignal(std::move(x), fs);
}

SynthEcg synthesize_ecg(double heart_rate_bpm, double duration_s, double fs, double noise_sd, std::uint64_t seed) {
  if (!(heart_rate_bpm >= 30.0 && heart_rate_bpm <= 220.0))
    throw ConfigError("heart rate must be within [30, 220] bpm");
  if (!(duration_s > 0.0) || !(fs > 0.0)) throw ConfigError("duration and sample rate must be positive");
  const double rr = 60.0 / heart_rate_bpm;
  BeatSeries beats;
  for (std::size_t k = 0;; ++k) {
    const double t = rr / 2.0 + static_cast<double>(k) * rr;
    if (t >= duration_s) break;
    beats.beat_times_s.push_back(t);
  }
  return {render_ecg(beats.beat_times_s, duration_s, fs, noise_sd, seed), std::move(beats)};
}

SynthResult synthesize_dataset(const SynthConfig& cfg) {
  if (cfg.n_subjects < 1) throw ConfigError("n_subjects must be >= 1");
  if (cfg.per_class < 1) throw ConfigError("per_class must be >= 1");
  if (!(cfg.sample_rate_hz >= 100.0)) throw ConfigError("sample_rate_hz must be >= 100");
  if (!(cfg.effect_size >= 0.0)) throw ConfigError("effect_size must be non-negative");
  if (!(cfg.subject_heterogeneity >= 0.0 && cfg.subject_heterogeneity <= 1.0))
    throw ConfigError("subject_heterogeneity must be within [0, 1]");
  if (!(cfg.noise_sd >= 0.0)) throw ConfigError("noise_sd must be non-negative");

  const double fs = cfg.sample_rate_hz;
  const std::size_t n = window_samples(fs);

  // Polarity: exactly round(n_subjects * h / 2) subjects respond in reverse.
  std::vector<double> gain(cfg.n_subjects, 1.0);
  {
    std::vector<std::size_t> order(cfg.n_subjects);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, {stream::kSubject, UINT64_MAX}));
    rng.shuffle(order);
    const auto flipped = static_cast<std::size_t>(
        std::floor(static_cast<double>(cfg.n_subjects) * cfg.subject_heterogeneity / 2.0 + 0.5));
    for (std::size_t i = 0; i < flipped; ++i) gain[order[i]] = -1.0;
  }

  const int width = cfg.n_subjects >= 100 ? 3 : 2;
  SynthResult result;
  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    Rng subj(derive_seed(cfg.seed, {stream::kSubject, s}));
    const double tonic = subj.uniform(1.5, 4.0);
    const double base_hr = subj.uniform(60.0, 80.0);
    std::string id = std::to_string(s + 1);
    id = "S" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0') + id;

    for (ClassLabel label : kAllLabels) {
      const double class_effect = cfg.effect_size * kClassLevel[static_cast<std::size_t>(label)];
      const double mid = cfg.effect_size / 2.0;
      const double response = mid + gain[s] * (class_effect - mid);
      for (std::size_t rep = 0; rep < cfg.per_class; ++rep) {
        Rng win(derive_seed(cfg.seed, {stream::kWindow, s, static_cast<std::uint64_t>(label), rep}));

        const double amplitude = std::max(0.0, (kBasePhasicUs + response) * (1.0 + 0.1 * win.normal()));
        const double drift = win.uniform(-0.05, 0.05);
        std::vector<double> sc(n);
        for (std::size_t i = 0; i < n; ++i) {
          const double t = static_cast<double>(i) / fs;
          sc[i] = quantize(tonic + drift * t + amplitude * phasic_shape(t) + cfg.noise_sd * win.normal());
        }

        const double hr = std::clamp(base_hr + kHrPerEffect * response + win.normal(0.0, 2.0), 40.0, 180.0);
        const double rr = 60.0 / hr;
        std::vector<double> beats;
        double t = win.uniform(0.05, rr);
        while (t < kWindowDurationS) {
          beats.push_back(t);
          t += rr * (1.0 + 0.03 * win.normal());
        }
        auto ecg = render_ecg(beats, kWindowDurationS, fs, cfg.noise_sd,
                              derive_seed(cfg.seed, {stream::kNoise, s, static_cast<std::uint64_t>(label), rep}));
        std::vector<double> ecg_q(ecg.samples().begin(), ecg.samples().end());
        for (double& v : ecg_q) v = quantize(v);

        Sample sample;
        sample.subject_id = id;
        sample.label = label;
        sample.sc_window = SampledSignal(std::move(sc), fs);
        sample.ecg_window = SampledSignal(std::move(ecg_q), fs);
        result.dataset.samples.push_back(std::move(sample));
        result.truth.samples.push_back({class_effect, gain[s], amplitude, hr, std::move(beats)});
      }
    }
  }
  return result;
}

void save_ground_truth_csv(const Dataset& ds, const GroundTruth& truth, std::ostream& out) {
  if (ds.samples.size() != truth.samples.size()) throw SchemaError("ground truth does not match the dataset size");
  out << "subject_id,label,class_effect,subject_gain,sc_amplitude,heart_rate_bpm,beat_times_s\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const auto& t = truth.samples[i];
    out << s.subject_id << ',' << to_string(s.label) << ',' << format_double(t.class_effect) << ','
        << format_double(t.subject_gain) << ',' << format_double(t.sc_amplitude) << ','
        << format_double(t.heart_rate_bpm) << ',';
    for (std::size_t b = 0; b < t.beat_times_s.size(); ++b) out << (b ? ";" : "") << format_double(t.beat_times_s[b]);
    out << '\n';
  }
}

// ---------------------------------------------------------------- folds

std::vector<std::size_t> FoldAssignment::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of_sample.size(); ++i)
    if (fold_of_sample[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of_sample.size(); ++i)
    if (fold_of_sample[i] != fold) out.push_back(i);
  return out;
}

FoldAssignment kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be >= 2 for cross-validation, got " + std::to_string(k));
  const auto subjects = ds.subjects();
  std::map<std::pair<std::size_t, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    const auto subj =
        static_cast<std::size_t>(std::lower_bound(subjects.begin(), subjects.end(), s.subject_id) - subjects.begin());
    cells[{subj, static_cast<int>(s.label)}].push_back(i);
  }

  FoldAssignment fa;
  fa.k = k;
  fa.fold_of_sample.assign(ds.samples.size(), 0);
  for (auto& [key, members] : cells) {
    if (members.size() < k)
      throw TooFewSamples("subject " + subjects[key.first] + ", class " +
                          std::string(to_string(static_cast<ClassLabel>(key.second))) + " has " +
                          std::to_string(members.size()) + " samples, fewer than k = " + std::to_string(k));
    Rng rng(derive_seed(seed, {stream::kFolds, key.first, static_cast<std::uint64_t>(key.second)}));
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j) fa.fold_of_sample[members[j]] = j % k;
  }
  return fa;
}

Dataset binary_view(const Dataset& ds, ClassLabel positive) {
  if (positive == ClassLabel::BLN) throw LabelError("binary task needs a pain class (P1..P4) as positive");
  Dataset out;
  for (const auto& s : ds.samples)
    if (s.label == ClassLabel::BLN || s.label == positive) out.samples.push_back(s);
  return out;
}

std::size_t extract_all(Dataset& ds, const ExtractionConfig& cfg, std::size_t jobs) {
  jobs = std::max<std::size_t>(1, std::min(jobs, ds.samples.size()));
  std::vector<char> failed(ds.samples.size(), 0);
  std::vector<std::exception_ptr> errors(jobs);
  auto work = [&](std::size_t slot, std::size_t begin, std::size_t end) {
    try {
      for (std::size_t i = begin; i < end; ++i) {
        auto& s = ds.samples[i];
        if (!s.sc_window && !s.ecg_window) continue;
        bool hrv_failed = false;
        s.features = extract_features(s.sc_window ? &*s.sc_window : nullptr, s.ecg_window ? &*s.ecg_window : nullptr,
                                      cfg, &hrv_failed);
        failed[i] = hrv_failed ? 1 : 0;
      }
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  };
  if (jobs == 1) {
    work(0, 0, ds.samples.size());
  } else {
    std::vector<std::thread> threads;
    const std::size_t chunk = (ds.samples.size() + jobs - 1) / jobs;
    for (std::size_t j = 0; j < jobs; ++j) {
      const std::size_t b = j * chunk, e = std::min(ds.samples.size(), b + chunk);
      if (b < e) threads.emplace_back(work, j, b, e);
    }
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
}

}  // namespace painmtl
