#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "painmtl/features.hpp"
#include "painmtl/signal.hpp"

namespace painmtl {

enum class ClassLabel { BLN = 0, P1 = 1, P2 = 2, P3 = 3, P4 = 4 };

inline constexpr std::array<ClassLabel, 5> kAllLabels = {ClassLabel::BLN, ClassLabel::P1, ClassLabel::P2,
                                                         ClassLabel::P3, ClassLabel::P4};

std::string_view to_string(ClassLabel label);
// Throws LabelError on anything outside {BLN, P1, P2, P3, P4}.
ClassLabel parse_label(std::string_view text);

// Stimulation windows are 5.5 s long.
inline constexpr double kWindowDurationS = 5.5;

struct Sample {
  std::string subject_id;
  ClassLabel label = ClassLabel::BLN;
  std::optional<SampledSignal> sc_window;
  std::optional<SampledSignal> ecg_window;
  std::optional<FeatureVector> features;

  // Binary target relative to BLN: 0 for BLN, 1 otherwise.
  int binary_target() const { return label == ClassLabel::BLN ? 0 : 1; }
};

struct Dataset {
  std::vector<Sample> samples;

  // Sorted unique subject ids.
  std::vector<std::string> subjects() const;
  std::size_t size() const { return samples.size(); }
};

// Raw CSV: subject_id,label,sample_rate_hz,sc_window,ecg_window with window
// cells holding ';'-separated samples (an empty cell means the window is
// absent). Feature CSV: subject_id,label,f00..f16,mask00..mask16.
// load_csv picks the schema from the header row.
//
// Errors: ParseError (with 1-based row number, header is row 1),
// SchemaError for a header matching neither schema or a window whose
// duration differs from 5.5 s by more than one sample period, LabelError for
// unknown classes.
Dataset load_csv(std::istream& in);
Dataset load_csv(const std::filesystem::path& path);

void save_raw_csv(const Dataset& ds, std::ostream& out);
void save_features_csv(const Dataset& ds, std::ostream& out);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

struct SynthConfig {
  std::size_t n_subjects = 10;
  std::size_t per_class = 20;
  double sample_rate_hz = 512.0;
  // Phasic SC increment (uS) at P4; P1..P3 scale linearly (0.25 steps). The
  // heart-rate increase at P4 is kHrPerEffect * effect_size bpm.
  double effect_size = 1.0;
  // In [0, 1]: the fraction of subjects with reversed response polarity is
  // subject_heterogeneity / 2. At 1 half the subjects respond in reverse and
  // the BLN and P4 feature distributions pooled over subjects coincide.
  double subject_heterogeneity = 0.0;
  double noise_sd = 0.05;
  std::uint64_t seed = 0;
};

inline constexpr double kHrPerEffect = 8.0;

struct SampleTruth {
  double class_effect = 0.0;    // effect_size * level of the sample's class
  double subject_gain = 1.0;    // +1 or -1
  double sc_amplitude = 0.0;    // phasic amplitude actually drawn (uS)
  double heart_rate_bpm = 0.0;  // mean heart rate of the window
  std::vector<double> beat_times_s;
};

struct GroundTruth {
  std::vector<SampleTruth> samples;  // parallel to Dataset::samples
};

struct SynthResult {
  Dataset dataset;
  GroundTruth truth;
};

// Deterministic in cfg.seed. Throws ConfigError on invalid configuration.
SynthResult synthesize_dataset(const SynthConfig& cfg);

// sidecar: subject_id,label,class_effect,subject_gain,sc_amplitude,heart_rate_bpm,beat_times_s
void save_ground_truth_csv(const Dataset& ds, const GroundTruth& truth, std::ostream& out);

struct SynthEcg {
  SampledSignal signal;
  BeatSeries beats;
};

// QRS-template train at a fixed rate; beats at RR/2 + k*RR for every k with
// the beat inside the window. Additive white noise (noise_sd, mV) does not
// move the beats. Throws ConfigError unless 30 <= bpm <= 220.
SynthEcg synthesize_ecg(double heart_rate_bpm, double duration_s, double sample_rate_hz, double noise_sd,
                        std::uint64_t seed);

// Renders a template train at arbitrary beat times.
SampledSignal render_ecg(std::span<const double> beat_times_s, double duration_s, double sample_rate_hz,
                         double noise_sd, std::uint64_t seed);

struct FoldAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of_sample;

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

// Stratified within (subject, class): each cell is shuffled with a seed
// derived from (seed, cell) and dealt round-robin, so remainders land on the
// lowest-index folds. Throws ConfigError for k < 2 and TooFewSamples when a
// cell holds fewer than k samples.
FoldAssignment kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed);

// Keeps BLN and `positive` samples. Throws LabelError when positive is BLN.
Dataset binary_view(const Dataset& ds, ClassLabel positive);

// Computes features for every sample that carries raw windows, splitting the
// work over `jobs` threads. Returns the number of windows whose ECG gave no
// usable HRV features.
std::size_t extract_all(Dataset& ds, const ExtractionConfig& cfg = {}, std::size_t jobs = 1);

}  // namespace painmtl
