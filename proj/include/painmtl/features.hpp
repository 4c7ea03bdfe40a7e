#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "painmtl/signal.hpp"

namespace painmtl {

inline constexpr std::size_t kNumScFeatures = 12;
inline constexpr std::size_t kNumHrvFeatures = 5;
inline constexpr std::size_t kNumFeatures = kNumScFeatures + kNumHrvFeatures;

// Column names in the fixed feature order: 12 skin-conductance features
// followed by 5 heart-rate-variability features.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {"sc_max",
                                                                             "sc_range",
                                                                             "sc_std",
                                                                             "sc_iqr",
                                                                             "sc_rms",
                                                                             "sc_mean",
                                                                             "sc_mavfd",
                                                                             "sc_mavfsd",
                                                                             "sc_mavfd_z",
                                                                             "sc_mavfsd_z",
                                                                             "sc_skewness",
                                                                             "sc_kurtosis",
                                                                             "ibi_mean_ms",
                                                                             "ibi_rmssd_ms",
                                                                             "ibi_sdnn_ms",
                                                                             "ibi_slope",
                                                                             "ibi_sdnn_rmssd_ratio"};

using ScFeatures = std::array<double, kNumScFeatures>;
using HrvFeatures = std::array<double, kNumHrvFeatures>;

struct FeatureVector {
  std::array<double, kNumFeatures> values{};
  std::array<bool, kNumFeatures> valid{};

  // All entries zero and invalid.
  static FeatureVector invalid() { return {}; }

  bool operator==(const FeatureVector&) const = default;
};

// Conventions:
//  - std is the sample standard deviation (N-1).
//  - skewness m3/m2^1.5 and kurtosis m4/m2^2 use population central moments,
//    no excess correction.
//  - IQR from linearly interpolated quartiles at ranks 0.25(N-1), 0.75(N-1).
//  - a constant window has std, IQR, skewness, kurtosis and both
//    standardized-difference features equal to 0.
// Throws WindowTooShort when N < 3.
ScFeatures sc_features(std::span<const double> window);
inline ScFeatures sc_features(const SampledSignal& window) { return sc_features(window.samples()); }

// Mean IBI, RMSSD, SDNN (sample std), least-squares slope of IBI against
// interval index (ms per interval), and SDNN/RMSSD (0 when RMSSD is 0).
// Throws TooFewIntervals when fewer than 2 intervals.
HrvFeatures hrv_features(const IbiSeries& ibis);

struct ExtractionConfig {
  BandpassSpec ecg_band{};
  QrsDetectorConfig qrs{};
};

// Full per-window extraction. SC entries are valid when a SC window is
// given; HRV entries are valid only when the ECG yields >= 2 intervals.
// `hrv_failed` (if non-null) is set when an ECG window was present but its
// HRV features could not be computed.
FeatureVector extract_features(const SampledSignal* sc, const SampledSignal* ecg, const ExtractionConfig& cfg = {},
                               bool* hrv_failed = nullptr);

struct StandardizationStats {
  std::array<double, kNumFeatures> means{};
  std::array<double, kNumFeatures> stds{};
};

// Per-column mean and sample std over valid entries. A column with fewer than
// two valid entries gets std 0. Throws EmptyTrainingSet on fewer than 2 rows.
StandardizationStats fit_standardization(std::span<const FeatureVector> rows);

// z-scores valid entries in place of a copy; columns with std 0 become 0 and
// invalid entries stay 0.
std::vector<FeatureVector> apply_standardization(std::span<const FeatureVector> rows,
                                                 const StandardizationStats& stats);

// Dense-matrix variant used by tools and bindings: every row must have
// exactly kNumFeatures columns (DimensionMismatch otherwise); all entries are
// treated as valid.
std::vector<std::vector<double>> apply_standardization(const std::vector<std::vector<double>>& matrix,
                                                       const StandardizationStats& stats);

}  // namespace painmtl
