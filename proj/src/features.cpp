#include "painmtl/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "painmtl/errors.hpp"

namespace painmtl {

namespace {

double mean_abs_diff(std::span<const double> x, std::size_t lag) {
  double s = 0.0;
  for (std::size_t i = 0; i + lag < x.size(); ++i) s += std::abs(x[i + lag] - x[i]);
  return s / static_cast<double>(x.size() - lag);
}

// Linear interpolation between order statistics at fractional rank q(N-1).
double quantile_sorted(std::span<const double> sorted, double q) {
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

ScFeatures sc_features(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 3) throw WindowTooShort("SC window needs at least 3 samples, got " + std::to_string(n));
  const double nd = static_cast<double>(n);

  const auto [min_it, max_it] = std::minmax_element(x.begin(), x.end());
  const double max = *max_it;
  const double range = max - *min_it;
  const bool constant = range == 0.0;

  double sum = 0.0, sum_sq = 0.0;
  for (double v : x) {
    sum += v;
    sum_sq += v * v;
  }
  const double mean = constant ? x[0] : sum / nd;
  const double rms = std::sqrt(sum_sq / nd);

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  if (!constant) {
    for (double v : x) {
      const double d = v - mean;
      const double d2 = d * d;
      m2 += d2;
      m3 += d2 * d;
      m4 += d2 * d2;
    }
  }
  const double std = std::sqrt(m2 / (nd - 1.0));
  m2 /= nd;
  m3 /= nd;
  m4 /= nd;

  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);

  double mavfd_z = 0.0, mavfsd_z = 0.0, skewness = 0.0, kurtosis = 0.0;
  if (!constant && std > 0.0) {
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (x[i] - mean) / std;
    mavfd_z = mean_abs_diff(z, 1);
    mavfsd_z = mean_abs_diff(z, 2);
    skewness = m3 / std::pow(m2, 1.5);
    kurtosis = m4 / (m2 * m2);
  }

  return {max,     range,    std,      iqr,     rms, mean, mean_abs_diff(x, 1), mean_abs_diff(x, 2),
          mavfd_z, mavfsd_z, skewness, kurtosis};
}

HrvFeatures hrv_features(const IbiSeries& ibis) {
  const auto& v = ibis.intervals_ms;
  const std::size_t n = v.size();
  if (n < 2) throw TooFewIntervals("HRV features need at least 2 intervals, got " + std::to_string(n));
  const double nd = static_cast<double>(n);

  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / nd;

  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sdnn = std::sqrt(ss / (nd - 1.0));

  double sq_diff = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) sq_diff += (v[i + 1] - v[i]) * (v[i + 1] - v[i]);
  const double rmssd = std::sqrt(sq_diff / (nd - 1.0));

  // Least squares against index 0..n-1.
  const double t_mean = (nd - 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = static_cast<double>(i) - t_mean;
    sxy += dt * (v[i] - mean);
    sxx += dt * dt;
  }
  const double slope = sxy / sxx;

  const double ratio = rmssd > 0.0 ? sdnn / rmssd : 0.0;
  return {mean, rmssd, sdnn, slope, ratio};
}

FeatureVector extract_features(const SampledSignal* sc, const SampledSignal* ecg, const ExtractionConfig& cfg,
                               bool* hrv_failed) {
  FeatureVector out;
  if (hrv_failed != nullptr) *hrv_failed = false;
  if (sc != nullptr) {
    const auto f = sc_features(*sc);
    for (std::size_t i = 0; i < kNumScFeatures; ++i) {
      out.values[i] = f[i];
      out.valid[i] = true;
    }
  }
  if (ecg != nullptr) {
    try {
      const auto filtered = bandpass_filter(*ecg, cfg.ecg_band);
      const auto f = hrv_features(ibi_series(detect_r_peaks(filtered, cfg.qrs)));
      for (std::size_t i = 0; i < kNumHrvFeatures; ++i) {
        out.values[kNumScFeatures + i] = f[i];
        out.valid[kNumScFeatures + i] = true;
      }
    } catch (const NoBeatsDetected&) {
      if (hrv_failed != nullptr) *hrv_failed = true;
    } catch (const TooFewBeats&) {
      if (hrv_failed != nullptr) *hrv_failed = true;
    } catch (const TooFewIntervals&) {
      if (hrv_failed != nullptr) *hrv_failed = true;
    }
  }
  return out;
}

StandardizationStats fit_standardization(std::span<const FeatureVector> rows) {
  if (rows.size() < 2)
    throw EmptyTrainingSet("standardization needs at least 2 training rows, got " + std::to_string(rows.size()));
  StandardizationStats stats;
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& r : rows)
      if (r.valid[j]) {
        sum += r.values[j];
        ++count;
      }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (const auto& r : rows)
      if (r.valid[j]) ss += (r.values[j] - mean) * (r.values[j] - mean);
    stats.means[j] = mean;
    stats.stds[j] = count >= 2 ? std::sqrt(ss / static_cast<double>(count - 1)) : 0.0;
  }
  return stats;
}

std::vector<FeatureVector> apply_standardization(std::span<const FeatureVector> rows,
                                                 const StandardizationStats& stats) {
  std::vector<FeatureVector> out(rows.begin(), rows.end());
  for (auto& r : out) {
    for (std::size_t j = 0; j < kNumFeatures; ++j) {
      if (!r.valid[j] || stats.stds[j] == 0.0) {
        r.values[j] = 0.0;
      } else {
        r.values[j] = (r.values[j] - stats.means[j]) / stats.stds[j];
      }
    }
  }
  return out;
}

std::vector<std::vector<double>> apply_standardization(const std::vector<std::vector<double>>& matrix,
                                                       const StandardizationStats& stats) {
  std::vector<std::vector<double>> out = matrix;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() != kNumFeatures)
      throw DimensionMismatch("row " + std::to_string(i) + " has " + std::to_string(out[i].size()) +
                              " columns, expected " + std::to_string(kNumFeatures));
    for (std::size_t j = 0; j < kNumFeatures; ++j)
      out[i][j] = stats.stds[j] == 0.0 ? 0.0 : (out[i][j] - stats.means[j]) / stats.stds[j];
  }
  return out;
}

}  // namespace painmtl
