#pragma once

// Reference implementations used only by the tests. Written directly from the
// defining formulas with long double accumulation and no shared code with the
// library.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using ld = long double;

inline ld mean(const std::vector<ld>& v) {
  ld s = 0;
  for (ld x : v) s += x;
  return s / v.size();
}

inline ld sample_sd(const std::vector<ld>& v) {
  const ld m = mean(v);
  ld s = 0;
  for (ld x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

inline ld quantile(std::vector<ld> v, ld q) {
  std::sort(v.begin(), v.end());
  const ld pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

inline ld mav_diff(const std::vector<ld>& v, std::size_t lag) {
  ld s = 0;
  for (std::size_t i = 0; i + lag < v.size(); ++i) s += std::fabs(v[i + lag] - v[i]);
  return s / (v.size() - lag);
}

// max, range, std, iqr, rms, mean, mavfd, mavfsd, mavfd*, mavfsd*, skew, kurt
inline std::array<double, 12> sc_features(const std::vector<double>& window) {
  std::vector<ld> x(window.begin(), window.end());
  const ld mx = *std::max_element(x.begin(), x.end());
  const ld mn = *std::min_element(x.begin(), x.end());
  const ld m = mean(x);
  const ld sd = sample_sd(x);
  ld sq = 0;
  for (ld v : x) sq += v * v;
  ld m2 = 0, m3 = 0, m4 = 0;
  for (ld v : x) {
    const ld d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= x.size();
  m3 /= x.size();
  m4 /= x.size();
  ld zfd = 0, zfsd = 0, skew = 0, kurt = 0;
  if (mx > mn) {
    std::vector<ld> z;
    for (ld v : x) z.push_back((v - m) / sd);
    zfd = mav_diff(z, 1);
    zfsd = mav_diff(z, 2);
    skew = m3 / std::pow(m2, 1.5L);
    kurt = m4 / (m2 * m2);
  }
  const ld iqr = quantile(x, 0.75L) - quantile(x, 0.25L);
  return {static_cast<double>(mx),
          static_cast<double>(mx - mn),
          static_cast<double>(mx > mn ? sd : 0),
          static_cast<double>(iqr),
          static_cast<double>(std::sqrt(sq / x.size())),
          static_cast<double>(m),
          static_cast<double>(mav_diff(x, 1)),
          static_cast<double>(mav_diff(x, 2)),
          static_cast<double>(zfd),
          static_cast<double>(zfsd),
          static_cast<double>(skew),
          static_cast<double>(kurt)};
}

// mean, rmssd, sdnn, slope against index, sdnn/rmssd
inline std::array<double, 5> hrv_features(const std::vector<double>& ibis) {
  std::vector<ld> y(ibis.begin(), ibis.end());
  const std::size_t n = y.size();
  const ld m = mean(y);
  ld ss = 0;
  for (std::size_t i = 1; i < n; ++i) ss += (y[i] - y[i - 1]) * (y[i] - y[i - 1]);
  const ld rmssd = std::sqrt(ss / (n - 1));
  const ld sdnn = sample_sd(y);
  const ld tbar = (n - 1) / 2.0L;
  ld sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (i - tbar) * (y[i] - m);
    sxx += (i - tbar) * (i - tbar);
  }
  return {static_cast<double>(m), static_cast<double>(rmssd), static_cast<double>(sdnn), static_cast<double>(sxy / sxx),
          static_cast<double>(rmssd == 0 ? 0 : sdnn / rmssd)};
}

// Magnitude of a bilinear-transformed Butterworth bandpass (prototype order
// n, prewarped edges) at f; applied forward and backward the gain squares.
inline double butterworth_bandpass_gain(double f, double lo, double hi, int n, double fs) {
  auto warp = [fs](double hz) { return 2.0 * fs * std::tan(std::numbers::pi * hz / fs); };
  const double w = warp(f), wl = warp(lo), wh = warp(hi);
  const double x = (w * w - wl * wh) / (w * (wh - wl));
  return 1.0 / std::sqrt(1.0 + std::pow(x * x, n));
}

// Dense ReLU network evaluated layer by layer from nested vectors.
struct Layer {
  std::vector<std::vector<double>> w;
  std::vector<double> b;
};

inline std::vector<double> dense(const Layer& l, const std::vector<double>& x, bool relu) {
  std::vector<double> out(l.b.size());
  for (std::size_t o = 0; o < out.size(); ++o) {
    ld s = l.b[o];
    for (std::size_t i = 0; i < x.size(); ++i) s += static_cast<ld>(l.w[o][i]) * x[i];
    out[o] = relu ? std::max<double>(0.0, static_cast<double>(s)) : static_cast<double>(s);
  }
  return out;
}

inline double mlp_probability(const std::vector<Layer>& hidden, const Layer& head, std::vector<double> x) {
  for (const auto& l : hidden) x = dense(l, x, true);
  const double z = dense(head, x, false)[0];
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace oracle
