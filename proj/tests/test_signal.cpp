#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "painmtl/data.hpp"
#include "painmtl/errors.hpp"
#include "painmtl/random.hpp"
#include "painmtl/signal.hpp"

using namespace painmtl;

namespace {

SampledSignal sine(double f, double fs, double seconds, double amp = 1.0) {
  std::vector<double> x(static_cast<std::size_t>(seconds * fs));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * f * i / fs);
  return {x, fs};
}

// Peak absolute value over the central two seconds. The 0.1 Hz band edge has
// start-up transients lasting tens of seconds, so steady-state checks use long
// inputs.
double steady_amplitude(const SampledSignal& s) {
  const auto x = s.samples();
  const auto half = static_cast<std::size_t>(s.sample_rate_hz());
  const std::size_t mid = x.size() / 2;
  double m = 0.0;
  for (std::size_t i = mid - std::min(mid, half); i < std::min(x.size(), mid + half); ++i)
    m = std::max(m, std::fabs(x[i]));
  return m;
}

}  // namespace

TEST(SampledSignalTest, RejectsInvalidInput) {
  EXPECT_THROW(SampledSignal({}, 100.0), InvalidSignal);
  EXPECT_THROW(SampledSignal({1.0}, 0.0), InvalidSignal);
  EXPECT_THROW(SampledSignal({1.0, NAN}, 100.0), InvalidSignal);
  EXPECT_THROW(SampledSignal({1.0, INFINITY}, 100.0), InvalidSignal);
  SampledSignal s({1.0, 2.0}, 4.0);
  EXPECT_DOUBLE_EQ(s.duration_s(), 0.5);
}

TEST(ButterworthTest, DesignMatchesAnalyticMagnitude) {
  const double fs = 512.0;
  for (int order : {1, 2, 4, 6}) {
    const BandpassSpec spec{0.5, 40.0, order};
    const auto sections = design_butterworth_bandpass(spec, fs);
    ASSERT_EQ(sections.size(), static_cast<std::size_t>(order));
    for (double f : {0.05, 0.3, 0.5, 1.0, 4.47, 10.0, 40.0, 60.0, 120.0, 250.0}) {
      const double want = oracle::butterworth_bandpass_gain(f, spec.low_hz, spec.high_hz, order, fs);
      EXPECT_NEAR(cascade_magnitude(sections, f, fs), want, 1e-9 + 1e-7 * want) << "order " << order << " f " << f;
    }
  }
}

TEST(ButterworthTest, HalfPowerAtBandEdges) {
  const auto s = design_butterworth_bandpass({5.0, 15.0, 3}, 200.0);
  EXPECT_NEAR(cascade_magnitude(s, 5.0, 200.0), std::sqrt(0.5), 1e-9);
  EXPECT_NEAR(cascade_magnitude(s, 15.0, 200.0), std::sqrt(0.5), 1e-9);
}

TEST(ButterworthTest, RejectsBadBands) {
  EXPECT_THROW(design_butterworth_bandpass({0.1, 250.0, 4}, 256.0), BandEdgeError);
  EXPECT_THROW(design_butterworth_bandpass({0.0, 20.0, 4}, 256.0), BandEdgeError);
  EXPECT_THROW(design_butterworth_bandpass({20.0, 10.0, 4}, 256.0), BandEdgeError);
  EXPECT_THROW(design_butterworth_bandpass({1.0, 10.0, 0}, 256.0), BandEdgeError);
  const SampledSignal s(std::vector<double>(100, 1.0), 100.0);
  EXPECT_THROW(bandpass_filter(s, {0.1, 50.0, 4}), BandEdgeError);
}

TEST(BandpassFilterTest, PassesInBandSine) {
  const auto out = bandpass_filter(sine(10.0, 512.0, 120.0), {0.1, 250.0, 4});
  const double want = std::pow(oracle::butterworth_bandpass_gain(10.0, 0.1, 250.0, 4, 512.0), 2);
  EXPECT_NEAR(steady_amplitude(out), 1.0, 0.01);
  EXPECT_NEAR(steady_amplitude(out), want, 2e-3);
}

TEST(BandpassFilterTest, AttenuatesOutOfBandSine) {
  const auto out = bandpass_filter(sine(10.0, 512.0, 5.5), {20.0, 40.0, 4});
  EXPECT_LT(steady_amplitude(out), 0.05);
  const double want = std::pow(oracle::butterworth_bandpass_gain(10.0, 20.0, 40.0, 4, 512.0), 2);
  EXPECT_NEAR(steady_amplitude(out), want, 2e-3);
}

TEST(BandpassFilterTest, RejectsDc) {
  const SampledSignal dc(std::vector<double>(2816, 5.0), 512.0);
  const auto out = bandpass_filter(dc, {1.0, 40.0, 4});
  EXPECT_LT(steady_amplitude(out), 1e-6);
}

TEST(BandpassFilterTest, PreservesLengthAndRate) {
  const auto in = sine(3.0, 100.0, 2.0);
  const auto out = bandpass_filter(in, {1.0, 20.0, 2});
  EXPECT_EQ(out.size(), in.size());
  EXPECT_EQ(out.sample_rate_hz(), in.sample_rate_hz());
}

TEST(BandpassFilterTest, ShortSignal) {
  EXPECT_THROW(bandpass_filter(SampledSignal({1, 2, 3, 4, 5}, 100.0), {1.0, 20.0, 2}), SignalTooShort);
  EXPECT_NO_THROW(bandpass_filter(SampledSignal({1, 2, 3, 4, 5, 6}, 100.0), {1.0, 20.0, 2}));
}

TEST(BandpassFilterTest, Linear) {
  Rng rng(3);
  std::vector<double> x(1000), y(1000), mix(1000);
  const double a = 1.7, b = -0.4;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    y[i] = rng.normal();
    mix[i] = a * x[i] + b * y[i];
  }
  const BandpassSpec spec{0.5, 30.0, 4};
  const auto sx = bandpass_filter({x, 200.0}, spec);
  const auto sy = bandpass_filter({y, 200.0}, spec);
  const auto fm = bandpass_filter({mix, 200.0}, spec);
  const auto fx = sx.samples();
  const auto fy = sy.samples();
  double scale = 0.0;
  for (double v : fm.samples()) scale = std::max(scale, std::fabs(v));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(fm.samples()[i], a * fx[i] + b * fy[i], 1e-9 * scale);
}

TEST(BandpassFilterTest, ZeroPhaseKeepsSymmetricPulsePeak) {
  std::vector<double> x(1024, 0.0);
  const std::size_t centre = 431;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = (static_cast<double>(i) - centre) / 8.0;
    x[i] = std::exp(-t * t);
  }
  const auto out = bandpass_filter({x, 512.0}, {1.0, 60.0, 4});
  const auto s = out.samples();
  EXPECT_EQ(static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin()), centre);
}

TEST(QrsDetectorTest, OneBeatPerSecondAtTemplateCentres) {
  const auto ecg = synthesize_ecg(60.0, 10.0, 512.0, 0.0, 1);
  const auto beats = detect_r_peaks(ecg.signal);
  ASSERT_EQ(beats.beat_times_s.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(beats.beat_times_s[i], 0.5 + i, 0.030);
}

TEST(QrsDetectorTest, SeventyTwoBpmShortWindow) {
  const auto ecg = synthesize_ecg(72.0, 5.5, 512.0, 0.02, 2);
  const auto beats = detect_r_peaks(ecg.signal);
  ASSERT_GE(beats.beat_times_s.size(), 6u);
  ASSERT_LE(beats.beat_times_s.size(), 7u);
  const auto ibi = ibi_series(beats);
  for (double v : ibi.intervals_ms) EXPECT_NEAR(v, 833.33, 30.0);
}

TEST(QrsDetectorTest, FlatSignalHasNoBeats) {
  EXPECT_THROW(detect_r_peaks(SampledSignal(std::vector<double>(2816, 0.0), 512.0)), NoBeatsDetected);
  EXPECT_THROW(detect_r_peaks(SampledSignal(std::vector<double>(2816, 1.3), 512.0)), NoBeatsDetected);
}

TEST(QrsDetectorTest, Preconditions) {
  EXPECT_THROW(detect_r_peaks(SampledSignal(std::vector<double>(500, 0.0), 50.0)), SignalTooShort);
  EXPECT_THROW(detect_r_peaks(SampledSignal(std::vector<double>(150, 0.0), 100.0)), SignalTooShort);
}

TEST(QrsDetectorTest, OutputInvariantsOnNoisyInput) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const double bpm = rng.uniform(40.0, 180.0);
    const auto ecg = synthesize_ecg(bpm, 5.5, 256.0, rng.uniform(0.0, 0.15), seed);
    BeatSeries beats;
    try {
      beats = detect_r_peaks(ecg.signal);
    } catch (const NoBeatsDetected&) {
      continue;
    }
    const auto& t = beats.beat_times_s;
    for (std::size_t i = 0; i < t.size(); ++i) {
      EXPECT_GE(t[i], 0.0);
      EXPECT_LE(t[i], ecg.signal.duration_s());
      if (i > 0) EXPECT_GE(t[i] - t[i - 1], 0.200 - 1e-12);
    }
  }
}

TEST(QrsDetectorTest, FindsJitteredBeats) {
  Rng rng(9);
  std::vector<double> beats;
  double t = 0.3;
  while (t < 5.3) {
    beats.push_back(t);
    t += rng.uniform(0.6, 1.1);
  }
  const auto ecg = render_ecg(beats, 5.5, 512.0, 0.03, 4);
  const auto found = detect_r_peaks(ecg).beat_times_s;
  ASSERT_EQ(found.size(), beats.size());
  for (std::size_t i = 0; i < beats.size(); ++i) EXPECT_NEAR(found[i], beats[i], 0.030);
}

TEST(IbiSeriesTest, Examples) {
  EXPECT_EQ(ibi_series({{0, 1, 2, 3}}).intervals_ms, (std::vector<double>{1000, 1000, 1000}));
  const auto ibi = ibi_series({{0.0, 0.8, 1.65, 2.45}}).intervals_ms;
  ASSERT_EQ(ibi.size(), 3u);
  EXPECT_NEAR(ibi[0], 800, 1e-9);
  EXPECT_NEAR(ibi[1], 850, 1e-9);
  EXPECT_NEAR(ibi[2], 800, 1e-9);
  EXPECT_THROW(ibi_series({{1.2}}), TooFewBeats);
  EXPECT_THROW(ibi_series({{}}), TooFewBeats);
}

TEST(IbiSeriesTest, CumulativeSumRecoversBeats) {
  // Times on a 1/1024 s grid are exact in binary, so the round trip is exact.
  const std::vector<double> beats = {0.25, 1.0625, 1.875, 2.5, 3.3125, 4.0};
  const auto ibi = ibi_series({beats}).intervals_ms;
  double t = beats[0];
  for (std::size_t i = 0; i < ibi.size(); ++i) {
    t += ibi[i] / 1000.0;
    EXPECT_EQ(t, beats[i + 1]);
  }
}
