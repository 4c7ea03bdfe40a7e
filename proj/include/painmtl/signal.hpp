#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace painmtl {

// Uniformly sampled time series. Construction validates: rate > 0, at least
// one sample, all samples finite. Throws InvalidSignal otherwise.
class SampledSignal {
 public:
  SampledSignal(std::vector<double> samples, double sample_rate_hz);

  std::span<const double> samples() const { return samples_; }
  double sample_rate_hz() const { return sample_rate_hz_; }
  std::size_t size() const { return samples_.size(); }
  double duration_s() const { return static_cast<double>(samples_.size()) / sample_rate_hz_; }

  bool operator==(const SampledSignal&) const = default;

 private:
  std::vector<double> samples_;
  double sample_rate_hz_;
};

struct BandpassSpec {
  double low_hz = 0.1;
  double high_hz = 250.0;
  int order = 4;
};

// Second-order section in direct form II transposed, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2;
  double a1, a2;
};

// Digital Butterworth bandpass of prototype order `spec.order` (2*order poles),
// designed by bilinear transform with prewarped band edges and normalized to
// unit gain at the band centre. Returns `spec.order` cascaded sections.
// Throws BandEdgeError unless 0 < low < high < fs/2 and order >= 1.
std::vector<Biquad> design_butterworth_bandpass(const BandpassSpec& spec, double sample_rate_hz);

// Complex frequency response magnitude of a section cascade at `freq_hz`.
double cascade_magnitude(std::span<const Biquad> sections, double freq_hz, double sample_rate_hz);

// Zero-phase (forward-backward) Butterworth bandpass. The input is extended
// by odd reflection at both ends and each pass starts from the steady-state
// section state for its first sample, which keeps edge transients short.
// Throws BandEdgeError for invalid bands, SignalTooShort when the signal has
// fewer than 3 * order samples.
SampledSignal bandpass_filter(const SampledSignal& signal, const BandpassSpec& spec);

// Beat fiducial times in seconds from the window start, strictly increasing.
struct BeatSeries {
  std::vector<double> beat_times_s;
};

// Inter-beat intervals in milliseconds.
struct IbiSeries {
  std::vector<double> intervals_ms;
};

struct QrsDetectorConfig {
  double band_low_hz = 5.0;
  double band_high_hz = 15.0;
  int band_order = 2;
  double integration_window_s = 0.150;
  double refractory_s = 0.200;
  double t_wave_window_s = 0.360;
  double edge_exclusion_s = 0.5;
  // Search-back is triggered when no beat is found for this multiple of the
  // running mean RR interval.
  double searchback_rr_factor = 1.66;
};

// Pan-Tompkins style R-peak detector: 5-15 Hz bandpass, five-point derivative,
// squaring, trailing moving-window integration, adaptive signal/noise peak
// thresholds with refractory blanking, T-wave discrimination by slope, and
// search-back with the lower threshold. Each accepted integrator peak is
// mapped to the argmax of the band-passed ECG over the preceding integration
// window.
//
// Requires sample rate >= 100 Hz and duration >= 2 s (SignalTooShort
// otherwise). Throws NoBeatsDetected when nothing crosses the thresholds.
BeatSeries detect_r_peaks(const SampledSignal& ecg, const QrsDetectorConfig& cfg = {});

// Successive differences of beat times, in ms. Throws TooFewBeats on < 2 beats.
IbiSeries ibi_series(const BeatSeries& beats);

}  // namespace painmtl
