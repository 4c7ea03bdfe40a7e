#include "painmtl/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "painmtl/errors.hpp"

namespace painmtl {

using cplx = std::complex<double>;

SampledSignal::SampledSignal(std::vector<double> samples, double sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_))
    throw InvalidSignal("sample rate must be positive and finite");
  if (samples_.empty()) throw InvalidSignal("signal has no samples");
  for (double v : samples_)
    if (!std::isfinite(v)) throw InvalidSignal("signal contains a non-finite sample");
}

namespace {

void check_band(const BandpassSpec& spec, double fs) {
  if (spec.order < 1) throw BandEdgeError("filter order must be >= 1");
  const double nyquist = fs / 2.0;
  if (!(spec.low_hz > 0.0) || !(spec.low_hz < spec.high_hz) || !(spec.high_hz < nyquist)) {
    throw BandEdgeError("band [" + std::to_string(spec.low_hz) + ", " + std::to_string(spec.high_hz) +
                        "] Hz is not inside (0, " + std::to_string(nyquist) + ") Hz");
  }
}

cplx section_response(const Biquad& s, cplx z) {
  const cplx zi = 1.0 / z;
  return (s.b0 + zi * (s.b1 + zi * s.b2)) / (1.0 + zi * (s.a1 + zi * s.a2));
}

Biquad section_from_poles(cplx p, cplx q) {
  // Numerator (1 - z^-1)(1 + z^-1): one zero at DC and one at Nyquist.
  return Biquad{1.0, 0.0, -1.0, -(p + q).real(), (p * q).real()};
}

// Direct form II transposed over `x`, starting from the per-section state
// that is in steady state for a constant input equal to x.front().
std::vector<double> cascade_filter(std::span<const Biquad> sections, std::vector<double> x) {
  if (x.empty()) return x;
  for (const Biquad& s : sections) {
    const double dc_gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double y_ss = dc_gain * x.front();
    double z1 = y_ss - s.b0 * x.front();
    double z2 = s.b2 * x.front() - s.a2 * y_ss;
    for (double& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return x;
}

}  // namespace

std::vector<Biquad> design_butterworth_bandpass(const BandpassSpec& spec, double fs) {
  check_band(spec, fs);
  const int n = spec.order;
  const double w_lo = 2.0 * fs * std::tan(std::numbers::pi * spec.low_hz / fs);
  const double w_hi = 2.0 * fs * std::tan(std::numbers::pi * spec.high_hz / fs);
  const double w0_sq = w_lo * w_hi;
  const double bw = w_hi - w_lo;

  std::vector<cplx> upper;  // digital poles with positive imaginary part
  std::vector<cplx> real;
  for (int k = 0; k < n; ++k) {
    const cplx lp = std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n));
    const cplx disc = std::sqrt(lp * lp * bw * bw - 4.0 * w0_sq);
    for (const cplx s : {(lp * bw + disc) / 2.0, (lp * bw - disc) / 2.0}) {
      const cplx z = (2.0 * fs + s) / (2.0 * fs - s);
      if (std::abs(z.imag()) <= 1e-12 * std::abs(z)) {
        real.push_back(z.real());
      } else if (z.imag() > 0.0) {
        upper.push_back(z);
      }
    }
  }
  std::sort(real.begin(), real.end(), [](cplx a, cplx b) { return a.real() < b.real(); });

  std::vector<Biquad> sections;
  for (const cplx p : upper) sections.push_back(section_from_poles(p, std::conj(p)));
  for (std::size_t i = 0; i + 1 < real.size(); i += 2) sections.push_back(section_from_poles(real[i], real[i + 1]));

  // Unit gain at the centre frequency, spread evenly over the sections.
  const double w_center = 2.0 * std::atan(std::sqrt(w0_sq) / (2.0 * fs));
  const cplx z_center = std::polar(1.0, w_center);
  double mag = 1.0;
  for (const Biquad& s : sections) mag *= std::abs(section_response(s, z_center));
  const double per_section = std::pow(1.0 / mag, 1.0 / static_cast<double>(sections.size()));
  for (Biquad& s : sections) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  return sections;
}

double cascade_magnitude(std::span<const Biquad> sections, double freq_hz, double fs) {
  const cplx z = std::polar(1.0, 2.0 * std::numbers::pi * freq_hz / fs);
  cplx h = 1.0;
  for (const Biquad& s : sections) h *= section_response(s, z);
  return std::abs(h);
}

SampledSignal bandpass_filter(const SampledSignal& signal, const BandpassSpec& spec) {
  const double fs = signal.sample_rate_hz();
  check_band(spec, fs);
  const std::size_t n = signal.size();
  if (n < 3 * static_cast<std::size_t>(spec.order))
    throw SignalTooShort("bandpass needs at least " + std::to_string(3 * spec.order) + " samples, got " +
                         std::to_string(n));

  const auto sections = design_butterworth_bandpass(spec, fs);
  const auto x = signal.samples();
  const std::size_t pad = std::min<std::size_t>(3 * (2 * sections.size() + 1), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  ext = cascade_filter(sections, std::move(ext));
  std::reverse(ext.begin(), ext.end());
  ext = cascade_filter(sections, std::move(ext));
  std::reverse(ext.begin(), ext.end());

  return SampledSignal(std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                                           ext.begin() + static_cast<std::ptrdiff_t>(pad + n)),
                       fs);
}

namespace {

struct Candidate {
  std::size_t index;
  double value;
};

std::size_t seconds_to_samples(double s, double fs) { return static_cast<std::size_t>(std::lround(s * fs)); }

}  // namespace

BeatSeries detect_r_peaks(const SampledSignal& ecg, const QrsDetectorConfig& cfg) {
  const double fs = ecg.sample_rate_hz();
  if (fs < 100.0) throw SignalTooShort("QRS detection needs a sample rate of at least 100 Hz");
  if (ecg.duration_s() < 2.0) throw SignalTooShort("QRS detection needs at least 2 s of ECG");

  const auto band = bandpass_filter(ecg, {cfg.band_low_hz, cfg.band_high_hz, cfg.band_order});
  const auto bp = band.samples();
  const std::size_t n = bp.size();

  std::vector<double> deriv(n, 0.0);
  for (std::size_t i = 2; i + 2 < n; ++i)
    deriv[i] = fs / 8.0 * (-bp[i - 2] - 2.0 * bp[i - 1] + 2.0 * bp[i + 1] + bp[i + 2]);

  const std::size_t win = std::max<std::size_t>(1, seconds_to_samples(cfg.integration_window_s, fs));
  std::vector<double> mwi(n, 0.0);
  double running = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    running += deriv[i] * deriv[i];
    if (i >= win) running -= deriv[i - win] * deriv[i - win];
    mwi[i] = std::max(running, 0.0) / static_cast<double>(win);
  }

  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    const bool rising = i == 0 || mwi[i] > mwi[i - 1];
    const bool not_falling_after = i + 1 == n || mwi[i] >= mwi[i + 1];
    if (rising && not_falling_after && mwi[i] > 0.0) candidates.push_back({i, mwi[i]});
  }
  if (candidates.empty()) throw NoBeatsDetected("no QRS energy in ECG window");

  // Thresholds are initialised from the interior of the window only.
  const std::size_t edge = seconds_to_samples(cfg.edge_exclusion_s, fs);
  std::size_t init_lo = edge, init_hi = n > edge ? n - edge : 0;
  if (init_lo >= init_hi) {
    init_lo = 0;
    init_hi = n;
  }
  double init_max = 0.0, init_sum = 0.0;
  for (std::size_t i = init_lo; i < init_hi; ++i) {
    init_max = std::max(init_max, mwi[i]);
    init_sum += mwi[i];
  }
  double spki = init_max / 3.0;
  double npki = 0.5 * init_sum / static_cast<double>(init_hi - init_lo);
  auto threshold1 = [&] { return npki + 0.25 * (spki - npki); };

  const std::size_t refractory = seconds_to_samples(cfg.refractory_s, fs);
  const std::size_t t_wave = seconds_to_samples(cfg.t_wave_window_s, fs);

  auto max_slope = [&](std::size_t idx) {
    const std::size_t lo = idx >= win ? idx - win : 0;
    double m = 0.0;
    for (std::size_t j = lo; j <= idx; ++j) m = std::max(m, std::abs(deriv[j]));
    return m;
  };

  std::vector<std::size_t> qrs;
  double last_slope = 0.0;
  std::vector<double> rr;                // recent RR intervals in samples
  std::vector<Candidate> pending_noise;  // noise peaks since the last QRS

  auto rr_mean = [&] {
    const std::size_t k = std::min<std::size_t>(rr.size(), 8);
    double s = 0.0;
    for (std::size_t j = rr.size() - k; j < rr.size(); ++j) s += rr[j];
    return s / static_cast<double>(k);
  };
  auto accept = [&](const Candidate& c, double weight) {
    spki = weight * c.value + (1.0 - weight) * spki;
    if (!qrs.empty()) rr.push_back(static_cast<double>(c.index - qrs.back()));
    qrs.push_back(c.index);
    last_slope = max_slope(c.index);
    pending_noise.clear();
  };
  auto search_back = [&](std::size_t now) {
    if (qrs.empty() || rr.empty()) return;
    if (static_cast<double>(now - qrs.back()) <= cfg.searchback_rr_factor * rr_mean()) return;
    const double threshold2 = 0.5 * threshold1();
    const Candidate* best = nullptr;
    for (const Candidate& c : pending_noise) {
      if (c.index - qrs.back() < refractory || c.value < threshold2) continue;
      if (best == nullptr || c.value > best->value) best = &c;
    }
    if (best != nullptr) {
      const Candidate found = *best;
      accept(found, 0.25);
    }
  };

  for (const Candidate& c : candidates) {
    search_back(c.index);
    if (!qrs.empty() && c.index - qrs.back() < refractory) continue;
    if (c.value >= threshold1()) {
      if (!qrs.empty() && c.index - qrs.back() < t_wave && max_slope(c.index) < 0.5 * last_slope) {
        npki = 0.125 * c.value + 0.875 * npki;
        continue;
      }
      accept(c, 0.125);
    } else {
      npki = 0.125 * c.value + 0.875 * npki;
      pending_noise.push_back(c);
    }
  }
  search_back(n - 1);
  if (qrs.empty()) throw NoBeatsDetected("no QRS complex crossed the detection thresholds");

  // The trailing integrator lags the R wave; look back for the band-passed
  // maximum.
  BeatSeries out;
  std::size_t last_r = 0;
  bool have_last = false;
  for (std::size_t idx : qrs) {
    const std::size_t lo = idx >= win ? idx - win : 0;
    std::size_t r = lo;
    for (std::size_t j = lo; j <= idx; ++j)
      if (bp[j] > bp[r]) r = j;
    if (have_last && r - last_r < refractory && r > last_r) continue;
    if (have_last && r <= last_r) continue;
    out.beat_times_s.push_back(static_cast<double>(r) / fs);
    last_r = r;
    have_last = true;
  }
  return out;
}

IbiSeries ibi_series(const BeatSeries& beats) {
  const auto& t = beats.beat_times_s;
  if (t.size() < 2) throw TooFewBeats("need at least 2 beats for an IBI series, got " + std::to_string(t.size()));
  IbiSeries out;
  out.intervals_ms.reserve(t.size() - 1);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    const double d = (t[i + 1] - t[i]) * 1000.0;
    if (!(d > 0.0)) throw TooFewBeats("beat times are not strictly increasing");
    out.intervals_ms.push_back(d);
  }
  return out;
}

}  // namespace painmtl
