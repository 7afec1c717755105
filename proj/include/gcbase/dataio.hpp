// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Audio/EEG data model, preprocessing, mixing, segmentation and the
// synthetic paired-data generator.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/errors.hpp"
#include "gcbase/random.hpp"
#include "gcbase/tensor.hpp"

namespace gcbase::dataio {

struct Waveform {
  std::vector<double> samples;
  double rate_hz = 0.0;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_s() const { return static_cast<double>(samples.size()) / rate_hz; }
  void validate() const {
    if (!(rate_hz > 0.0)) throw InvariantError("waveform sample rate must be positive");
    for (double v : samples)
      if (!std::isfinite(v)) throw InvariantError("waveform contains non-finite samples");
  }
};

/// Multichannel EEG, [channels x time].
struct EEGTrial {
  Tensor<double> data;
  double rate_hz = 0.0;
  std::string layout_id;

  std::size_t channels() const { return data.rows(); }
  std::size_t length() const { return data.cols(); }
  void validate(std::size_t expected_channels) const {
    if (!(rate_hz > 0.0)) throw InvariantError("EEG sample rate must be positive");
    if (data.rank() != 2 || data.rows() != expected_channels)
      throw InvariantError("EEG has " + std::to_string(data.rows()) + " rows, layout has " +
                           std::to_string(expected_channels) + " electrodes");
    for (double v : data.storage())
      if (!std::isfinite(v)) throw InvariantError("EEG contains non-finite samples");
  }
};

/// One trial: mixture, the target it contains, the interferer, and EEG.
struct PairedTrial {
  std::string id;
  std::string subject;
  Waveform mixture;
  Waveform target;
  Waveform interferer;
  EEGTrial eeg;
};

/// A training/evaluation example cut from a trial.
struct Segment {
  Waveform mixture;
  Waveform target;
  Tensor<double> eeg;  // [channels x time]
  double eeg_rate_hz = 0.0;
  std::string trial_id;
  std::string subject;
  std::size_t index = 0;

  void validate() const {
    if (mixture.size() != target.size() || mixture.rate_hz != target.rate_hz)
      throw InvariantError("segment mixture and target differ in length or rate");
    const double da = mixture.duration_s();
    const double de = static_cast<double>(eeg.cols()) / eeg_rate_hz;
    if (std::abs(da - de) > 1.0 / eeg_rate_hz + 1e-9)
      throw InvariantError("segment EEG duration differs from audio duration by more than one EEG sample");
  }
};

// ---------------------------------------------------------------- filtering

/// Second-order section in transposed direct form II, a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

namespace detail {

// Quality factors of the conjugate pole pairs of an even-order Butterworth
// prototype.
inline std::vector<double> butterworth_q(int order) {
  std::vector<double> q;
  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1.0) / (2.0 * order);
    q.push_back(-1.0 / (2.0 * std::cos(theta)));
  }
  return q;
}

inline Biquad rbj(double fc, double fs, double q, bool highpass) {
  const double w0 = 2.0 * std::numbers::pi * fc / fs;
  const double cw = std::cos(w0), alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad s;
  if (highpass) {
    s.b0 = (1.0 + cw) / 2.0 / a0;
    s.b1 = -(1.0 + cw) / a0;
  } else {
    s.b0 = (1.0 - cw) / 2.0 / a0;
    s.b1 = (1.0 - cw) / a0;
  }
  s.b2 = s.b0;
  s.a1 = -2.0 * cw / a0;
  s.a2 = (1.0 - alpha) / a0;
  return s;
}

// Filters in place starting from steady-state conditions for a constant
// input equal to x[0].
inline void sosfilt_steady(const std::vector<Biquad>& sos, std::vector<double>& x) {
  if (x.empty()) return;
  double level = x[0];
  for (const auto& s : sos) {
    const double g = s.dc_gain();
    double z2 = (s.b2 - s.a2 * g) * level;
    double z1 = (g - s.b0) * level;
    for (double& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
    level *= g;
  }
}

}  // namespace detail

inline std::vector<Biquad> butterworth(int order, double fc, double fs, bool highpass) {
  std::vector<Biquad> sos;
  for (double q : detail::butterworth_q(order)) sos.push_back(detail::rbj(fc, fs, q, highpass));
  return sos;
}

/// Zero-phase (forward-backward) filtering with odd-reflection padding.
inline std::vector<double> filtfilt(const std::vector<Biquad>& sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t padlen = std::min<std::size_t>(3 * (2 * sos.size() + 1), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);
  detail::sosfilt_steady(sos, ext);
  std::reverse(ext.begin(), ext.end());
  detail::sosfilt_steady(sos, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(padlen), ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

inline std::vector<double> bandpass(std::span<const double> x, double rate_hz, double lo_hz, double hi_hz,
                                    int order = 4) {
  if (!(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < rate_hz / 2.0))
    throw ConfigError("invalid band [" + std::to_string(lo_hz) + ", " + std::to_string(hi_hz) + "] Hz at " +
                      std::to_string(rate_hz) + " Hz");
  auto sos = butterworth(order, lo_hz, rate_hz, true);
  const auto lp = butterworth(order, hi_hz, rate_hz, false);
  sos.insert(sos.end(), lp.begin(), lp.end());
  return filtfilt(sos, x);
}

inline std::vector<double> lowpass(std::span<const double> x, double rate_hz, double cutoff_hz, int order = 4) {
  if (!(cutoff_hz > 0.0 && cutoff_hz < rate_hz / 2.0)) throw ConfigError("invalid low-pass cutoff");
  return filtfilt(butterworth(order, cutoff_hz, rate_hz, false), x);
}

inline Waveform bandpass(const Waveform& x, double lo_hz, double hi_hz) {
  return {bandpass(x.samples, x.rate_hz, lo_hz, hi_hz), x.rate_hz};
}

inline EEGTrial bandpass(const EEGTrial& x, double lo_hz, double hi_hz) {
  EEGTrial out = x;
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const auto row = bandpass(x.data.row(c), x.rate_hz, lo_hz, hi_hz);
    std::copy(row.begin(), row.end(), out.data.row(c).begin());
  }
  return out;
}

/// Subtracts the per-sample mean of the two mastoid channels from every row.
inline EEGTrial rereference_mastoid(const EEGTrial& eeg, std::optional<std::pair<std::size_t, std::size_t>> mastoids) {
  if (!mastoids) throw ConfigError("re-referencing requires a layout with mastoid electrodes");
  const auto [m1, m2] = *mastoids;
  if (m1 >= eeg.channels() || m2 >= eeg.channels()) throw InvariantError("mastoid index outside the EEG matrix");
  EEGTrial out = eeg;
  for (std::size_t t = 0; t < eeg.length(); ++t) {
    const double ref = 0.5 * (eeg.data(m1, t) + eeg.data(m2, t));
    for (std::size_t c = 0; c < eeg.channels(); ++c) out.data(c, t) = eeg.data(c, t) - ref;
  }
  return out;
}

// --------------------------------------------------------------- resampling

/// Output length for a rate change: floor(n * out / in).
inline std::size_t resampled_length(std::size_t n, double in_rate, double out_rate) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * out_rate / in_rate + 1e-9));
}

/// Band-limited interpolation with a Hann-windowed sinc kernel whose cutoff
/// sits just below the lower of the two Nyquist frequencies.
inline std::vector<double> resample(std::span<const double> x, double in_rate, double out_rate) {
  if (!(in_rate > 0.0) || !(out_rate > 0.0)) throw ConfigError("resample: rates must be positive");
  if (in_rate == out_rate) return {x.begin(), x.end()};
  const std::size_t n_out = resampled_length(x.size(), in_rate, out_rate);
  constexpr double kZeros = 16.0;
  const double fc = 0.95 * 0.5 * std::min(in_rate, out_rate);
  const double half_width_s = kZeros / (2.0 * fc);
  const double gain = 2.0 * fc / in_rate;
  std::vector<double> y(n_out, 0.0);
  for (std::size_t m = 0; m < n_out; ++m) {
    const double t = static_cast<double>(m) / out_rate;
    const auto lo = static_cast<std::ptrdiff_t>(std::ceil((t - half_width_s) * in_rate));
    const auto hi = static_cast<std::ptrdiff_t>(std::floor((t + half_width_s) * in_rate));
    double acc = 0.0;
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(lo, 0);
         k <= std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(x.size()) - 1); ++k) {
      const double tau = t - static_cast<double>(k) / in_rate;
      const double arg = 2.0 * fc * tau;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
      const double win = 0.5 * (1.0 + std::cos(std::numbers::pi * tau / half_width_s));
      acc += x[static_cast<std::size_t>(k)] * gain * sinc * win;
    }
    y[m] = acc;
  }
  return y;
}

inline Waveform resample(const Waveform& x, double out_rate) {
  if (!(out_rate > 0.0)) throw ConfigError("resample: output rate must be positive");
  return {resample(x.samples, x.rate_hz, out_rate), out_rate};
}

inline EEGTrial resample(const EEGTrial& x, double out_rate) {
  if (x.rate_hz == out_rate) return x;
  const std::size_t n = resampled_length(x.length(), x.rate_hz, out_rate);
  EEGTrial out{Tensor<double>({x.channels(), n}), out_rate, x.layout_id};
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const auto row = resample(x.data.row(c), x.rate_hz, out_rate);
    std::copy(row.begin(), row.end(), out.data.row(c).begin());
  }
  return out;
}

// -------------------------------------------------------------------- mixing

inline double rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

/// 10*log10(energy(signal) / energy(noise)).
inline double snr_db(std::span<const double> signal, std::span<const double> noise) {
  double es = 0.0, en = 0.0;
  for (double v : signal) es += v * v;
  for (double v : noise) en += v * v;
  return 10.0 * std::log10(es / en);
}

struct Mixture {
  Waveform mixture;
  Waveform target;      // RMS-normalized target (supervision signal)
  Waveform interferer;  // RMS-normalized and SNR-scaled interferer
  double interferer_gain = 1.0;
};

/// Normalizes both inputs to unit RMS, scales the interferer to the
/// requested SNR and sums.
inline Mixture mix_at_snr(const Waveform& target, const Waveform& interferer, double snr_db_value) {
  if (target.size() != interferer.size() || target.rate_hz != interferer.rate_hz)
    throw DataError("mix_at_snr: target and interferer differ in length or rate");
  if (!std::isfinite(snr_db_value)) throw ConfigError("mix_at_snr: SNR must be finite");
  const double rt = rms(target.samples), ri = rms(interferer.samples);
  if (!(rt > 0.0) || !(ri > 0.0)) throw DataError("mix_at_snr: zero-energy input");
  const double gain = std::pow(10.0, -snr_db_value / 20.0);
  Mixture m;
  m.interferer_gain = gain;
  m.target.rate_hz = m.interferer.rate_hz = m.mixture.rate_hz = target.rate_hz;
  const std::size_t n = target.size();
  m.target.samples.resize(n);
  m.interferer.samples.resize(n);
  m.mixture.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.target.samples[i] = target.samples[i] / rt;
    m.interferer.samples[i] = gain * interferer.samples[i] / ri;
    m.mixture.samples[i] = m.target.samples[i] + m.interferer.samples[i];
  }
  return m;
}

// -------------------------------------------------------------- segmentation

inline Tensor<double> slice_columns(const Tensor<double>& m, std::size_t begin, std::size_t count) {
  Tensor<double> out({m.rows(), count});
  for (std::size_t r = 0; r < m.rows(); ++r)
    std::copy_n(m.data() + r * m.cols() + begin, count, out.data() + r * count);
  return out;
}

inline Tensor<double> select_rows(const Tensor<double>& m, const std::vector<std::size_t>& rows) {
  Tensor<double> out({rows.size(), m.cols()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) throw InvariantError("row index outside the EEG matrix");
    std::copy_n(m.data() + rows[i] * m.cols(), m.cols(), out.data() + i * m.cols());
  }
  return out;
}

/// Cuts a trial into consecutive non-overlapping segments of `seg_len_s`
/// seconds. A trailing remainder shorter than one segment is dropped.
inline std::vector<Segment> segment(const PairedTrial& trial, double seg_len_s) {
  if (!(seg_len_s > 0.0)) throw ConfigError("segment length must be positive");
  const double ra = trial.mixture.rate_hz, re = trial.eeg.rate_hz;
  const auto na = static_cast<std::size_t>(std::llround(seg_len_s * ra));
  const auto ne = static_cast<std::size_t>(std::llround(seg_len_s * re));
  if (na == 0 || ne == 0) throw ConfigError("segment length shorter than one sample");
  const std::size_t count = std::min(trial.mixture.size() / na, trial.eeg.length() / ne);
  std::vector<Segment> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Segment s;
    s.mixture = {{trial.mixture.samples.begin() + static_cast<std::ptrdiff_t>(k * na),
                  trial.mixture.samples.begin() + static_cast<std::ptrdiff_t>((k + 1) * na)},
                 ra};
    s.target = {{trial.target.samples.begin() + static_cast<std::ptrdiff_t>(k * na),
                 trial.target.samples.begin() + static_cast<std::ptrdiff_t>((k + 1) * na)},
                ra};
    s.eeg = slice_columns(trial.eeg.data, k * ne, ne);
    s.eeg_rate_hz = re;
    s.trial_id = trial.id;
    s.subject = trial.subject;
    s.index = k;
    out.push_back(std::move(s));
  }
  return out;
}

// --------------------------------------------------------- EEG preprocessing

/// Feature extraction applied after filtering and re-referencing. The default
/// passes the band-limited EEG through unchanged.
using EegFeatureHook = std::function<EEGTrial(const EEGTrial&)>;

struct PreprocessConfig {
  double band_lo_hz = 0.1;
  double band_hi_hz = 45.0;
  bool apply_bandpass = true;
  bool rereference = true;  // only when the layout has mastoids
  bool standardize = true;  // per-channel zero mean, unit variance after filtering
  double eeg_rate_hz = 128.0;
  double audio_rate_hz = 8000.0;
};

inline void to_json(nlohmann::json& j, const PreprocessConfig& c) {
  j = {{"band_hz", {c.band_lo_hz, c.band_hi_hz}}, {"bandpass", c.apply_bandpass}, {"rereference", c.rereference},
       {"standardize", c.standardize},           {"eeg_rate_hz", c.eeg_rate_hz}, {"audio_rate_hz", c.audio_rate_hz}};
}

inline void from_json(const nlohmann::json& j, PreprocessConfig& c) {
  PreprocessConfig d;
  if (j.contains("band_hz")) {
    const auto b = j.at("band_hz").get<std::vector<double>>();
    if (b.size() != 2) throw ConfigError("preprocess: band_hz needs two values");
    c.band_lo_hz = b[0];
    c.band_hi_hz = b[1];
  }
  c.apply_bandpass = j.value("bandpass", d.apply_bandpass);
  c.rereference = j.value("rereference", d.rereference);
  c.standardize = j.value("standardize", d.standardize);
  c.eeg_rate_hz = j.value("eeg_rate_hz", d.eeg_rate_hz);
  c.audio_rate_hz = j.value("audio_rate_hz", d.audio_rate_hz);
  if (!(c.eeg_rate_hz > 0.0) || !(c.audio_rate_hz > 0.0)) throw ConfigError("preprocess: rates must be positive");
}

inline void standardize(std::vector<double>& v);

inline EEGTrial preprocess_eeg(const EEGTrial& eeg, const PreprocessConfig& cfg,
                               std::optional<std::pair<std::size_t, std::size_t>> mastoids,
                               const EegFeatureHook& hook = {}) {
  EEGTrial out = resample(eeg, cfg.eeg_rate_hz);
  if (cfg.apply_bandpass) out = bandpass(out, cfg.band_lo_hz, cfg.band_hi_hz);
  if (cfg.rereference && mastoids) out = rereference_mastoid(out, mastoids);
  if (hook) out = hook(out);
  if (cfg.standardize)
    for (std::size_t c = 0; c < out.channels(); ++c) {
      auto row = out.data.row(c);
      std::vector<double> v(row.begin(), row.end());
      standardize(v);
      std::copy(v.begin(), v.end(), row.begin());
    }
  return out;
}

// ------------------------------------------------------------ synthetic data

struct SynthSpec {
  std::size_t n_channels = 24;
  std::vector<std::size_t> informative;
  double snr_db = 0.0;
  double duration_s = 20.0;
  double audio_rate_hz = 8000.0;
  double eeg_rate_hz = 128.0;
  double noise_corr = 0.0;
  // Generator details (not part of the minimal data contract).
  std::pair<double, double> target_band_hz{200.0, 3000.0};
  std::pair<double, double> interferer_band_hz{200.0, 3000.0};
  double syllable_rate_hz = 4.0;
  double envelope_floor = 0.05;
  double informative_gain = 1.0;
  double leak_gain = 0.1;

  void validate() const {
    if (n_channels == 0) throw ConfigError("synth: n_channels must be positive");
    for (auto c : informative)
      if (c >= n_channels) throw ConfigError("synth: informative channel " + std::to_string(c) + " out of range");
    if (!(duration_s > 0.0)) throw ConfigError("synth: duration must be positive");
    if (!(audio_rate_hz > 0.0) || !(eeg_rate_hz > 0.0)) throw ConfigError("synth: rates must be positive");
    if (!(noise_corr >= 0.0 && noise_corr < 1.0)) throw ConfigError("synth: noise_corr must lie in [0, 1)");
    if (!(syllable_rate_hz > 0.0)) throw ConfigError("synth: syllable rate must be positive");
  }
};

inline void to_json(nlohmann::json& j, const SynthSpec& s) {
  j = {{"n_channels", s.n_channels},
       {"informative", s.informative},
       {"snr_db", s.snr_db},
       {"duration_s", s.duration_s},
       {"audio_rate_hz", s.audio_rate_hz},
       {"eeg_rate_hz", s.eeg_rate_hz},
       {"noise_corr", s.noise_corr},
       {"target_band_hz", {s.target_band_hz.first, s.target_band_hz.second}},
       {"interferer_band_hz", {s.interferer_band_hz.first, s.interferer_band_hz.second}},
       {"syllable_rate_hz", s.syllable_rate_hz},
       {"envelope_floor", s.envelope_floor},
       {"informative_gain", s.informative_gain},
       {"leak_gain", s.leak_gain}};
}

inline void from_json(const nlohmann::json& j, SynthSpec& s) {
  SynthSpec d;
  s.n_channels = j.value("n_channels", d.n_channels);
  s.informative = j.value("informative", d.informative);
  s.snr_db = j.value("snr_db", d.snr_db);
  s.duration_s = j.value("duration_s", d.duration_s);
  s.audio_rate_hz = j.value("audio_rate_hz", d.audio_rate_hz);
  s.eeg_rate_hz = j.value("eeg_rate_hz", d.eeg_rate_hz);
  s.noise_corr = j.value("noise_corr", d.noise_corr);
  auto band = [&](const char* key, std::pair<double, double> def) {
    if (!j.contains(key)) return def;
    const auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 2) throw ConfigError(std::string("synth: ") + key + " needs two values");
    return std::make_pair(v[0], v[1]);
  };
  s.target_band_hz = band("target_band_hz", d.target_band_hz);
  s.interferer_band_hz = band("interferer_band_hz", d.interferer_band_hz);
  s.syllable_rate_hz = j.value("syllable_rate_hz", d.syllable_rate_hz);
  s.envelope_floor = j.value("envelope_floor", d.envelope_floor);
  s.informative_gain = j.value("informative_gain", d.informative_gain);
  s.leak_gain = j.value("leak_gain", d.leak_gain);
  s.validate();
}

/// Rectify, low-pass at 8 Hz, resample to `out_rate`.
inline std::vector<double> envelope(const Waveform& x, double out_rate, double cutoff_hz = 8.0) {
  std::vector<double> rect(x.samples.size());
  std::transform(x.samples.begin(), x.samples.end(), rect.begin(), [](double v) { return std::abs(v); });
  return resample(lowpass(rect, x.rate_hz, cutoff_hz), x.rate_hz, out_rate);
}

inline void standardize(std::vector<double>& v) {
  if (v.empty()) return;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

struct SynthTrial {
  Waveform target;
  Waveform interferer;
  EEGTrial eeg;
};

namespace detail {

// Band-limited noise under a syllable-like on/off amplitude envelope.
inline Waveform speech_like(std::size_t n, double rate, std::pair<double, double> band, double syllable_rate,
                            double floor, Rng& rng) {
  std::vector<double> noise(n);
  for (double& v : noise) v = rng.normal();
  noise = bandpass(noise, rate, band.first, band.second);

  std::vector<double> gate(n);
  bool on = rng.uniform() < 0.5;
  std::size_t i = 0;
  while (i < n) {
    const double dur_s = rng.uniform(0.5, 1.5) / (2.0 * syllable_rate);
    const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(dur_s * rate));
    for (std::size_t k = 0; k < len && i < n; ++k, ++i) gate[i] = on ? 1.0 : 0.0;
    on = !on;
  }
  gate = lowpass(gate, rate, std::min(8.0, 0.45 * rate));
  for (std::size_t k = 0; k < n; ++k) noise[k] *= floor + (1.0 - floor) * std::clamp(gate[k], 0.0, 1.0);
  const double r = rms(noise);
  if (r > 0.0)
    for (double& v : noise) v /= r;
  return {std::move(noise), rate};
}

}  // namespace detail

/// Generates an independent target/interferer pair and EEG in which channel c
/// equals a_c * env(target) + b * env(interferer) + noise, with a_c non-zero
/// only on the informative channels. Envelopes are standardized; noise is
/// unit-variance with pairwise correlation `noise_corr`.
inline SynthTrial synth_trial(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng root(seed);
  Rng rt = root.fork(1), ri = root.fork(2), re = root.fork(3);
  const auto na = static_cast<std::size_t>(std::llround(spec.duration_s * spec.audio_rate_hz));
  SynthTrial out;
  out.target = detail::speech_like(na, spec.audio_rate_hz, spec.target_band_hz, spec.syllable_rate_hz,
                                   spec.envelope_floor, rt);
  out.interferer = detail::speech_like(na, spec.audio_rate_hz, spec.interferer_band_hz, spec.syllable_rate_hz,
                                       spec.envelope_floor, ri);
  auto env_t = envelope(out.target, spec.eeg_rate_hz);
  auto env_i = envelope(out.interferer, spec.eeg_rate_hz);
  standardize(env_t);
  standardize(env_i);
  const std::size_t ne = env_t.size();

  std::vector<bool> informative(spec.n_channels, false);
  for (auto c : spec.informative) informative[c] = true;
  out.eeg.rate_hz = spec.eeg_rate_hz;
  out.eeg.data = Tensor<double>({spec.n_channels, ne});
  const double shared = std::sqrt(spec.noise_corr), own = std::sqrt(1.0 - spec.noise_corr);
  std::vector<double> common(ne);
  for (double& v : common) v = re.normal();
  for (std::size_t c = 0; c < spec.n_channels; ++c) {
    const double a = informative[c] ? spec.informative_gain : 0.0;
    for (std::size_t t = 0; t < ne; ++t)
      out.eeg.data(c, t) = a * env_t[t] + spec.leak_gain * env_i[t] + shared * common[t] + own * re.normal();
  }
  return out;
}

/// Pearson correlation of two equally long sequences.
inline double correlation(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) return 0.0;
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return (saa > 0 && sbb > 0) ? sab / std::sqrt(saa * sbb) : 0.0;
}

}  // namespace gcbase::dataio
