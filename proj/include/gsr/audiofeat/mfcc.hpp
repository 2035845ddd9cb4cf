#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "gsr/audiofeat/wav.hpp"
#include "gsr/numcore/tensor.hpp"

namespace gsr {

/// Time-major acoustic features, [frames x dims]; 13 dims plain, 37 with deltas.
using FeatureMatrix = Tensor<float>;

class UnsupportedAudioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SignalTooShortError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct MfccConfig {
  int sample_rate = 16000;
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  std::size_t fft_size = 512;
  std::size_t n_mels = 26;
  std::size_t n_coeffs = 12;
  double preemphasis = 0.97;
  double log_floor = 1e-10;
  bool with_energy = true;

  std::size_t frame_length() const { return std::size_t(std::lround(sample_rate * frame_length_ms / 1000.0)); }
  std::size_t frame_shift() const { return std::size_t(std::lround(sample_rate * frame_shift_ms / 1000.0)); }
  std::size_t base_dims() const { return n_coeffs + (with_energy ? 1 : 0); }
};

inline constexpr std::size_t kPlainDims = 13;
inline constexpr std::size_t kDeltaDims = 37;

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Cuts the signal to at most max_ms milliseconds.
inline AudioSignal truncate(const AudioSignal& signal, double max_ms) {
  if (!(max_ms > 0)) throw std::invalid_argument("truncate: max_ms must be positive");
  const auto limit = std::size_t(std::floor(max_ms * signal.sample_rate / 1000.0));
  AudioSignal out = signal;
  if (out.samples.size() > limit) out.samples.resize(limit);
  return out;
}

inline std::size_t frame_count(std::size_t samples, const MfccConfig& cfg = {}) {
  const std::size_t len = cfg.frame_length();
  if (samples < len) return 0;
  return (samples - len) / cfg.frame_shift() + 1;
}

/// Triangular mel filterbank spanning 0 to Nyquist. The m-th filter rises from
/// edge m to its center at edge m+1 and falls to edge m+2, with edges evenly
/// spaced on the mel scale. Rows are filters, columns FFT bins 0..fft_size/2.
class MelFilterbank {
 public:
  explicit MelFilterbank(const MfccConfig& cfg) : n_bins_(cfg.fft_size / 2 + 1), n_mels_(cfg.n_mels) {
    const double nyquist = cfg.sample_rate / 2.0;
    const double top = hz_to_mel(nyquist);
    edges_.resize(n_mels_ + 2);
    for (std::size_t i = 0; i < edges_.size(); ++i) edges_[i] = mel_to_hz(top * double(i) / double(n_mels_ + 1));
    weights_.assign(n_mels_ * n_bins_, 0.0);
    for (std::size_t m = 0; m < n_mels_; ++m) {
      const double lo = edges_[m], mid = edges_[m + 1], hi = edges_[m + 2];
      for (std::size_t k = 0; k < n_bins_; ++k) {
        const double f = double(k) * cfg.sample_rate / double(cfg.fft_size);
        double w = 0;
        if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
        else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
        weights_[m * n_bins_ + k] = w;
      }
    }
  }

  std::size_t size() const { return n_mels_; }
  std::size_t bins() const { return n_bins_; }
  double center_hz(std::size_t m) const { return edges_[m + 1]; }
  double weight(std::size_t m, std::size_t bin) const { return weights_[m * n_bins_ + bin]; }

  std::vector<double> apply(const std::vector<double>& power) const {
    std::vector<double> out(n_mels_, 0.0);
    for (std::size_t m = 0; m < n_mels_; ++m) {
      const double* w = &weights_[m * n_bins_];
      double acc = 0;
      for (std::size_t k = 0; k < n_bins_; ++k) acc += w[k] * power[k];
      out[m] = acc;
    }
    return out;
  }

 private:
  std::size_t n_bins_;
  std::size_t n_mels_;
  std::vector<double> edges_;
  std::vector<double> weights_;
};

namespace detail {

// Plan creation and destruction in FFTW are not thread-safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n_);
    out_ = fftw_alloc_complex(n_ / 2 + 1);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(int(n_), in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  /// |X_k|^2 for k = 0..n/2 of the zero-padded input.
  std::vector<double> power(const std::vector<double>& frame) {
    std::fill(in_, in_ + n_, 0.0);
    std::copy_n(frame.begin(), std::min(frame.size(), n_), in_);
    fftw_execute(plan_);
    std::vector<double> p(n_ / 2 + 1);
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    return p;
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

inline void check_signal(const AudioSignal& signal, const MfccConfig& cfg) {
  if (signal.sample_rate != cfg.sample_rate)
    throw UnsupportedAudioError("expected " + std::to_string(cfg.sample_rate) + " Hz audio, got " +
                                std::to_string(signal.sample_rate) + " Hz");
  if (signal.samples.size() < cfg.frame_length())
    throw SignalTooShortError("signal of " + std::to_string(signal.samples.size()) +
                              " samples is shorter than one analysis window");
  for (double s : signal.samples)
    if (!std::isfinite(s)) throw std::invalid_argument("signal contains non-finite samples");
}

/// Applies pre-emphasis and slices the signal into frames; returns the raw frames.
inline std::vector<std::vector<double>> frames_of(const AudioSignal& signal, const MfccConfig& cfg) {
  std::vector<double> emph(signal.samples.size());
  for (std::size_t i = 0; i < emph.size(); ++i)
    emph[i] = signal.samples[i] - (i ? cfg.preemphasis * signal.samples[i - 1] : 0.0);
  const std::size_t n = frame_count(emph.size(), cfg), len = cfg.frame_length(), hop = cfg.frame_shift();
  std::vector<std::vector<double>> frames(n);
  for (std::size_t t = 0; t < n; ++t) frames[t].assign(emph.begin() + t * hop, emph.begin() + t * hop + len);
  return frames;
}

}  // namespace detail

/// Mel filterbank energies per frame (before the log), [frames x n_mels].
inline Tensor<double> filterbank_energies(const AudioSignal& signal, const MfccConfig& cfg = {}) {
  detail::check_signal(signal, cfg);
  const MelFilterbank bank(cfg);
  detail::RealFft fft(cfg.fft_size);
  const auto frames = detail::frames_of(signal, cfg);
  const std::size_t len = cfg.frame_length();
  std::vector<double> window(len);
  for (std::size_t i = 0; i < len; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(i) / double(len - 1));
  Tensor<double> out(Shape{frames.size(), bank.size()});
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::vector<double> w = frames[t];
    for (std::size_t i = 0; i < len; ++i) w[i] *= window[i];
    const auto e = bank.apply(fft.power(w));
    std::copy(e.begin(), e.end(), out.row(t).begin());
  }
  return out;
}

/// 12 cepstral coefficients (c1..c12, c0 dropped) plus log total frame energy.
inline FeatureMatrix mfcc(const AudioSignal& signal, const MfccConfig& cfg = {}) {
  const Tensor<double> fbank = filterbank_energies(signal, cfg);
  const auto frames = detail::frames_of(signal, cfg);
  const std::size_t M = cfg.n_mels, D = cfg.base_dims();
  if (cfg.n_coeffs >= M) throw std::invalid_argument("mfcc: more coefficients than mel filters");
  // orthonormal DCT-II basis rows for k = 1..n_coeffs
  std::vector<double> basis(cfg.n_coeffs * M);
  for (std::size_t k = 1; k <= cfg.n_coeffs; ++k)
    for (std::size_t m = 0; m < M; ++m)
      basis[(k - 1) * M + m] =
          std::sqrt(2.0 / double(M)) * std::cos(std::numbers::pi * double(k) * (double(m) + 0.5) / double(M));

  FeatureMatrix out(Shape{frames.size(), D});
  std::vector<double> logmel(M);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t m = 0; m < M; ++m) logmel[m] = std::log(std::max(fbank(t, m), cfg.log_floor));
    for (std::size_t k = 0; k < cfg.n_coeffs; ++k) {
      double acc = 0;
      for (std::size_t m = 0; m < M; ++m) acc += basis[k * M + m] * logmel[m];
      out(t, k) = float(acc);
    }
    if (cfg.with_energy) {
      double energy = 0;
      for (double s : frames[t]) energy += s * s;
      out(t, cfg.n_coeffs) = float(std::log(std::max(energy, cfg.log_floor)));
    }
  }
  return out;
}

/// Regression delta over +-`window` frames with edge replication.
inline std::vector<std::vector<double>> regression_delta(const std::vector<std::vector<double>>& x,
                                                         int window = 2) {
  const int T = int(x.size());
  double denom = 0;
  for (int n = 1; n <= window; ++n) denom += 2.0 * n * n;
  std::vector<std::vector<double>> d(x.size(), std::vector<double>(x.empty() ? 0 : x[0].size(), 0.0));
  for (int t = 0; t < T; ++t)
    for (int n = 1; n <= window; ++n) {
      const auto& fwd = x[std::size_t(std::min(t + n, T - 1))];
      const auto& bwd = x[std::size_t(std::max(t - n, 0))];
      for (std::size_t c = 0; c < d[t].size(); ++c) d[t][c] += n * (fwd[c] - bwd[c]) / denom;
    }
  return d;
}

/// Appends first and second order deltas of the cepstral coefficients (not of
/// the energy term): [c1..c12, logE, dc1..dc12, ddc1..ddc12], 37 dims.
inline FeatureMatrix add_deltas(const FeatureMatrix& feats, std::size_t n_coeffs = 12) {
  const std::size_t T = feats.rows(), D = feats.cols();
  if (T == 0) throw SignalTooShortError("add_deltas: no frames");
  if (D < n_coeffs) throw DimensionError("add_deltas: expected at least " + std::to_string(n_coeffs) + " dims");
  std::vector<std::vector<double>> ceps(T, std::vector<double>(n_coeffs));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < n_coeffs; ++c) ceps[t][c] = feats(t, c);
  const auto d1 = regression_delta(ceps);
  const auto d2 = regression_delta(d1);
  FeatureMatrix out(Shape{T, D + 2 * n_coeffs});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < D; ++c) out(t, c) = feats(t, c);
    for (std::size_t c = 0; c < n_coeffs; ++c) {
      out(t, D + c) = float(d1[t][c]);
      out(t, D + n_coeffs + c) = float(d2[t][c]);
    }
  }
  return out;
}

/// Front end for one utterance: optional truncation, MFCC, optional deltas.
struct FeaturizerConfig {
  MfccConfig mfcc;
  bool deltas = false;
  double max_ms = 0;  ///< 0 disables truncation

  std::size_t dims() const { return mfcc.base_dims() + (deltas ? 2 * mfcc.n_coeffs : 0); }
};

inline FeatureMatrix featurize(const AudioSignal& signal, const FeaturizerConfig& cfg) {
  const AudioSignal cut = cfg.max_ms > 0 ? truncate(signal, cfg.max_ms) : signal;
  FeatureMatrix base = mfcc(cut, cfg.mfcc);
  return cfg.deltas ? add_deltas(base, cfg.mfcc.n_coeffs) : base;
}

}  // namespace gsr
