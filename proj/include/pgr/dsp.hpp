#pragma once

// Signal-processing kernels for single 512-sample analysis windows:
// windowing, magnitude spectra, bin decimation, Mel filterbank, and the
// waveform transforms used for training-time augmentation.
//
// Everything here is pure. The `*_into` overloads write into caller-owned
// storage and never allocate, which is what the streaming path uses.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

namespace pgr {

inline constexpr double kSampleRate = 44100.0;
inline constexpr std::size_t kWindowSize = 512;
inline constexpr std::size_t kChannels = 6;
inline constexpr std::size_t kSpectrumBins = kWindowSize / 2;  // Nyquist dropped
inline constexpr std::size_t kDecimation = 4;
inline constexpr std::size_t kDecimatedBins = kSpectrumBins / kDecimation;
inline constexpr std::size_t kMelBands = 80;
inline constexpr double kLogFloor = 1e-5;

/// Six pickups (magnetic + five piezos) by 512 samples, the unit of inference.
struct MultiChannelWindow {
  std::array<std::array<double, kWindowSize>, kChannels> ch{};

  std::span<double> operator[](std::size_t c) { return ch[c]; }
  std::span<const double> operator[](std::size_t c) const { return ch[c]; }
  bool operator==(const MultiChannelWindow&) const = default;
};

struct Spectrum {
  std::vector<double> bins;
  double bin_hz = kSampleRate / static_cast<double>(kWindowSize);
};

using MelVector = std::array<double, kMelBands>;

namespace dsp {

inline void check_finite(std::span<const double> xs, const char* what) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite sample");
  }
}

/// Periodic Hann: w[k] = 0.5 (1 - cos(2 pi k / n)).
inline std::vector<double> hann_window(std::size_t n) {
  if (n == 0) throw std::invalid_argument("hann_window: n must be positive");
  std::vector<double> w(n);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = 0.5 * (1.0 - std::cos(step * static_cast<double>(k)));
  return w;
}

namespace detail {

inline const std::vector<double>& hann512() {
  static const std::vector<double> w = hann_window(kWindowSize);
  return w;
}

// Planned once; fftw_execute_dft_r2c on a shared plan is thread-safe.
inline fftw_plan r2c_plan() {
  static const fftw_plan plan = [] {
    std::vector<double> in(kWindowSize);
    std::vector<fftw_complex> out(kWindowSize / 2 + 1);
    return fftw_plan_dft_r2c_1d(static_cast<int>(kWindowSize), in.data(), out.data(),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  }();
  return plan;
}

}  // namespace detail

/// Scratch buffers for allocation-free spectra.
struct FftWorkspace {
  std::array<double, kWindowSize> in{};
  std::array<fftw_complex, kWindowSize / 2 + 1> out{};
};

/// Magnitudes of DFT bins 0..255 of a 512-sample block.
inline void fft_magnitude_into(std::span<const double> block, bool windowed, std::span<double> out,
                               FftWorkspace& ws) {
  if (block.size() != kWindowSize) throw std::invalid_argument("fft_magnitude: block must hold 512 samples");
  if (out.size() != kSpectrumBins) throw std::invalid_argument("fft_magnitude: output must hold 256 bins");
  const auto& w = detail::hann512();
  for (std::size_t k = 0; k < kWindowSize; ++k) ws.in[k] = windowed ? block[k] * w[k] : block[k];
  fftw_execute_dft_r2c(detail::r2c_plan(), ws.in.data(), ws.out.data());
  for (std::size_t k = 0; k < kSpectrumBins; ++k) out[k] = std::hypot(ws.out[k][0], ws.out[k][1]);
}

inline Spectrum fft_magnitude(std::span<const double> block, bool windowed) {
  Spectrum s;
  s.bins.resize(kSpectrumBins);
  FftWorkspace ws;
  fft_magnitude_into(block, windowed, s.bins, ws);
  return s;
}

/// Mean-pools groups of four adjacent bins: 256 -> 64.
inline void decimate_bins_into(std::span<const double> in, std::span<double> out) {
  if (in.size() != kSpectrumBins) throw std::invalid_argument("decimate_bins: expected 256 input bins");
  if (out.size() != kDecimatedBins) throw std::invalid_argument("decimate_bins: expected 64 output bins");
  for (std::size_t j = 0; j < kDecimatedBins; ++j) {
    const double* g = in.data() + j * kDecimation;
    out[j] = (g[0] + g[1] + g[2] + g[3]) / 4.0;
  }
}

inline Spectrum decimate_bins(const Spectrum& spec) {
  Spectrum s;
  s.bins.resize(kDecimatedBins);
  s.bin_hz = spec.bin_hz * static_cast<double>(kDecimation);
  decimate_bins_into(spec.bins, s.bins);
  return s;
}

inline void log_compress_inplace(std::span<double> bins, double floor_eps = kLogFloor) {
  if (!(floor_eps > 0.0)) throw std::invalid_argument("log_compress: floor must be positive");
  for (double& b : bins) {
    if (b < 0.0 || std::isnan(b)) throw std::invalid_argument("log_compress: negative magnitude");
    b = std::log(b + floor_eps);
  }
}

inline Spectrum log_compress(Spectrum spec, double floor_eps = kLogFloor) {
  log_compress_inplace(spec.bins, floor_eps);
  return spec;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// 80 triangular filters, centres uniformly spaced on the HTK Mel scale over
/// 0..22050 Hz, sampled at the 256 FFT bin frequencies. Low filters narrower
/// than one bin fall back to unit weight on the bin nearest their centre, so
/// no row is empty.
class MelFilterbank {
 public:
  MelFilterbank() : weights_(kMelBands * kSpectrumBins, 0.0) {
    const double mel_max = hz_to_mel(kSampleRate / 2.0);
    std::array<double, kMelBands + 2> edges{};
    for (std::size_t i = 0; i < edges.size(); ++i)
      edges[i] = mel_to_hz(mel_max * static_cast<double>(i) / static_cast<double>(kMelBands + 1));
    const double bin_hz = kSampleRate / static_cast<double>(kWindowSize);
    for (std::size_t b = 0; b < kMelBands; ++b) {
      const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
      double row_sum = 0.0;
      for (std::size_t k = 0; k < kSpectrumBins; ++k) {
        const double f = bin_hz * static_cast<double>(k);
        double w = 0.0;
        if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
        else if (f > mid && f < hi) w = (hi - f) / (hi - mid);
        weights_[b * kSpectrumBins + k] = w;
        row_sum += w;
      }
      if (row_sum <= 0.0) {
        auto nearest = static_cast<std::size_t>(std::lround(mid / bin_hz));
        if (nearest >= kSpectrumBins) nearest = kSpectrumBins - 1;
        weights_[b * kSpectrumBins + nearest] = 1.0;
      }
    }
  }

  static const MelFilterbank& instance() {
    static const MelFilterbank fb;
    return fb;
  }

  std::size_t rows() const { return kMelBands; }
  std::size_t cols() const { return kSpectrumBins; }
  double weight(std::size_t band, std::size_t bin) const { return weights_[band * kSpectrumBins + bin]; }

  /// Linear band energies (no log).
  void apply(std::span<const double> spec, std::span<double> bands) const {
    for (std::size_t b = 0; b < kMelBands; ++b) {
      const double* row = weights_.data() + b * kSpectrumBins;
      double acc = 0.0;
      for (std::size_t k = 0; k < kSpectrumBins; ++k) acc += row[k] * spec[k];
      bands[b] = acc;
    }
  }

 private:
  std::vector<double> weights_;
};

inline void mel_filterbank_into(std::span<const double> spec, std::span<double> bands,
                                double floor_eps = kLogFloor) {
  if (spec.size() != kSpectrumBins) throw std::invalid_argument("mel_filterbank: expected 256 input bins");
  if (bands.size() != kMelBands) throw std::invalid_argument("mel_filterbank: only 80 bands are supported");
  MelFilterbank::instance().apply(spec, bands);
  log_compress_inplace(bands, floor_eps);
}

inline MelVector mel_filterbank(const Spectrum& spec, std::size_t n_bands = kMelBands,
                                double floor_eps = kLogFloor) {
  if (n_bands != kMelBands) throw std::invalid_argument("mel_filterbank: only 80 bands are supported");
  MelVector out{};
  mel_filterbank_into(spec.bins, out, floor_eps);
  return out;
}

/// Second-order Butterworth high-pass (bilinear transform, Q = 1/sqrt 2),
/// transposed direct form II.
class Biquad {
 public:
  static Biquad highpass(double cutoff_hz, double sample_rate = kSampleRate, double q = 0.7071) {
    const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate;
    const double cw = std::cos(w0);
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad f;
    f.b0_ = (1.0 + cw) / 2.0 / a0;
    f.b1_ = -(1.0 + cw) / a0;
    f.b2_ = (1.0 + cw) / 2.0 / a0;
    f.a1_ = -2.0 * cw / a0;
    f.a2_ = (1.0 - alpha) / a0;
    return f;
  }

  double process(double x) {
    const double y = b0_ * x + s1_;
    s1_ = b1_ * x - a1_ * y + s2_;
    s2_ = b2_ * x - a2_ * y;
    return y;
  }

  void reset() { s1_ = s2_ = 0.0; }

  /// |H(e^{jw})| at frequency `hz`.
  double magnitude_at(double hz, double sample_rate = kSampleRate) const {
    const double w = 2.0 * std::numbers::pi * hz / sample_rate;
    const double c1 = std::cos(w), s1 = std::sin(w), c2 = std::cos(2 * w), s2 = std::sin(2 * w);
    const double nr = b0_ + b1_ * c1 + b2_ * c2, ni = -(b1_ * s1 + b2_ * s2);
    const double dr = 1.0 + a1_ * c1 + a2_ * c2, di = -(a1_ * s1 + a2_ * s2);
    return std::sqrt((nr * nr + ni * ni) / (dr * dr + di * di));
  }

 private:
  double b0_ = 1, b1_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
  double s1_ = 0, s2_ = 0;
};

inline void check_highpass_cutoff(double cutoff_hz) {
  if (cutoff_hz != 80.0 && cutoff_hz != 160.0)
    throw std::invalid_argument("highpass: cutoff must be 80 or 160 Hz");
}

inline void highpass_inplace(std::span<double> block, double cutoff_hz) {
  check_highpass_cutoff(cutoff_hz);
  auto f = Biquad::highpass(cutoff_hz);
  for (double& x : block) x = f.process(x);
}

inline std::vector<double> highpass(std::span<const double> block, double cutoff_hz) {
  std::vector<double> out(block.begin(), block.end());
  highpass_inplace(out, cutoff_hz);
  return out;
}

inline void waveshape_tanh_inplace(std::span<double> block, double gain) {
  if (!(gain > 0.0)) throw std::invalid_argument("waveshape_tanh: gain must be positive");
  for (double& x : block) x = std::tanh(gain * x);
}

inline std::vector<double> waveshape_tanh(std::span<const double> block, double gain) {
  std::vector<double> out(block.begin(), block.end());
  waveshape_tanh_inplace(out, gain);
  return out;
}

inline void invert_phase_inplace(std::span<double> block) {
  for (double& x : block) x = -x;
}

inline std::vector<double> invert_phase(std::span<const double> block) {
  std::vector<double> out(block.begin(), block.end());
  invert_phase_inplace(out);
  return out;
}

inline constexpr double kDefaultChannelGainRangeDb = 6.0;

inline double db_to_gain(double db) { return std::pow(10.0, db / 20.0); }

/// Multiplies channel i by 10^(gains_db[i]/20). Gains must lie in
/// [-range_db, +range_db].
inline void scale_channels_inplace(MultiChannelWindow& w, std::span<const double> gains_db,
                                   double range_db = kDefaultChannelGainRangeDb) {
  if (gains_db.size() != kChannels) throw std::invalid_argument("scale_channels: need 6 gains");
  for (double g : gains_db) {
    if (!std::isfinite(g) || std::abs(g) > range_db + 1e-9)
      throw std::invalid_argument("scale_channels: gain outside configured range");
  }
  for (std::size_t c = 0; c < kChannels; ++c) {
    const double g = db_to_gain(gains_db[c]);
    for (double& x : w.ch[c]) x *= g;
  }
}

inline MultiChannelWindow scale_channels(MultiChannelWindow w, std::span<const double> gains_db,
                                         double range_db = kDefaultChannelGainRangeDb) {
  scale_channels_inplace(w, gains_db, range_db);
  return w;
}

}  // namespace dsp
}  // namespace pgr
