#pragma once

// Turns a captured 6x512 window into the network input: a 6x64 log
// spectrum for the PercNet family or a 1x6x80 log-Mel plane for TablaCNN.

#include <span>
#include <stdexcept>
#include <vector>

#include "pgr/dsp.hpp"
#include "pgr/models.hpp"

namespace pgr {

enum class FeatureKind { fft64, mel80 };

inline FeatureKind feature_kind(models::ArchitectureId a) {
  return a == models::ArchitectureId::tabla_cnn ? FeatureKind::mel80 : FeatureKind::fft64;
}

inline std::size_t feature_size(FeatureKind k) {
  return kChannels * (k == FeatureKind::fft64 ? kDecimatedBins : kMelBands);
}

/// Reusable extractor; after construction extract() does not allocate.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureKind kind, models::FeatureMeta meta = {})
      : kind_(kind), meta_(meta), mag_(kSpectrumBins), band_(kMelBands) {}

  FeatureKind kind() const { return kind_; }
  std::size_t size() const { return feature_size(kind_); }

  /// Writes channel-major features into `out` (size()).
  void extract(const MultiChannelWindow& w, std::span<float> out) {
    if (out.size() != size()) throw std::invalid_argument("FeatureExtractor: output span has wrong size");
    const std::size_t per = kind_ == FeatureKind::fft64 ? kDecimatedBins : kMelBands;
    for (std::size_t c = 0; c < kChannels; ++c) {
      dsp::fft_magnitude_into(w[c], meta_.windowed, mag_, fft_);
      std::span<double> row(band_.data(), per);
      if (kind_ == FeatureKind::fft64) dsp::decimate_bins_into(mag_, row);
      else dsp::MelFilterbank::instance().apply(mag_, row);
      dsp::log_compress_inplace(row, meta_.log_floor);
      for (std::size_t k = 0; k < per; ++k) out[c * per + k] = static_cast<float>(row[k]);
    }
  }

  std::vector<float> extract(const MultiChannelWindow& w) {
    std::vector<float> out(size());
    extract(w, out);
    return out;
  }

 private:
  FeatureKind kind_;
  models::FeatureMeta meta_;
  dsp::FftWorkspace fft_;
  std::vector<double> mag_;
  std::vector<double> band_;
};

}  // namespace pgr
