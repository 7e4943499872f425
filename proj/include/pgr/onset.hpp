#pragma once

// Time-domain attack detection and capture of the analysis window that
// follows a detection.
//
// The envelope is the rectified maximum across channels (or one selected
// channel). An event fires on the first sample where the envelope rises from
// below the threshold to at-or-above it, provided the refractory period since
// the previous event has elapsed. Detection is sample-exact and independent
// of how the stream is chunked.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pgr/dsp.hpp"

namespace pgr::onset {

struct OnsetConfig {
  double threshold = 0.05;
  double refractory_ms = 50.0;
  /// Empty = max across channels, otherwise the single channel used.
  std::optional<std::size_t> detection_channel;

  void validate() const {
    if (!(threshold > 0.0) || threshold > 1.0) throw std::invalid_argument("onset: threshold must be in (0, 1]");
    if (!(refractory_ms >= 0.0)) throw std::invalid_argument("onset: refractory_ms must be >= 0");
    if (detection_channel && *detection_channel >= kChannels)
      throw std::invalid_argument("onset: detection channel out of range");
  }

  std::uint64_t refractory_samples() const {
    return static_cast<std::uint64_t>(std::llround(refractory_ms * kSampleRate / 1000.0));
  }
};

struct OnsetEvent {
  std::uint64_t sample_index = 0;
  /// Envelope at detection; replaced with the window peak once captured.
  double peak_amplitude = 0.0;

  bool operator==(const OnsetEvent&) const = default;
};

/// Per-channel views over one chunk; all spans have equal length.
using ChannelChunk = std::array<std::span<const double>, kChannels>;

class OnsetDetector {
 public:
  explicit OnsetDetector(OnsetConfig cfg = {}) : cfg_(cfg), refractory_(cfg.refractory_samples()) {
    cfg_.validate();
  }

  const OnsetConfig& config() const { return cfg_; }
  std::uint64_t samples_seen() const { return position_; }

  /// Scans one chunk, invoking `on_event(OnsetEvent)` for each detection.
  template <class F>
  void process(const ChannelChunk& chunk, F&& on_event) {
    const std::size_t n = chunk[0].size();
    for (const auto& c : chunk) {
      if (c.size() != n) throw std::invalid_argument("onset: channel lengths differ");
    }
    for (std::size_t i = 0; i < n; ++i, ++position_) {
      double env = 0.0;
      if (cfg_.detection_channel) {
        env = std::abs(chunk[*cfg_.detection_channel][i]);
      } else {
        for (const auto& c : chunk) env = std::max(env, std::abs(c[i]));
      }
      const bool above = env >= cfg_.threshold;
      if (above && !prev_above_ && position_ >= next_allowed_) {
        on_event(OnsetEvent{position_, env});
        next_allowed_ = position_ + refractory_;
      }
      prev_above_ = above;
    }
  }

  std::vector<OnsetEvent> detect(const ChannelChunk& chunk) {
    std::vector<OnsetEvent> out;
    process(chunk, [&](const OnsetEvent& e) { out.push_back(e); });
    return out;
  }

 private:
  OnsetConfig cfg_;
  std::uint64_t refractory_;
  std::uint64_t position_ = 0;
  std::uint64_t next_allowed_ = 0;
  bool prev_above_ = false;
};

enum class CaptureStatus { ok, not_ready, expired };

/// Fixed-capacity per-channel sample history addressed by absolute index.
class ChannelHistory {
 public:
  explicit ChannelHistory(std::size_t capacity = 8192) : capacity_(capacity) {
    if (capacity < kWindowSize) throw std::invalid_argument("ChannelHistory: capacity below window size");
    for (auto& c : data_) c.assign(capacity, 0.0);
  }

  std::size_t capacity() const { return capacity_; }
  std::uint64_t total() const { return total_; }

  void push(const ChannelChunk& chunk) {
    const std::size_t n = chunk[0].size();
    for (std::size_t c = 0; c < kChannels; ++c) {
      if (chunk[c].size() != n) throw std::invalid_argument("ChannelHistory: channel lengths differ");
      auto& ring = data_[c];
      std::uint64_t pos = total_;
      for (double x : chunk[c]) ring[static_cast<std::size_t>(pos++ % capacity_)] = x;
    }
    total_ += n;
  }

  /// Oldest absolute index still held.
  std::uint64_t oldest() const { return total_ > capacity_ ? total_ - capacity_ : 0; }

  double at(std::size_t channel, std::uint64_t index) const {
    return data_[channel][static_cast<std::size_t>(index % capacity_)];
  }

 private:
  std::size_t capacity_;
  std::uint64_t total_ = 0;
  std::array<std::vector<double>, kChannels> data_;
};

/// Copies the 6 x 512 window starting at `event.sample_index - pre_samples`.
/// Fills in the event's peak amplitude over the captured window.
inline CaptureStatus capture_window(const ChannelHistory& history, OnsetEvent& event,
                                    std::size_t pre_samples, MultiChannelWindow& out) {
  if (event.sample_index < pre_samples) return CaptureStatus::expired;
  const std::uint64_t start = event.sample_index - pre_samples;
  if (history.total() < start + kWindowSize) return CaptureStatus::not_ready;
  if (start < history.oldest()) return CaptureStatus::expired;
  double peak = 0.0;
  for (std::size_t c = 0; c < kChannels; ++c) {
    for (std::size_t k = 0; k < kWindowSize; ++k) {
      const double x = history.at(c, start + k);
      out.ch[c][k] = x;
      peak = std::max(peak, std::abs(x));
    }
  }
  event.peak_amplitude = peak;
  return CaptureStatus::ok;
}

}  // namespace pgr::onset
