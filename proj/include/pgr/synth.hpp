#pragma once

// Synthetic six-channel body-hit recordings with known labels. Each hit is
// a few exponentially decaying partials whose band depends on the hand
// part, spread over the piezos by proximity to the struck location, scaled
// and brightened by dynamics, and finally coloured by an interface profile.

#include <array>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pgr/data.hpp"
#include "pgr/labels.hpp"
#include "pgr/wav.hpp"

namespace pgr::synth {

using data::DatasetManifest;
using data::ManifestEntry;

/// Per-channel gain and a spectral tilt around `pivot_hz`, emulating a
/// particular audio interface. Positive tilt boosts highs and cuts lows.
struct InterfaceProfile {
  std::array<double, kChannels> gain_db{};
  double tilt_db = 0.0;
  double pivot_hz = 1000.0;

  bool identity() const {
    for (double g : gain_db) {
      if (g != 0.0) return false;
    }
    return tilt_db == 0.0;
  }
  bool operator==(const InterfaceProfile&) const = default;
};

/// A strongly mismatched interface used for cross-dataset checks.
inline InterfaceProfile shifted_profile() { return {{14.0, -14.0, 12.0, -12.0, 14.0, -14.0}, -18.0, 1000.0}; }

struct SynthConfig {
  std::uint64_t seed = 0;
  /// Hits per (hand part, location) combination.
  std::size_t hits_per_class = 24;
  /// 0 draws every class from one common band; 1 keeps classes apart.
  double separation = 1.0;
  double noise_floor_db = -60.0;
  InterfaceProfile interface_profile;
  double hit_spacing_s = 0.1;
  std::vector<HandPart> hand_parts{kHandParts.begin(), kHandParts.end()};
  std::vector<Location> locations{kLocations.begin(), kLocations.end()};
  std::vector<Dynamics> dynamics{kDynamics.begin(), kDynamics.end()};
  std::vector<Combination> exclusions = default_exclusions();

  void validate() const {
    if (!(separation >= 0.0 && separation <= 1.0)) throw std::invalid_argument("synth: separation must be in [0, 1]");
    if (hits_per_class == 0) throw std::invalid_argument("synth: hits_per_class must be positive");
    if (hit_spacing_s * kSampleRate < 2.0 * kWindowSize)
      throw std::invalid_argument("synth: hit spacing must be at least 1024 samples");
    if (hand_parts.empty() || locations.empty() || dynamics.empty())
      throw std::invalid_argument("synth: empty hand part, location or dynamics subset");
  }
};

inline constexpr std::array<double, 4> kDynamicsDb{-18.0, -12.0, -6.0, 0.0};
/// Relative level of the upper partials at each dynamics step.
inline constexpr std::array<double, 4> kBrightness{0.1, 0.3, 0.55, 0.85};

struct ClassTimbre {
  double lo_hz, hi_hz;
  double tau_lo_ms, tau_hi_ms;
  /// Contact noise level and upper-partial weight: harder strikes are
  /// noisier and richer in overtones.
  double noise;
  double hardness;
};

inline constexpr std::array<ClassTimbre, 4> kTimbre{{
    {60.0, 120.0, 11.0, 14.0, 0.0, 0.0},     // heel
    {120.0, 250.0, 8.0, 11.0, 0.6, 0.4},     // thumb
    {300.0, 800.0, 5.0, 8.0, 0.4, 0.5},      // fingers
    {1000.0, 4000.0, 4.0, 6.0, 0.8, 0.7},    // nails
}};
inline constexpr ClassTimbre kCommonTimbre{60.0, 4000.0, 4.0, 14.0, 0.35, 0.35};

/// Timbre after blending the class toward the shared band.
inline ClassTimbre blended_timbre(HandPart h, double separation) {
  const auto& c = kTimbre[static_cast<std::size_t>(h)];
  const auto& k = kCommonTimbre;
  auto geo = [&](double a, double b) { return std::exp(std::log(a) + separation * (std::log(b) - std::log(a))); };
  auto lin = [&](double a, double b) { return a + separation * (b - a); };
  return {geo(k.lo_hz, c.lo_hz), geo(k.hi_hz, c.hi_hz), lin(k.tau_lo_ms, c.tau_lo_ms), lin(k.tau_hi_ms, c.tau_hi_ms),
          lin(k.noise, c.noise), lin(k.hardness, c.hardness)};
}

/// Struck-location coordinates on the body; piezo i+1 sits at location i.
inline constexpr std::array<std::array<double, 2>, 5> kLocationXY{{
    {0.0, 0.0}, {-1.0, 0.8}, {1.2, 0.8}, {-1.2, -0.9}, {1.2, -0.9}}};
inline constexpr double kProximityScale = 0.7;
inline constexpr double kMagneticGain = 0.3;

inline std::array<double, kChannels> proximity_gains(Location l) {
  std::array<double, kChannels> g{};
  g[0] = kMagneticGain;
  const auto& p = kLocationXY[static_cast<std::size_t>(l)];
  for (std::size_t i = 0; i < 5; ++i) {
    const double d = std::hypot(p[0] - kLocationXY[i][0], p[1] - kLocationXY[i][1]);
    g[i + 1] = std::exp(-d / kProximityScale);
  }
  return g;
}

/// Mono excitation of one hit, peak-normalised to 0.8 before dynamics.
inline std::vector<double> render_excitation(const HitLabel& l, double separation, std::size_t n, nn::Rng& rng) {
  const auto t = blended_timbre(l.hand_part, separation);
  const double bright = kBrightness[static_cast<std::size_t>(l.dynamics)];
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(n, 0.0);
  const double fs = kSampleRate;
  for (int m = 0; m < 3; ++m) {
    const double f = std::exp(std::log(t.lo_hz) + u(rng) * (std::log(t.hi_hz) - std::log(t.lo_hz)));
    const double tau = (t.tau_lo_ms + u(rng) * (t.tau_hi_ms - t.tau_lo_ms)) * 1e-3;
    const double amp = 0.5 + 0.5 * u(rng);
    for (int h = 1; h <= 3; ++h) {
      const double fh = f * h;
      if (fh >= 0.45 * fs) break;
      const double a = h == 1 ? amp : amp * (t.hardness + bright) * (h == 2 ? 0.6 : 0.35);
      const double th = tau / (h == 1 ? 1.0 : 1.5 * (h - 1));
      const double w = 2.0 * std::numbers::pi * fh / fs;
      const double decay = std::exp(-1.0 / (th * fs));
      double env = a;
      for (std::size_t k = 0; k < n; ++k, env *= decay) x[k] += env * std::sin(w * static_cast<double>(k));
    }
  }
  const double noise_amp = t.noise * (0.5 + bright);
  const double noise_decay = std::exp(-1.0 / (4e-3 * fs));
  double env = noise_amp;
  for (std::size_t k = 0; k < n && env > 1e-6; ++k, env *= noise_decay) x[k] += env * gauss(rng);
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (double& v : x) v *= 0.8 / peak;
  }
  return x;
}

/// One-pole split at `pivot_hz`, lows scaled by -tilt/2 dB and highs by
/// +tilt/2 dB, then the channel gain.
inline void apply_profile(std::vector<double>& x, double gain_db, const InterfaceProfile& p) {
  const double g = dsp::db_to_gain(gain_db);
  if (p.tilt_db == 0.0) {
    for (double& v : x) v *= g;
    return;
  }
  const double lo = dsp::db_to_gain(-p.tilt_db / 2.0), hi = dsp::db_to_gain(p.tilt_db / 2.0);
  const double a = std::exp(-2.0 * std::numbers::pi * p.pivot_hz / kSampleRate);
  double state = 0.0;
  for (double& v : x) {
    state = (1.0 - a) * v + a * state;
    v = g * (lo * state + hi * (v - state));
  }
}

struct SynthFile {
  std::string name;
  wav::Audio audio;
  std::vector<ManifestEntry> entries;  // audio field holds `name`
};

inline std::vector<Combination> valid_combinations(const SynthConfig& cfg) {
  std::vector<Combination> out;
  for (auto h : cfg.hand_parts) {
    for (auto l : cfg.locations) {
      if (!is_excluded(HitLabel{Gesture::hit, h, l, Dynamics::f}, cfg.exclusions)) out.emplace_back(h, l);
    }
  }
  return out;
}

/// Renders one file per valid (hand part, location) combination, holding
/// hits_per_class hits with dynamics in round-robin order.
inline std::vector<SynthFile> synth_render(const SynthConfig& cfg) {
  cfg.validate();
  const auto spacing = static_cast<std::size_t>(std::lround(cfg.hit_spacing_s * kSampleRate));
  const std::size_t lead = 2205;
  const std::size_t hit_len = std::min<std::size_t>(spacing, 4410);
  const double noise_rms = dsp::db_to_gain(cfg.noise_floor_db);
  std::vector<SynthFile> files;
  const auto combos = valid_combinations(cfg);
  for (std::size_t fi = 0; fi < combos.size(); ++fi) {
    const auto [hand, loc] = combos[fi];
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(static_cast<std::size_t>(hand) * 16 + static_cast<std::size_t>(loc))};
    nn::Rng rng(seq);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const std::size_t frames = lead + cfg.hits_per_class * spacing + lead;
    std::array<std::vector<double>, kChannels> ch;
    for (auto& c : ch) c.assign(frames, 0.0);
    SynthFile f;
    f.name = std::string(to_string(hand)) + "_" + std::string(to_string(loc)) + ".wav";
    const auto prox = proximity_gains(loc);
    for (std::size_t i = 0; i < cfg.hits_per_class; ++i) {
      HitLabel label{Gesture::hit, hand, loc, cfg.dynamics[i % cfg.dynamics.size()]};
      const std::size_t onset = lead + i * spacing;
      const auto x = render_excitation(label, cfg.separation, hit_len, rng);
      const double level_db = kDynamicsDb[static_cast<std::size_t>(label.dynamics)] + 1.0 * u(rng);
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double g = prox[c] * dsp::db_to_gain(level_db + 1.5 * u(rng));
        for (std::size_t k = 0; k < hit_len; ++k) ch[c][onset + k] += g * x[k];
      }
      f.entries.push_back({f.name, onset, label, std::nullopt});
    }
    for (std::size_t c = 0; c < kChannels; ++c) {
      for (double& v : ch[c]) v += noise_rms * gauss(rng);
      apply_profile(ch[c], cfg.interface_profile.gain_db[c], cfg.interface_profile);
    }
    f.audio.sample_rate = static_cast<std::uint32_t>(kSampleRate);
    f.audio.channels = kChannels;
    f.audio.interleaved.resize(frames * kChannels);
    for (std::size_t k = 0; k < frames; ++k) {
      for (std::size_t c = 0; c < kChannels; ++c) f.audio.interleaved[k * kChannels + c] = static_cast<float>(ch[c][k]);
    }
    files.push_back(std::move(f));
  }
  return files;
}

/// Writes the audio files and `manifest.jsonl` into `out_dir`.
inline DatasetManifest synth_generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  DatasetManifest m;
  m.base_dir = out_dir;
  for (auto& f : synth_render(cfg)) {
    wav::write((out_dir / f.name).string(), f.audio);
    m.entries.insert(m.entries.end(), f.entries.begin(), f.entries.end());
  }
  data::write_manifest(m, (out_dir / "manifest.jsonl").string());
  return m;
}

}  // namespace pgr::synth
