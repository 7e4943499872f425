#pragma once

// Dataset manifests (JSON lines), window loading, stratified splitting,
// class rebalancing and the online augmentation pipeline.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pgr/dsp.hpp"
#include "pgr/labels.hpp"
#include "pgr/nn/tensor.hpp"
#include "pgr/util.hpp"
#include "pgr/wav.hpp"

namespace pgr::data {

using nlohmann::json;

/// Raised for malformed manifests and unloadable entries; the message
/// names the offending entry.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StratificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ManifestEntry {
  std::string audio;
  std::uint64_t onset_sample = 0;
  HitLabel label;
  std::optional<std::string> split;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::uint32_t sample_rate = 44100;
  std::size_t channel_count = kChannels;
  /// Directory that relative audio paths resolve against.
  std::filesystem::path base_dir;
};

struct ManifestOptions {
  bool strict = true;
  std::vector<Combination> exclusions = default_exclusions();
  /// Receives non-strict warnings; defaults to stderr.
  std::function<void(const std::string&)> warn;
};

inline json entry_to_json(const ManifestEntry& e) {
  json j{{"audio", e.audio},
         {"onset_sample", e.onset_sample},
         {"gesture", std::string(to_string(e.label.gesture))},
         {"hand_part", std::string(to_string(e.label.hand_part))},
         {"location", std::string(to_string(e.label.location))},
         {"dynamics", std::string(to_string(e.label.dynamics))}};
  if (e.split) j["split"] = *e.split;
  return j;
}

inline ManifestEntry parse_manifest_line(const std::string& line, std::size_t line_no, const ManifestOptions& opt) {
  const std::string where = "manifest line " + std::to_string(line_no);
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(where + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object()) throw DataError(where + ": entry must be a JSON object");
  static const std::vector<std::string> known{"audio", "onset_sample", "gesture", "hand_part",
                                              "location", "dynamics", "split"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(known.begin(), known.end(), k) != known.end()) continue;
    if (opt.strict) throw DataError(where + ": unknown field '" + k + "'");
    const std::string msg = where + ": ignoring unknown field '" + k + "'";
    if (opt.warn) opt.warn(msg);
    else std::cerr << "warning: " << msg << "\n";
  }
  ManifestEntry e;
  try {
    auto str = [&](const char* key) {
      const auto& v = j.at(key);
      if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string");
      return v.get<std::string>();
    };
    e.audio = str("audio");
    const auto& onset = j.at("onset_sample");
    if (!onset.is_number_integer() || onset.get<std::int64_t>() < 0)
      throw DataError("field 'onset_sample' must be a non-negative integer");
    e.onset_sample = onset.get<std::uint64_t>();
    e.label.gesture = parse_gesture(str("gesture"));
    if (e.label.gesture != Gesture::hit) throw DataError("only 'hit' gestures are supported");
    e.label.hand_part = parse_hand_part(str("hand_part"));
    e.label.location = parse_location(str("location"));
    e.label.dynamics = parse_dynamics(str("dynamics"));
    if (j.contains("split")) e.split = str("split");
  } catch (const json::exception& ex) {
    throw DataError(where + ": " + ex.what());
  } catch (const std::exception& ex) {
    throw DataError(where + ": " + ex.what());
  }
  if (is_excluded(e.label, opt.exclusions))
    throw DataError(where + ": combination " + std::string(to_string(e.label.hand_part)) + " at " +
                    std::string(to_string(e.label.location)) + " is on the exclusion list");
  return e;
}

inline DatasetManifest parse_manifest(std::istream& in, const ManifestOptions& opt = {}) {
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    m.entries.push_back(parse_manifest_line(line, line_no, opt));
  }
  return m;
}

inline DatasetManifest read_manifest(const std::string& path, const ManifestOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path + "'");
  DatasetManifest m = parse_manifest(in, opt);
  m.base_dir = std::filesystem::path(path).parent_path();
  return m;
}

inline std::string manifest_text(const DatasetManifest& m) {
  std::string out;
  for (const auto& e : m.entries) out += entry_to_json(e).dump() + "\n";
  return out;
}

inline void write_manifest(const DatasetManifest& m, const std::string& path) {
  util::write_text_file(path, manifest_text(m));
}

struct Example {
  MultiChannelWindow window;
  HitLabel label;
  std::optional<std::string> split;
};

using Dataset = std::vector<Example>;

/// Copies 512 frames starting at `onset` from a 6-channel recording.
inline MultiChannelWindow slice_window(const wav::Audio& a, std::uint64_t onset) {
  MultiChannelWindow w;
  for (std::size_t k = 0; k < kWindowSize; ++k) {
    for (std::size_t c = 0; c < kChannels; ++c) w.ch[c][k] = static_cast<double>(a.at(onset + k, c));
  }
  return w;
}

/// One window per manifest entry, in manifest order.
inline Dataset load_dataset(const DatasetManifest& m) {
  Dataset out;
  out.reserve(m.entries.size());
  std::map<std::string, wav::Audio> cache;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const std::string where = "entry " + std::to_string(i) + " ('" + e.audio + "')";
    const std::filesystem::path p =
        std::filesystem::path(e.audio).is_absolute() ? std::filesystem::path(e.audio) : m.base_dir / e.audio;
    auto it = cache.find(p.string());
    if (it == cache.end()) {
      if (!std::filesystem::exists(p)) throw DataError(where + ": audio file not found");
      try {
        it = cache.emplace(p.string(), wav::read(p.string())).first;
      } catch (const std::exception& ex) {
        throw DataError(where + ": " + ex.what());
      }
    }
    const auto& a = it->second;
    if (a.channels != m.channel_count)
      throw DataError(where + ": expected " + std::to_string(m.channel_count) + " channels, file has " +
                      std::to_string(a.channels));
    if (a.sample_rate != m.sample_rate)
      throw DataError(where + ": expected " + std::to_string(m.sample_rate) + " Hz, file is " +
                      std::to_string(a.sample_rate) + " Hz");
    if (e.onset_sample + kWindowSize > a.frames())
      throw DataError(where + ": onset " + std::to_string(e.onset_sample) + " + 512 exceeds file length " +
                      std::to_string(a.frames()));
    out.push_back({slice_window(a, e.onset_sample), e.label, e.split});
  }
  return out;
}

inline Dataset load_dataset(const std::string& manifest_path, const ManifestOptions& opt = {}) {
  return load_dataset(read_manifest(manifest_path, opt));
}

/// Order-sensitive hash of every window sample and label.
inline std::string dataset_hash(const Dataset& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& ex : d) {
    for (const auto& ch : ex.window.ch) {
      h = util::fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(ch.data()),
                                                      ch.size() * sizeof(double)),
                        h);
    }
    const std::uint8_t lab[4] = {static_cast<std::uint8_t>(ex.label.gesture),
                                 static_cast<std::uint8_t>(ex.label.hand_part),
                                 static_cast<std::uint8_t>(ex.label.location),
                                 static_cast<std::uint8_t>(ex.label.dynamics)};
    h = util::fnv1a64(lab, h);
  }
  return util::hex64(h);
}

// ---------------------------------------------------------------------------
// Splitting and balancing

struct Split {
  std::vector<std::size_t> train, val, test;
};

namespace detail {

/// Largest-remainder apportionment of `total` across groups sized `sizes`.
inline std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, double frac) {
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const auto total = static_cast<std::size_t>(std::llround(static_cast<double>(n) * frac));
  std::vector<std::size_t> out(sizes.size());
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t used = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double exact = static_cast<double>(sizes[i]) * frac;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    used += out[i];
    rema.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rema.begin(), rema.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t k = 0; used < total && k < rema.size(); ++k, ++used) ++out[rema[k].second];
  return out;
}

}  // namespace detail

inline constexpr std::size_t kMinPerClass = 5;

/// Stratified hold-out: `test_frac` of each stratum goes to test, then
/// `val_frac` of the remainder to validation. Deterministic per seed.
inline Split stratified_split(const std::vector<std::size_t>& keys, double test_frac, double val_frac,
                              std::uint64_t seed) {
  if (test_frac < 0 || test_frac >= 1 || val_frac < 0 || val_frac >= 1)
    throw std::invalid_argument("stratified_split: fractions must be in [0, 1)");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) groups[keys[i]].push_back(i);
  std::vector<std::size_t> sizes;
  for (const auto& [k, idx] : groups) {
    if (idx.size() < kMinPerClass)
      throw StratificationError("stratum " + std::to_string(k) + " has " + std::to_string(idx.size()) +
                                " examples, need at least " + std::to_string(kMinPerClass));
    sizes.push_back(idx.size());
  }
  const auto n_test = detail::apportion(sizes, test_frac);
  std::vector<std::size_t> rest_sizes;
  for (std::size_t g = 0; g < sizes.size(); ++g) rest_sizes.push_back(sizes[g] - n_test[g]);
  const auto n_val = detail::apportion(rest_sizes, val_frac);

  nn::Rng rng(seed);
  Split s;
  std::size_t g = 0;
  for (auto& [k, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (i < n_test[g]) s.test.push_back(idx[i]);
      else if (i < n_test[g] + n_val[g]) s.val.push_back(idx[i]);
      else s.train.push_back(idx[i]);
    }
    ++g;
  }
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

enum class RebalanceMode { none, undersample };

/// Indices kept after rebalancing; undersampling trims every class to the
/// minority count. Kept indices stay in input order.
inline std::vector<std::size_t> rebalance(const std::vector<std::size_t>& keys, RebalanceMode mode,
                                          std::uint64_t seed) {
  std::vector<std::size_t> all(keys.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (mode == RebalanceMode::none || keys.empty()) return all;
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) groups[keys[i]].push_back(i);
  std::size_t minority = keys.size();
  for (const auto& [k, idx] : groups) minority = std::min(minority, idx.size());
  nn::Rng rng(seed);
  std::vector<std::size_t> kept;
  for (auto& [k, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    kept.insert(kept.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

// ---------------------------------------------------------------------------
// Augmentation

struct AugmentPolicy {
  bool channel_gain = true;
  bool highpass_80 = true;
  bool highpass_160 = true;
  bool waveshape = true;
  bool phase_invert = true;
  double probability = 0.5;
  double gain_range_db = dsp::kDefaultChannelGainRangeDb;
  double waveshape_gain = 5.0;

  static AugmentPolicy none() { return {false, false, false, false, false}; }
  bool empty() const { return !(channel_gain || highpass_80 || highpass_160 || waveshape || phase_invert); }
};

/// Applies the selected transforms, each with probability
/// `policy.probability`, in the order gain, high-pass 80, high-pass 160,
/// waveshape, phase. A fixed number of draws is consumed per call so the
/// random stream stays aligned regardless of which transforms fire.
inline void augment_inplace(MultiChannelWindow& w, const AugmentPolicy& policy, nn::Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<double> gain(-policy.gain_range_db, policy.gain_range_db);
  std::array<double, 5> draws{};
  for (auto& d : draws) d = coin(rng);
  std::array<double, kChannels> gains{};
  for (auto& g : gains) g = gain(rng);
  if (policy.empty()) return;
  const auto fires = [&](bool enabled, std::size_t i) { return enabled && draws[i] < policy.probability; };
  if (fires(policy.channel_gain, 0)) dsp::scale_channels_inplace(w, gains, policy.gain_range_db);
  if (fires(policy.highpass_80, 1)) {
    for (auto& c : w.ch) dsp::highpass_inplace(c, 80.0);
  }
  if (fires(policy.highpass_160, 2)) {
    for (auto& c : w.ch) dsp::highpass_inplace(c, 160.0);
  }
  if (fires(policy.waveshape, 3)) {
    for (auto& c : w.ch) dsp::waveshape_tanh_inplace(c, policy.waveshape_gain);
  }
  if (fires(policy.phase_invert, 4)) {
    for (auto& c : w.ch) dsp::invert_phase_inplace(c);
  }
}

inline MultiChannelWindow augment(MultiChannelWindow w, const AugmentPolicy& policy, nn::Rng& rng) {
  augment_inplace(w, policy, rng);
  return w;
}

}  // namespace pgr::data
