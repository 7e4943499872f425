#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "pgr/features.hpp"
#include "pgr/models.hpp"

namespace pgr::engine {

struct BenchReport {
  std::string architecture;
  std::size_t n_calls = 0;
  double mean_us = 0, std_us = 0, p99_us = 0;
  bool includes_features = false;
  /// p99 above ten times the mean; reported, not an error.
  bool jitter_flag = false;
};

/// Times `n_calls` forward passes on a fixed random input after one
/// untimed warm-up call. With `include_features` each call also runs the
/// feature extractor on a fixed random window.
inline BenchReport bench(const models::ModelBundle& b, std::size_t n_calls = 10000, bool include_features = false,
                         std::uint64_t seed = 0) {
  if (n_calls == 0) throw std::invalid_argument("bench: n_calls must be at least 1");
  nn::Rng rng(seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  FeatureExtractor fx(feature_kind(b.arch()), b.features);
  std::vector<float> feats(fx.size());
  for (auto& v : feats) v = gauss(rng);
  MultiChannelWindow window;
  for (auto& c : window.ch) {
    for (auto& v : c) v = 0.1 * static_cast<double>(gauss(rng));
  }
  models::ModelWorkspace<float> ws(b.model);
  std::vector<double> times(n_calls);

  auto call = [&] {
    if (include_features) fx.extract(window, feats);
    models::forward<float>(b.model, feats, ws);
  };
  call();
  for (std::size_t i = 0; i < n_calls; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    call();
    const auto t1 = std::chrono::steady_clock::now();
    times[i] = std::chrono::duration<double, std::micro>(t1 - t0).count();
  }

  BenchReport r;
  r.architecture = std::string(models::to_string(b.arch()));
  r.n_calls = n_calls;
  r.includes_features = include_features;
  double sum = 0;
  for (double t : times) sum += t;
  r.mean_us = sum / static_cast<double>(n_calls);
  double var = 0;
  for (double t : times) var += (t - r.mean_us) * (t - r.mean_us);
  r.std_us = std::sqrt(var / static_cast<double>(n_calls));
  std::sort(times.begin(), times.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n_calls)));
  r.p99_us = times[std::min(n_calls, std::max<std::size_t>(rank, 1)) - 1];
  r.jitter_flag = r.p99_us > 10.0 * r.mean_us;
  return r;
}

/// Two-column table in microseconds: network | Avg | Std Dev.
inline std::string bench_table(const std::vector<BenchReport>& rows) {
  std::string out = "network | Avg | Std Dev\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s%s | %.2f | %.2f\n", r.architecture.c_str(),
                  r.includes_features ? " (with features)" : "", r.mean_us, r.std_us);
    out += buf;
  }
  return out;
}

inline nlohmann::json bench_json(const BenchReport& r) {
  return {{"architecture", r.architecture}, {"n_calls", r.n_calls},   {"mean_us", r.mean_us},
          {"std_us", r.std_us},             {"p99_us", r.p99_us},     {"includes_features", r.includes_features},
          {"jitter_flag", r.jitter_flag}};
}

}  // namespace pgr::engine
