#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace pgr::nn {

template <class T>
struct AdamState {
  std::uint64_t step_count = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<T>> first_moment;
  std::vector<std::vector<T>> second_moment;
};

/// One Adam update with bias correction. Moments are allocated lazily on
/// the first step to match the parameter layout.
template <class T>
void adam_step(std::span<const std::span<T>> params, std::span<const std::span<T>> grads, AdamState<T>& st) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  if (st.first_moment.empty()) {
    for (const auto& p : params) {
      st.first_moment.emplace_back(p.size(), T{});
      st.second_moment.emplace_back(p.size(), T{});
    }
  }
  if (st.first_moment.size() != params.size()) throw std::invalid_argument("adam_step: state layout mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || st.first_moment[i].size() != params[i].size())
      throw std::invalid_argument("adam_step: shape mismatch in tensor " + std::to_string(i));
  }
  ++st.step_count;
  const double t = static_cast<double>(st.step_count);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  const T b1 = static_cast<T>(st.beta1), b2 = static_cast<T>(st.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = st.first_moment[i];
    auto& v = st.second_moment[i];
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      const T g = grads[i][k];
      m[k] = b1 * m[k] + (T(1) - b1) * g;
      v[k] = b2 * v[k] + (T(1) - b2) * g * g;
      const double mhat = static_cast<double>(m[k]) / c1;
      const double vhat = static_cast<double>(v[k]) / c2;
      params[i][k] -= static_cast<T>(st.lr * mhat / (std::sqrt(vhat) + st.eps));
    }
  }
}

template <class T>
void adam_step(const std::vector<std::span<T>>& params, const std::vector<std::span<T>>& grads, AdamState<T>& st) {
  adam_step<T>(std::span<const std::span<T>>(params), std::span<const std::span<T>>(grads), st);
}

}  // namespace pgr::nn
