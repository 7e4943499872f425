#pragma once

// Loss terms and their gradients. Probabilities are clamped to
// [1e-7, 1 - 1e-7] before taking logs; inside the clamp the gradient is zero.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

namespace pgr::nn {

inline constexpr double kProbClamp = 1e-7;

template <class T>
T clamp_prob(T p) {
  return std::clamp(p, static_cast<T>(kProbClamp), static_cast<T>(1.0 - kProbClamp));
}

template <class T>
void softmax(std::span<const T> logits, std::span<T> probs) {
  T mx = logits[0];
  for (T v : logits) mx = std::max(mx, v);
  T sum{};
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
}

/// -[y ln p + (1 - y) ln(1 - p)] for one example.
template <class T>
T bce_loss(T p, int target) {
  if (target != 0 && target != 1) throw std::invalid_argument("bce_loss: target must be 0 or 1");
  const T q = clamp_prob(p);
  return target == 1 ? -std::log(q) : -std::log(T(1) - q);
}

/// Mean BCE over a batch.
template <class T>
T bce_loss(std::span<const T> p, std::span<const int> targets) {
  if (p.size() != targets.size() || p.empty()) throw std::invalid_argument("bce_loss: batch size mismatch");
  T acc{};
  for (std::size_t i = 0; i < p.size(); ++i) acc += bce_loss(p[i], targets[i]);
  return acc / static_cast<T>(p.size());
}

template <class T>
T bce_grad(T p, int target) {
  if (p <= T(kProbClamp) || p >= T(1.0 - kProbClamp)) return T{};
  return target == 1 ? -T(1) / p : T(1) / (T(1) - p);
}

/// -ln p[target] for one example.
template <class T>
T ce_loss(std::span<const T> probs, std::size_t target) {
  if (target >= probs.size())
    throw std::invalid_argument("ce_loss: target " + std::to_string(target) + " outside class range");
  return -std::log(clamp_prob(probs[target]));
}

/// Mean CE over a batch stored row-major [batch, classes].
template <class T>
T ce_loss(std::span<const T> probs, std::size_t n_classes, std::span<const std::size_t> targets) {
  if (probs.size() != n_classes * targets.size() || targets.empty())
    throw std::invalid_argument("ce_loss: batch size mismatch");
  T acc{};
  for (std::size_t i = 0; i < targets.size(); ++i) acc += ce_loss(probs.subspan(i * n_classes, n_classes), targets[i]);
  return acc / static_cast<T>(targets.size());
}

/// d(-ln softmax(z)[t])/dz = p - onehot(t), zeroed when p[t] sits in the clamp.
template <class T>
void ce_softmax_grad(std::span<const T> probs, std::size_t target, T scale, std::span<T> dlogits) {
  const T pt = probs[target];
  if (pt <= T(kProbClamp) || pt >= T(1.0 - kProbClamp)) {
    std::fill(dlogits.begin(), dlogits.end(), T{});
    return;
  }
  for (std::size_t j = 0; j < probs.size(); ++j) dlogits[j] = scale * (probs[j] - (j == target ? T(1) : T{}));
}

/// Mean squared error over all elements.
/// How squared errors over the elements of one example are combined.
enum class Reduction { mean, sum };

template <class T>
T mse_loss(std::span<const T> recon, std::span<const T> target, Reduction r = Reduction::mean) {
  if (recon.size() != target.size() || recon.empty()) throw std::invalid_argument("mse_loss: size mismatch");
  T acc{};
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const T d = recon[i] - target[i];
    acc += d * d;
  }
  return r == Reduction::sum ? acc : acc / static_cast<T>(recon.size());
}

template <class T>
void mse_grad(std::span<const T> recon, std::span<const T> target, T scale, std::span<T> drecon,
              Reduction r = Reduction::mean) {
  const T k = r == Reduction::sum ? scale * T(2) : scale * T(2) / static_cast<T>(recon.size());
  for (std::size_t i = 0; i < recon.size(); ++i) drecon[i] = k * (recon[i] - target[i]);
}

/// KL(N(mu, exp(log_var)) || N(0, I)) = -1/2 sum(1 + lv - mu^2 - exp(lv)).
template <class T>
T kld_gaussian_standard(std::span<const T> mu, std::span<const T> log_var) {
  if (mu.size() != log_var.size()) throw std::invalid_argument("kld: mu/log_var size mismatch");
  T acc{};
  for (std::size_t d = 0; d < mu.size(); ++d) acc += T(1) + log_var[d] - mu[d] * mu[d] - std::exp(log_var[d]);
  return T(-0.5) * acc;
}

template <class T>
void kld_grad(std::span<const T> mu, std::span<const T> log_var, T scale, std::span<T> dmu, std::span<T> dlog_var) {
  for (std::size_t d = 0; d < mu.size(); ++d) {
    dmu[d] = scale * mu[d];
    dlog_var[d] = scale * T(0.5) * (std::exp(log_var[d]) - T(1));
  }
}

/// z = mu + exp(log_var / 2) * noise.
template <class T>
void reparameterize(std::span<const T> mu, std::span<const T> log_var, std::span<const T> noise, std::span<T> z) {
  if (mu.size() != log_var.size() || mu.size() != noise.size() || mu.size() != z.size())
    throw std::invalid_argument("reparameterize: size mismatch");
  for (std::size_t d = 0; d < mu.size(); ++d) z[d] = mu[d] + std::exp(log_var[d] / T(2)) * noise[d];
}

}  // namespace pgr::nn
