#pragma once

// Layer descriptors, shape inference, and single-sample forward/backward
// kernels with hand-derived gradients.
//
// Shapes (no batch dimension):
//   conv1d / transposed conv1d : [channels, length]
//   conv2d                     : [channels, height, width]
//   dense                      : any input, read as a flat vector
// Weight layouts follow the usual conventions:
//   conv1d [out, in, k], conv2d [out, in, kh, kw], tconv1d [in, out, k],
//   dense [out, in]. Bias is [out].

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "pgr/nn/tensor.hpp"

namespace pgr::nn {

enum class LayerKind { conv1d, conv2d, tconv1d, dense, relu, flatten, reshape };

inline std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::tconv1d: return "transposed_conv1d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::reshape: return "reshape";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s) {
  for (auto k : {LayerKind::conv1d, LayerKind::conv2d, LayerKind::tconv1d, LayerKind::dense, LayerKind::relu,
                 LayerKind::flatten, LayerKind::reshape}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown layer kind '" + std::string(s) + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::array<std::size_t, 2> kernel{1, 1};  // {h, w}; 1-D layers use w
  std::array<std::size_t, 2> stride{1, 1};
  std::array<std::size_t, 2> padding{0, 0};
  std::size_t output_padding = 0;  // transposed conv only
  Shape target_shape;              // reshape only

  bool operator==(const LayerSpec&) const = default;

  static LayerSpec conv1d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1,
                          std::size_t pad = 0) {
    LayerSpec s;
    s.kind = LayerKind::conv1d;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel = {1, k};
    s.stride = {1, stride};
    s.padding = {0, pad};
    return s;
  }
  static LayerSpec conv2d(std::size_t in, std::size_t out, std::size_t kh, std::size_t kw, std::size_t sh = 1,
                          std::size_t sw = 1, std::size_t ph = 0, std::size_t pw = 0) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel = {kh, kw};
    s.stride = {sh, sw};
    s.padding = {ph, pw};
    return s;
  }
  static LayerSpec tconv1d(std::size_t in, std::size_t out, std::size_t k, std::size_t stride = 1,
                           std::size_t pad = 0, std::size_t output_pad = 0) {
    LayerSpec s = conv1d(in, out, k, stride, pad);
    s.kind = LayerKind::tconv1d;
    s.output_padding = output_pad;
    return s;
  }
  static LayerSpec dense(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in_channels = in;
    s.out_channels = out;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{}; }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
  }
  static LayerSpec reshape(Shape target) {
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.target_shape = std::move(target);
    return s;
  }
};

inline bool has_params(const LayerSpec& s) {
  return s.kind == LayerKind::conv1d || s.kind == LayerKind::conv2d || s.kind == LayerKind::tconv1d ||
         s.kind == LayerKind::dense;
}

inline Shape weight_shape(const LayerSpec& s) {
  switch (s.kind) {
    case LayerKind::conv1d: return {s.out_channels, s.in_channels, s.kernel[1]};
    case LayerKind::conv2d: return {s.out_channels, s.in_channels, s.kernel[0], s.kernel[1]};
    case LayerKind::tconv1d: return {s.in_channels, s.out_channels, s.kernel[1]};
    case LayerKind::dense: return {s.out_channels, s.in_channels};
    default: return {0};
  }
}

inline Shape bias_shape(const LayerSpec& s) { return has_params(s) ? Shape{s.out_channels} : Shape{0}; }

/// Fan-in / fan-out used for Glorot-uniform initialisation.
inline std::pair<std::size_t, std::size_t> fans(const LayerSpec& s) {
  const std::size_t k = s.kernel[0] * s.kernel[1];
  return {s.in_channels * k, s.out_channels * k};
}

inline std::size_t conv_out_len(std::size_t len, std::size_t k, std::size_t stride, std::size_t pad) {
  if (len + 2 * pad < k) throw std::invalid_argument("conv: input shorter than kernel");
  return (len + 2 * pad - k) / stride + 1;
}

inline std::size_t tconv_out_len(std::size_t len, std::size_t k, std::size_t stride, std::size_t pad,
                                 std::size_t out_pad) {
  const std::size_t full = (len - 1) * stride + k + out_pad;
  if (full <= 2 * pad) throw std::invalid_argument("transposed conv: padding consumes the output");
  return full - 2 * pad;
}

inline void validate_spec(const LayerSpec& s) {
  if (s.kernel[0] == 0 || s.kernel[1] == 0 || s.stride[0] == 0 || s.stride[1] == 0)
    throw std::invalid_argument("layer: kernel and stride must be positive");
  if (has_params(s) && (s.in_channels == 0 || s.out_channels == 0))
    throw std::invalid_argument("layer: channel counts must be positive");
  if (s.kind == LayerKind::tconv1d && s.output_padding >= s.stride[1])
    throw std::invalid_argument("transposed conv: output padding must be smaller than stride");
}

inline Shape output_shape(const LayerSpec& s, const Shape& in) {
  validate_spec(s);
  auto mismatch = [&](const char* what) {
    return std::invalid_argument(std::string(to_string(s.kind)) + ": " + what + ", got input " +
                                 shape_string(in));
  };
  switch (s.kind) {
    case LayerKind::conv1d:
      if (in.size() != 2 || in[0] != s.in_channels) throw mismatch("expected [in_channels, length]");
      return {s.out_channels, conv_out_len(in[1], s.kernel[1], s.stride[1], s.padding[1])};
    case LayerKind::tconv1d:
      if (in.size() != 2 || in[0] != s.in_channels || in[1] == 0) throw mismatch("expected [in_channels, length]");
      return {s.out_channels, tconv_out_len(in[1], s.kernel[1], s.stride[1], s.padding[1], s.output_padding)};
    case LayerKind::conv2d:
      if (in.size() != 3 || in[0] != s.in_channels) throw mismatch("expected [in_channels, height, width]");
      return {s.out_channels, conv_out_len(in[1], s.kernel[0], s.stride[0], s.padding[0]),
              conv_out_len(in[2], s.kernel[1], s.stride[1], s.padding[1])};
    case LayerKind::dense:
      if (shape_size(in) != s.in_channels) throw mismatch("input size must equal in_channels");
      return {s.out_channels};
    case LayerKind::relu: return in;
    case LayerKind::flatten: return {shape_size(in)};
    case LayerKind::reshape:
      if (shape_size(s.target_shape) != shape_size(in)) throw mismatch("reshape must preserve element count");
      return s.target_shape;
  }
  throw mismatch("unknown kind");
}

namespace kernels {

template <class T>
void conv1d_forward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, std::span<const T> in,
                    std::span<const T> w, std::span<const T> b, std::span<T> out) {
  const std::size_t C = in_shape[0], L = in_shape[1], O = out_shape[0], Lo = out_shape[1];
  const std::size_t K = s.kernel[1], st = s.stride[1];
  const auto pad = static_cast<std::ptrdiff_t>(s.padding[1]);
  for (std::size_t o = 0; o < O; ++o) {
    T* y = out.data() + o * Lo;
    std::fill(y, y + Lo, b[o]);
    for (std::size_t c = 0; c < C; ++c) {
      const T* x = in.data() + c * L;
      const T* wk = w.data() + (o * C + c) * K;
      for (std::size_t k = 0; k < K; ++k) {
        const T wv = wk[k];
        for (std::size_t t = 0; t < Lo; ++t) {
          const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(t * st + k) - pad;
          if (i >= 0 && i < static_cast<std::ptrdiff_t>(L)) y[t] += wv * x[i];
        }
      }
    }
  }
}

template <class T>
void conv1d_backward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, std::span<const T> in,
                     std::span<const T> w, std::span<const T> dout, std::span<T> dw, std::span<T> db,
                     std::span<T> din) {
  const std::size_t C = in_shape[0], L = in_shape[1], O = out_shape[0], Lo = out_shape[1];
  const std::size_t K = s.kernel[1], st = s.stride[1];
  const auto pad = static_cast<std::ptrdiff_t>(s.padding[1]);
  if (!din.empty()) std::fill(din.begin(), din.end(), T{});
  for (std::size_t o = 0; o < O; ++o) {
    const T* g = dout.data() + o * Lo;
    T bsum{};
    for (std::size_t t = 0; t < Lo; ++t) bsum += g[t];
    db[o] += bsum;
    for (std::size_t c = 0; c < C; ++c) {
      const T* x = in.data() + c * L;
      T* dx = din.empty() ? nullptr : din.data() + c * L;
      const std::size_t widx = (o * C + c) * K;
      for (std::size_t k = 0; k < K; ++k) {
        const T wv = w[widx + k];
        T acc{};
        for (std::size_t t = 0; t < Lo; ++t) {
          const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(t * st + k) - pad;
          if (i >= 0 && i < static_cast<std::ptrdiff_t>(L)) {
            acc += g[t] * x[i];
            if (dx) dx[i] += wv * g[t];
          }
        }
        dw[widx + k] += acc;
      }
    }
  }
}

template <class T>
void tconv1d_forward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, std::span<const T> in,
                     std::span<const T> w, std::span<const T> b, std::span<T> out) {
  const std::size_t C = in_shape[0], L = in_shape[1], O = out_shape[0], Lo = out_shape[1];
  const std::size_t K = s.kernel[1], st = s.stride[1];
  const auto pad = static_cast<std::ptrdiff_t>(s.padding[1]);
  for (std::size_t o = 0; o < O; ++o) std::fill(out.data() + o * Lo, out.data() + (o + 1) * Lo, b[o]);
  for (std::size_t c = 0; c < C; ++c) {
    const T* x = in.data() + c * L;
    for (std::size_t o = 0; o < O; ++o) {
      T* y = out.data() + o * Lo;
      const T* wk = w.data() + (c * O + o) * K;
      for (std::size_t t = 0; t < L; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
          const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(t * st + k) - pad;
          if (j >= 0 && j < static_cast<std::ptrdiff_t>(Lo)) y[j] += wk[k] * x[t];
        }
      }
    }
  }
}

template <class T>
void tconv1d_backward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, std::span<const T> in,
                      std::span<const T> w, std::span<const T> dout, std::span<T> dw, std::span<T> db,
                      std::span<T> din) {
  const std::size_t C = in_shape[0], L = in_shape[1], O = out_shape[0], Lo = out_shape[1];
  const std::size_t K = s.kernel[1], st = s.stride[1];
  const auto pad = static_cast<std::ptrdiff_t>(s.padding[1]);
  for (std::size_t o = 0; o < O; ++o) {
    T bsum{};
    for (std::size_t j = 0; j < Lo; ++j) bsum += dout[o * Lo + j];
    db[o] += bsum;
  }
  if (!din.empty()) std::fill(din.begin(), din.end(), T{});
  for (std::size_t c = 0; c < C; ++c) {
    const T* x = in.data() + c * L;
    for (std::size_t o = 0; o < O; ++o) {
      const T* g = dout.data() + o * Lo;
      const std::size_t widx = (c * O + o) * K;
      for (std::size_t t = 0; t < L; ++t) {
        T dxt{};
        for (std::size_t k = 0; k < K; ++k) {
          const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(t * st + k) - pad;
          if (j >= 0 && j < static_cast<std::ptrdiff_t>(Lo)) {
            dw[widx + k] += g[j] * x[t];
            dxt += w[widx + k] * g[j];
          }
        }
        if (!din.empty()) din[c * L + t] += dxt;
      }
    }
  }
}

template <class T>
void conv2d_forward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, std::span<const T> in,
                    std::span<const T> w, std::span<const T> b, std::span<T> out) {
  const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
  const std::size_t O = out_shape[0], Ho = out_shape[1], Wo = out_shape[2];
  const std::size_t KH = s.kernel[0], KW = s.kernel[1], sh = s.stride[0], sw = s.stride[1];
  const auto ph = static_cast<std::ptrdiff_t>(s.padding[0]), pw = static_cast<std::ptrdiff_t>(s.padding[1]);
  for (std::size_t o = 0; o < O; ++o) {
    T* y = out.data() + o * Ho * Wo;
    std::fill(y, y + Ho * Wo, b[o]);
    for (std::size_t c = 0; c < C; ++c) {
      const T* x = in.data() + c * H * W;
      for (std::size_t kh = 0; kh < KH; ++kh) {
        for (std::size_t kw = 0; kw < KW; ++kw) {
          const T wv = w[((o * C + c) * KH + kh) * KW + kw];
          for (std::size_t r = 0; r < Ho; ++r) {
            const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(r * sh + kh) - ph;
            if (i < 0 || i >= static_cast<std::ptrdiff_t>(H)) continue;
            const T* xr = x + i * W;
            T* yr = y + r * Wo;
            for (std::size_t q = 0; q < Wo; ++q) {
              const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(q * sw + kw) - pw;
              if (j >= 0 && j < static_cast<std::ptrdiff_t>(W)) yr[q] += wv * xr[j];
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, std::span<const T> in,
                     std::span<const T> w, std::span<const T> dout, std::span<T> dw, std::span<T> db,
                     std::span<T> din) {
  const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
  const std::size_t O = out_shape[0], Ho = out_shape[1], Wo = out_shape[2];
  const std::size_t KH = s.kernel[0], KW = s.kernel[1], sh = s.stride[0], sw = s.stride[1];
  const auto ph = static_cast<std::ptrdiff_t>(s.padding[0]), pw = static_cast<std::ptrdiff_t>(s.padding[1]);
  if (!din.empty()) std::fill(din.begin(), din.end(), T{});
  for (std::size_t o = 0; o < O; ++o) {
    const T* g = dout.data() + o * Ho * Wo;
    T bsum{};
    for (std::size_t t = 0; t < Ho * Wo; ++t) bsum += g[t];
    db[o] += bsum;
    for (std::size_t c = 0; c < C; ++c) {
      const T* x = in.data() + c * H * W;
      T* dx = din.empty() ? nullptr : din.data() + c * H * W;
      for (std::size_t kh = 0; kh < KH; ++kh) {
        for (std::size_t kw = 0; kw < KW; ++kw) {
          const std::size_t widx = ((o * C + c) * KH + kh) * KW + kw;
          const T wv = w[widx];
          T acc{};
          for (std::size_t r = 0; r < Ho; ++r) {
            const std::ptrdiff_t i = static_cast<std::ptrdiff_t>(r * sh + kh) - ph;
            if (i < 0 || i >= static_cast<std::ptrdiff_t>(H)) continue;
            const T* gr = g + r * Wo;
            for (std::size_t q = 0; q < Wo; ++q) {
              const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(q * sw + kw) - pw;
              if (j >= 0 && j < static_cast<std::ptrdiff_t>(W)) {
                acc += gr[q] * x[i * W + j];
                if (dx) dx[i * W + j] += wv * gr[q];
              }
            }
          }
          dw[widx] += acc;
        }
      }
    }
  }
}

template <class T>
void dense_forward(const LayerSpec& s, std::span<const T> in, std::span<const T> w, std::span<const T> b,
                   std::span<T> out) {
  const std::size_t N = s.in_channels, M = s.out_channels;
  for (std::size_t m = 0; m < M; ++m) {
    const T* row = w.data() + m * N;
    T acc = b[m];
    for (std::size_t n = 0; n < N; ++n) acc += row[n] * in[n];
    out[m] = acc;
  }
}

template <class T>
void dense_backward(const LayerSpec& s, std::span<const T> in, std::span<const T> w, std::span<const T> dout,
                    std::span<T> dw, std::span<T> db, std::span<T> din) {
  const std::size_t N = s.in_channels, M = s.out_channels;
  if (!din.empty()) std::fill(din.begin(), din.end(), T{});
  for (std::size_t m = 0; m < M; ++m) {
    const T g = dout[m];
    db[m] += g;
    const T* row = w.data() + m * N;
    T* drow = dw.data() + m * N;
    for (std::size_t n = 0; n < N; ++n) drow[n] += g * in[n];
    if (!din.empty()) {
      for (std::size_t n = 0; n < N; ++n) din[n] += row[n] * g;
    }
  }
}

}  // namespace kernels

/// Runs one layer forward. `w`/`b` are ignored for parameterless kinds.
template <class T>
void layer_forward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, std::span<const T> in,
                   std::span<const T> w, std::span<const T> b, std::span<T> out) {
  switch (s.kind) {
    case LayerKind::conv1d: kernels::conv1d_forward(s, in_shape, out_shape, in, w, b, out); break;
    case LayerKind::tconv1d: kernels::tconv1d_forward(s, in_shape, out_shape, in, w, b, out); break;
    case LayerKind::conv2d: kernels::conv2d_forward(s, in_shape, out_shape, in, w, b, out); break;
    case LayerKind::dense: kernels::dense_forward(s, in, w, b, out); break;
    case LayerKind::relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T{} ? in[i] : T{};
      break;
    case LayerKind::flatten:
    case LayerKind::reshape: std::copy(in.begin(), in.end(), out.begin()); break;
  }
}

/// Accumulates parameter gradients into dw/db and overwrites din (skipped
/// when empty).
template <class T>
void layer_backward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, std::span<const T> in,
                    std::span<const T> w, std::span<const T> dout, std::span<T> dw, std::span<T> db,
                    std::span<T> din) {
  switch (s.kind) {
    case LayerKind::conv1d: kernels::conv1d_backward(s, in_shape, out_shape, in, w, dout, dw, db, din); break;
    case LayerKind::tconv1d: kernels::tconv1d_backward(s, in_shape, out_shape, in, w, dout, dw, db, din); break;
    case LayerKind::conv2d: kernels::conv2d_backward(s, in_shape, out_shape, in, w, dout, dw, db, din); break;
    case LayerKind::dense: kernels::dense_backward(s, in, w, dout, dw, db, din); break;
    case LayerKind::relu:
      if (!din.empty()) {
        for (std::size_t i = 0; i < in.size(); ++i) din[i] = in[i] > T{} ? dout[i] : T{};
      }
      break;
    case LayerKind::flatten:
    case LayerKind::reshape:
      if (!din.empty()) std::copy(dout.begin(), dout.end(), din.begin());
      break;
  }
}

// Tensor-level conveniences.

template <class T>
Tensor<T> forward(const LayerSpec& s, const Tensor<T>& input, const Tensor<T>& w = {}, const Tensor<T>& b = {}) {
  const Shape out_shape = output_shape(s, input.shape);
  if (has_params(s) && (w.shape != weight_shape(s) || b.shape != bias_shape(s)))
    throw std::invalid_argument(std::string(to_string(s.kind)) + ": parameter shape mismatch");
  Tensor<T> out(out_shape);
  layer_forward<T>(s, input.shape, out_shape, input.values, w.values, b.values, out.values);
  return out;
}

template <class T>
Tensor<T> conv1d_forward(const Tensor<T>& in, const LayerSpec& s, const Tensor<T>& w, const Tensor<T>& b) {
  if (s.kind != LayerKind::conv1d) throw std::invalid_argument("conv1d_forward: spec is not conv1d");
  return forward(s, in, w, b);
}

template <class T>
Tensor<T> relu(const Tensor<T>& in) {
  return forward(LayerSpec::relu(), in);
}

}  // namespace pgr::nn
