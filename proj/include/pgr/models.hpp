#pragma once

// TablaCNN, PercCNN and PercVAE, their output heads, and the composite
// training losses.
//
// Every architecture is a handful of Sequential stacks wired together:
//
//   perc_cnn : features -> encoder -> bottleneck (2) -> class head
//                                                  \-> location head
//   perc_vae : features -> encoder -> bottleneck (mu, log_var) -> z
//              z -> class head,  z -> decoder -> reconstructed features
//   tabla_cnn: features -> encoder (..., dense 128, relu) -> class head
//                                                        \-> location head
//
// The embedding point is the bottleneck output (perc_cnn), mu (perc_vae), or
// the 128-d dense activation, which is reduced to 2-D by PCA downstream
// (tabla_cnn).

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pgr/dsp.hpp"
#include "pgr/nn/adam.hpp"
#include "pgr/nn/losses.hpp"
#include "pgr/nn/sequential.hpp"

namespace pgr::models {

using nn::LayerSpec;
using nn::Sequential;
using nn::Shape;

enum class ArchitectureId { tabla_cnn, perc_cnn, perc_vae };

inline std::string_view to_string(ArchitectureId a) {
  switch (a) {
    case ArchitectureId::tabla_cnn: return "tabla_cnn";
    case ArchitectureId::perc_cnn: return "perc_cnn";
    case ArchitectureId::perc_vae: return "perc_vae";
  }
  return "?";
}

inline ArchitectureId architecture_from_string(std::string_view s) {
  for (auto a : {ArchitectureId::tabla_cnn, ArchitectureId::perc_cnn, ArchitectureId::perc_vae}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown architecture '" + std::string(s) + "'");
}

/// Raised for architecture/head combinations that are not built.
class UnsupportedConfiguration : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct HeadConfig {
  std::size_t n_cl = 2;
  std::size_t n_loc = 0;
  std::size_t n_emb = 2;

  bool hierarchical() const { return n_loc > 0; }
  bool operator==(const HeadConfig&) const = default;

  void validate(ArchitectureId arch) const {
    const bool ok = (n_cl == 2 && n_loc == 0) || (n_cl == 4 && n_loc == 0) || (n_cl == 4 && n_loc == 5);
    if (!ok) throw UnsupportedConfiguration("head: (n_cl, n_loc) must be (2,0), (4,0) or (4,5)");
    if (n_emb != 2) throw UnsupportedConfiguration("head: embedding width must be 2");
    if (arch == ArchitectureId::perc_vae && hierarchical())
      throw UnsupportedConfiguration("head: hierarchical output is not available for perc_vae");
  }
};

struct VaeLossConfig {
  double gamma = 0.001;
  double beta = 3.0;
  /// Reconstruction error per example: summed over the 384 feature values
  /// (the usual VAE likelihood term) or their mean.
  nn::Reduction recon = nn::Reduction::sum;

  void validate() const {
    if (!(gamma >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("vae loss: gamma and beta must be >= 0");
  }
};

/// Layer widths and strides not pinned by the architectures themselves.
struct ArchOptions {
  std::array<std::size_t, 3> perc_channels{16, 32, 64};
  std::array<std::size_t, 3> perc_kernels{6, 5, 5};
  std::size_t perc_stride = 2;
  std::array<std::size_t, 2> tabla_channels{16, 32};
  std::array<std::size_t, 2> tabla_kernels{7, 3};
  std::size_t tabla_stride = 2;
  std::size_t tabla_dense = 128;
  std::size_t loc_hidden = 32;
  /// Location head reads the flattened encoder output instead of the 2-D
  /// bottleneck (PercCNN only; TablaCNN heads always share the 128-d layer).
  bool loc_from_encoder = true;

  bool operator==(const ArchOptions&) const = default;
};

inline Shape input_shape(ArchitectureId arch) {
  if (arch == ArchitectureId::tabla_cnn) return {1, kChannels, kMelBands};
  return {kChannels, kDecimatedBins};
}

inline std::size_t embedding_width(ArchitectureId arch, const HeadConfig& head, const ArchOptions& opt) {
  return arch == ArchitectureId::tabla_cnn ? opt.tabla_dense : head.n_emb;
}

template <class T>
struct Model {
  ArchitectureId arch = ArchitectureId::perc_cnn;
  HeadConfig head;
  Sequential<T> encoder;
  Sequential<T> bottleneck;  // empty for tabla_cnn
  Sequential<T> class_head;
  Sequential<T> loc_head;  // empty unless hierarchical
  Sequential<T> decoder;   // empty unless perc_vae

  static constexpr std::array<std::string_view, 5> kStackNames{"encoder", "bottleneck", "class_head", "loc_head",
                                                               "decoder"};

  std::array<Sequential<T>*, 5> stacks() { return {&encoder, &bottleneck, &class_head, &loc_head, &decoder}; }
  std::array<const Sequential<T>*, 5> stacks() const {
    return {&encoder, &bottleneck, &class_head, &loc_head, &decoder};
  }

  bool is_vae() const { return arch == ArchitectureId::perc_vae; }
  bool loc_from_encoder() const {
    return head.hierarchical() && arch != ArchitectureId::tabla_cnn && !loc_head.empty() &&
           loc_head.input_shape() == encoder.output_shape();
  }
  std::size_t embedding_size() const {
    return arch == ArchitectureId::tabla_cnn ? encoder.output_shape()[0] : head.n_emb;
  }

  std::vector<std::span<T>> parameter_views() {
    std::vector<std::span<T>> out;
    for (auto* s : stacks()) {
      for (auto v : s->parameter_views()) out.push_back(v);
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* s : stacks()) n += s->parameter_count();
    return n;
  }

  template <class U>
  Model<U> cast() const {
    Model<U> m;
    m.arch = arch;
    m.head = head;
    m.encoder = encoder.template cast<U>();
    m.bottleneck = bottleneck.template cast<U>();
    m.class_head = class_head.template cast<U>();
    m.loc_head = loc_head.template cast<U>();
    m.decoder = decoder.template cast<U>();
    return m;
  }

  bool operator==(const Model&) const = default;
};

/// Layer lists for each stack, before parameters are allocated.
struct ModelLayout {
  std::array<std::pair<Shape, std::vector<LayerSpec>>, 5> stacks;
};

inline ModelLayout make_layout(ArchitectureId arch, const HeadConfig& head, const ArchOptions& opt) {
  head.validate(arch);
  ModelLayout lay;
  const Shape in = input_shape(arch);
  std::size_t head_in = head.n_emb;
  std::size_t loc_in = head.n_emb;
  if (arch == ArchitectureId::tabla_cnn) {
    const auto& ch = opt.tabla_channels;
    std::vector<LayerSpec> enc{
        LayerSpec::conv2d(1, ch[0], 1, opt.tabla_kernels[0], 1, opt.tabla_stride), LayerSpec::relu(),
        LayerSpec::conv2d(ch[0], ch[1], 1, opt.tabla_kernels[1], 1, opt.tabla_stride), LayerSpec::relu(),
        LayerSpec::flatten()};
    Shape s = in;
    for (const auto& l : enc) s = nn::output_shape(l, s);
    enc.push_back(LayerSpec::dense(s[0], opt.tabla_dense));
    enc.push_back(LayerSpec::relu());
    lay.stacks[0] = {in, enc};
    lay.stacks[1] = {{opt.tabla_dense}, {}};
    head_in = opt.tabla_dense;
    loc_in = head_in;
  } else {
    const auto& ch = opt.perc_channels;
    const auto& k = opt.perc_kernels;
    std::vector<LayerSpec> enc{LayerSpec::conv1d(kChannels, ch[0], k[0], opt.perc_stride), LayerSpec::relu(),
                               LayerSpec::conv1d(ch[0], ch[1], k[1], opt.perc_stride), LayerSpec::relu(),
                               LayerSpec::conv1d(ch[1], ch[2], k[2], opt.perc_stride), LayerSpec::relu()};
    std::vector<Shape> conv_shapes{in};
    for (const auto& l : enc) conv_shapes.push_back(nn::output_shape(l, conv_shapes.back()));
    enc.push_back(LayerSpec::flatten());
    const std::size_t flat = nn::shape_size(conv_shapes.back());
    lay.stacks[0] = {in, enc};
    const bool vae = arch == ArchitectureId::perc_vae;
    if (opt.loc_from_encoder) loc_in = flat;
    lay.stacks[1] = {{flat}, {LayerSpec::dense(flat, vae ? 2 * head.n_emb : head.n_emb)}};
    if (vae) {
      // Mirror of the encoder; output padding restores each encoder length.
      const Shape& top = conv_shapes.back();
      std::vector<LayerSpec> dec{LayerSpec::dense(head.n_emb, flat), LayerSpec::relu(), LayerSpec::reshape(top)};
      const std::array<std::size_t, 3> in_ch{kChannels, ch[0], ch[1]};
      for (int i = 2; i >= 0; --i) {
        const std::size_t from = conv_shapes[2 * static_cast<std::size_t>(i) + 2][1];
        const std::size_t want = conv_shapes[2 * static_cast<std::size_t>(i)][1];
        const std::size_t base = (from - 1) * opt.perc_stride + k[static_cast<std::size_t>(i)];
        if (want < base || want - base >= opt.perc_stride)
          throw UnsupportedConfiguration("perc_vae: decoder cannot mirror encoder lengths");
        dec.push_back(LayerSpec::tconv1d(ch[static_cast<std::size_t>(i)], in_ch[static_cast<std::size_t>(i)],
                                         k[static_cast<std::size_t>(i)], opt.perc_stride, 0, want - base));
        if (i > 0) dec.push_back(LayerSpec::relu());
      }
      lay.stacks[4] = {{head.n_emb}, dec};
    }
  }
  lay.stacks[2] = {{head_in}, {LayerSpec::dense(head_in, head.n_cl)}};
  if (head.hierarchical()) {
    lay.stacks[3] = {{loc_in},
                     {LayerSpec::dense(loc_in, opt.loc_hidden), LayerSpec::relu(),
                      LayerSpec::dense(opt.loc_hidden, head.n_loc)}};
  } else {
    lay.stacks[3] = {{head_in}, {}};
  }
  if (arch != ArchitectureId::perc_vae) lay.stacks[4] = {{head.n_emb}, {}};
  return lay;
}

template <class T>
Model<T> build_network(ArchitectureId arch, const HeadConfig& head, std::uint64_t seed,
                       const ArchOptions& opt = {}) {
  const ModelLayout lay = make_layout(arch, head, opt);
  Model<T> m;
  m.arch = arch;
  m.head = head;
  auto stacks = m.stacks();
  nn::Rng rng(seed);
  for (std::size_t i = 0; i < stacks.size(); ++i) {
    *stacks[i] = Sequential<T>(lay.stacks[i].first, lay.stacks[i].second);
    stacks[i]->init_glorot(rng);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

template <class T>
struct ModelWorkspace {
  nn::SequentialWorkspace<T> enc, bott, cls, loc, dec;
  std::vector<T> embedding, mu, log_var, z, class_probs, loc_probs;
  std::vector<T> d_head, d_bott, d_tmp, d_recon, d_kl_mu, d_kl_lv, d_enc;

  ModelWorkspace() = default;
  explicit ModelWorkspace(const Model<T>& m)
      : enc(m.encoder), bott(m.bottleneck), cls(m.class_head), loc(m.loc_head), dec(m.decoder),
        embedding(m.embedding_size()), mu(m.head.n_emb), log_var(m.head.n_emb), z(m.head.n_emb),
        class_probs(m.head.n_cl), loc_probs(m.head.n_loc), d_head(m.class_head.input_shape()[0]),
        d_bott(nn::shape_size(m.bottleneck.output_shape())),
        d_tmp(std::max<std::size_t>(m.head.n_cl, m.head.n_loc)),
        d_recon(m.is_vae() ? nn::shape_size(m.decoder.output_shape()) : 0), d_kl_mu(m.head.n_emb),
        d_kl_lv(m.head.n_emb), d_enc(nn::shape_size(m.encoder.output_shape())) {}

  std::span<const T> reconstruction() const { return dec.acts.back(); }
};

template <class T>
struct ModelGrads {
  std::array<nn::SequentialGrads<T>, 5> stacks;

  ModelGrads() = default;
  explicit ModelGrads(const Model<T>& m) {
    auto s = m.stacks();
    for (std::size_t i = 0; i < s.size(); ++i) stacks[i] = nn::SequentialGrads<T>(*s[i]);
  }
  void zero() {
    for (auto& s : stacks) s.zero();
  }
  std::vector<std::span<T>> views(const Model<T>& m) {
    std::vector<std::span<T>> out;
    auto s = m.stacks();
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (auto v : stacks[i].views(*s[i])) out.push_back(v);
    }
    return out;
  }
};

/// Forward pass. With `noise` (perc_vae training) z is sampled; otherwise
/// z = mu. The decoder only runs when `reconstruct` is set.
template <class T>
void forward(const Model<T>& m, std::span<const T> features, ModelWorkspace<T>& ws,
             std::span<const T> noise = {}, bool reconstruct = false) {
  const auto enc_out = nn::forward(m.encoder, features, ws.enc);
  std::span<const T> head_in;
  if (m.arch == ArchitectureId::tabla_cnn) {
    std::copy(enc_out.begin(), enc_out.end(), ws.embedding.begin());
    head_in = enc_out;
  } else if (m.arch == ArchitectureId::perc_cnn) {
    const auto b = nn::forward(m.bottleneck, enc_out, ws.bott);
    std::copy(b.begin(), b.end(), ws.embedding.begin());
    head_in = b;
  } else {
    const auto b = nn::forward(m.bottleneck, enc_out, ws.bott);
    const std::size_t d = m.head.n_emb;
    std::copy(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(d), ws.mu.begin());
    std::copy(b.begin() + static_cast<std::ptrdiff_t>(d), b.end(), ws.log_var.begin());
    if (noise.empty()) {
      ws.z = ws.mu;
    } else {
      nn::reparameterize<T>(ws.mu, ws.log_var, noise, ws.z);
    }
    ws.embedding = ws.mu;
    head_in = ws.z;
    if (reconstruct) nn::forward<T>(m.decoder, ws.z, ws.dec);
  }
  nn::softmax(nn::forward(m.class_head, head_in, ws.cls), std::span<T>(ws.class_probs));
  if (m.head.hierarchical()) {
    const auto loc_in = m.loc_from_encoder() ? enc_out : head_in;
    nn::softmax(nn::forward(m.loc_head, loc_in, ws.loc), std::span<T>(ws.loc_probs));
  }
}

struct Target {
  std::size_t cls = 0;
  std::size_t loc = 0;
};

/// Per-term loss values. `classification` is reported as BCE for 2-class
/// heads and CE otherwise; with a 2-way softmax the two coincide.
struct LossBreakdown {
  double total = 0;
  double classification = 0;
  double location = 0;
  double mse_recon = 0;
  double kld = 0;
  bool binary = false;
};

/// L_VAE = classification + gamma (MSE + beta KLD).
inline double vae_total(double classification, double mse, double kld, const VaeLossConfig& cfg) {
  return classification + cfg.gamma * (mse + cfg.beta * kld);
}

inline void check_target(const HeadConfig& head, const Target& t) {
  if (t.cls >= head.n_cl) throw std::invalid_argument("target class " + std::to_string(t.cls) + " outside head");
  if (head.hierarchical() && t.loc >= head.n_loc)
    throw std::invalid_argument("target location " + std::to_string(t.loc) + " outside head");
}

/// Loss for one example and, when `grads` is non-null, gradients scaled by
/// `scale` accumulated into it.
template <class T>
LossBreakdown loss_and_backward(const Model<T>& m, std::span<const T> features, const Target& target,
                                ModelWorkspace<T>& ws, ModelGrads<T>* grads, const VaeLossConfig& vae,
                                std::span<const T> noise = {}, T scale = T(1)) {
  check_target(m.head, target);
  const bool vae_on = m.is_vae();
  forward(m, features, ws, noise, vae_on);
  LossBreakdown lb;
  lb.binary = m.head.n_cl == 2;
  lb.classification = static_cast<double>(
      lb.binary ? nn::bce_loss<T>(ws.class_probs[1], static_cast<int>(target.cls == 1))
                : nn::ce_loss<T>(std::span<const T>(ws.class_probs), target.cls));
  if (m.head.hierarchical())
    lb.location = static_cast<double>(nn::ce_loss<T>(std::span<const T>(ws.loc_probs), target.loc));
  if (vae_on) {
    lb.mse_recon = static_cast<double>(nn::mse_loss<T>(ws.reconstruction(), features, vae.recon));
    lb.kld = static_cast<double>(nn::kld_gaussian_standard<T>(ws.mu, ws.log_var));
    lb.total = vae_total(lb.classification, lb.mse_recon, lb.kld, vae);
  } else {
    lb.total = lb.classification + lb.location;
  }
  if (!grads) return lb;

  auto& g = *grads;
  // Class head.
  std::vector<T>& dlog = ws.d_tmp;
  std::span<T> dlogits(dlog.data(), m.head.n_cl);
  nn::ce_softmax_grad<T>(ws.class_probs, target.cls, scale, dlogits);
  auto dh = nn::backward<T>(m.class_head, ws.cls, dlogits, g.stacks[2]);
  std::copy(dh.begin(), dh.end(), ws.d_head.begin());
  std::span<const T> d_loc_in;
  if (m.head.hierarchical()) {
    std::span<T> dloc(dlog.data(), m.head.n_loc);
    nn::ce_softmax_grad<T>(ws.loc_probs, target.loc, scale, dloc);
    d_loc_in = nn::backward<T>(m.loc_head, ws.loc, dloc, g.stacks[3]);
    if (!m.loc_from_encoder()) {
      for (std::size_t i = 0; i < ws.d_head.size(); ++i) ws.d_head[i] += d_loc_in[i];
    }
  }

  std::span<const T> d_enc_out;
  if (m.arch == ArchitectureId::tabla_cnn) {
    d_enc_out = ws.d_head;
  } else if (m.arch == ArchitectureId::perc_cnn) {
    d_enc_out = nn::backward<T>(m.bottleneck, ws.bott, ws.d_head, g.stacks[1]);
    if (m.loc_from_encoder()) {
      for (std::size_t i = 0; i < ws.d_enc.size(); ++i) ws.d_enc[i] = d_enc_out[i] + d_loc_in[i];
      d_enc_out = ws.d_enc;
    }
  } else {
    const std::size_t d = m.head.n_emb;
    const T gamma = static_cast<T>(vae.gamma), beta = static_cast<T>(vae.beta);
    // Decoder: gradient of gamma * MSE w.r.t. z.
    nn::mse_grad<T>(ws.reconstruction(), features, scale * gamma, ws.d_recon, vae.recon);
    auto dz_dec = nn::backward<T>(m.decoder, ws.dec, ws.d_recon, g.stacks[4]);
    auto& dkl_mu = ws.d_kl_mu;
    auto& dkl_lv = ws.d_kl_lv;
    nn::kld_grad<T>(ws.mu, ws.log_var, scale * gamma * beta, dkl_mu, dkl_lv);
    for (std::size_t i = 0; i < d; ++i) {
      const T dz = ws.d_head[i] + dz_dec[i];
      const T eps = noise.empty() ? T{} : noise[i];
      ws.d_bott[i] = dz + dkl_mu[i];
      ws.d_bott[d + i] = dz * eps * T(0.5) * std::exp(ws.log_var[i] / T(2)) + dkl_lv[i];
    }
    d_enc_out = nn::backward<T>(m.bottleneck, ws.bott, ws.d_bott, g.stacks[1]);
  }
  nn::backward<T>(m.encoder, ws.enc, d_enc_out, g.stacks[0], false);
  return lb;
}

/// Mean loss over a batch (row-major features [batch, feature_size]). For
/// perc_vae, `noise` holds n_emb draws per example; empty means z = mu.
template <class T>
LossBreakdown compute_loss(const Model<T>& m, std::span<const T> batch, std::span<const Target> targets,
                           const VaeLossConfig& vae, std::span<const T> noise = {}) {
  vae.validate();
  const std::size_t fsize = nn::shape_size(m.encoder.input_shape());
  if (targets.empty() || batch.size() != fsize * targets.size())
    throw std::invalid_argument("compute_loss: batch/target size mismatch");
  ModelWorkspace<T> ws(m);
  LossBreakdown acc;
  const std::size_t d = m.head.n_emb;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::span<const T> nz = noise.empty() ? std::span<const T>() : noise.subspan(i * d, d);
    const auto lb = loss_and_backward<T>(m, batch.subspan(i * fsize, fsize), targets[i], ws, nullptr, vae, nz);
    acc.total += lb.total;
    acc.classification += lb.classification;
    acc.location += lb.location;
    acc.mse_recon += lb.mse_recon;
    acc.kld += lb.kld;
    acc.binary = lb.binary;
  }
  const double n = static_cast<double>(targets.size());
  acc.total /= n;
  acc.classification /= n;
  acc.location /= n;
  acc.mse_recon /= n;
  acc.kld /= n;
  return acc;
}

// ---------------------------------------------------------------------------
// Bundle

struct FeatureMeta {
  bool windowed = true;
  double log_floor = kLogFloor;

  bool operator==(const FeatureMeta&) const = default;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  double learning_rate = 1e-3;
  std::string selection;  // "val" or "paper"
  std::string dataset_hash;
  double gamma = 0.001;
  double beta = 3.0;
  std::string recon_reduction = "sum";
  bool augmentation = false;
  std::size_t best_epoch = 0;
  double best_accuracy = 0.0;

  bool operator==(const TrainingMeta&) const = default;
};

/// Fixed 2-D projection of a wide embedding, fitted after training so
/// streaming can report points without refitting.
struct Projection {
  std::vector<float> mean;
  std::vector<float> components;  // 2 x mean.size(), row-major

  bool empty() const { return mean.empty(); }
  bool operator==(const Projection&) const = default;
};

struct ModelBundle {
  Model<float> model;
  ArchOptions options;
  FeatureMeta features;
  TrainingMeta training;
  Projection projection;

  ArchitectureId arch() const { return model.arch; }
  const HeadConfig& head() const { return model.head; }
  bool operator==(const ModelBundle&) const = default;
};

inline ModelBundle build_model(ArchitectureId arch, const HeadConfig& head, std::uint64_t seed,
                               const ArchOptions& opt = {}) {
  ModelBundle b;
  b.model = build_network<float>(arch, head, seed, opt);
  b.options = opt;
  b.training.seed = seed;
  return b;
}

/// Inference result for one window.
struct Prediction {
  std::vector<float> class_probs;
  std::vector<float> loc_probs;
  /// 2-D point, or the 128-d activation when `needs_pca` is set.
  std::vector<float> embedding;
  bool needs_pca = false;
};

inline Prediction forward_classify(const ModelBundle& b, std::span<const float> features) {
  const auto& m = b.model;
  if (features.size() != nn::shape_size(m.encoder.input_shape()))
    throw std::invalid_argument("forward_classify: feature tensor has " + std::to_string(features.size()) +
                                " values, expected " + nn::shape_string(m.encoder.input_shape()));
  ModelWorkspace<float> ws(m);
  forward(m, features, ws);
  return {ws.class_probs, ws.loc_probs, ws.embedding, m.arch == ArchitectureId::tabla_cnn};
}

/// Applies the bundle's stored projection (if any) to an embedding.
inline std::array<float, 2> project_embedding(const ModelBundle& b, std::span<const float> emb) {
  if (b.projection.empty()) {
    if (emb.size() < 2) throw std::invalid_argument("project_embedding: embedding too small");
    return {emb[0], emb[1]};
  }
  const std::size_t d = b.projection.mean.size();
  if (emb.size() != d) throw std::invalid_argument("project_embedding: dimension mismatch");
  std::array<float, 2> out{};
  for (std::size_t r = 0; r < 2; ++r) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      acc += static_cast<double>(b.projection.components[r * d + k]) * (emb[k] - b.projection.mean[k]);
    out[r] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace pgr::models
