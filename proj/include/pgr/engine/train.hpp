#pragma once

// Training loop, batch prediction and evaluation helpers shared by the CLI
// and the tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pgr/bundle_io.hpp"
#include "pgr/data.hpp"
#include "pgr/eval.hpp"
#include "pgr/features.hpp"
#include "pgr/models.hpp"

namespace pgr::engine {

using models::ArchitectureId;

inline models::HeadConfig head_for(Task t) {
  switch (t) {
    case Task::kick2: return {2, 0, 2};
    case Task::hand4: return {4, 0, 2};
    case Task::hierarchical: return {4, 5, 2};
  }
  return {};
}

inline Task task_for(const models::HeadConfig& h) {
  if (h.hierarchical()) return Task::hierarchical;
  return h.n_cl == 2 ? Task::kick2 : Task::hand4;
}

inline models::Target target_for(const HitLabel& l, Task t) { return {class_index(l, t), location_index(l)}; }

enum class Selection { val, paper };

inline Selection parse_selection(std::string_view s) {
  if (s == "val") return Selection::val;
  if (s == "paper") return Selection::paper;
  throw std::invalid_argument("selection must be 'val' or 'paper'");
}

struct TrainConfig {
  ArchitectureId arch = ArchitectureId::perc_cnn;
  Task task = Task::kick2;
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  Selection selection = Selection::val;
  data::AugmentPolicy augment;
  models::VaeLossConfig vae;
  models::ArchOptions options;
  models::FeatureMeta features;
  double test_frac = 0.2;
  double val_frac = 0.2;
  data::RebalanceMode rebalance = data::RebalanceMode::none;
  /// Called after each epoch with (epoch, mean train loss, selection accuracy).
  std::function<void(std::size_t, double, double)> on_epoch;
};

struct EpochStats {
  double train_loss = 0;
  double select_accuracy = 0;
  double select_loss = 0;
};

struct TrainResult {
  models::ModelBundle bundle;
  data::Split split;
  std::vector<EpochStats> history;
};

/// Split from manifest tags when every example carries one, otherwise a
/// stratified split on the task's label tuple.
inline data::Split make_split(const data::Dataset& ds, Task task, double test_frac, double val_frac,
                              std::uint64_t seed) {
  const bool tagged = !ds.empty() && std::all_of(ds.begin(), ds.end(), [](const auto& e) { return e.split.has_value(); });
  if (tagged) {
    data::Split s;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& tag = *ds[i].split;
      if (tag == "train") s.train.push_back(i);
      else if (tag == "val") s.val.push_back(i);
      else if (tag == "test") s.test.push_back(i);
      else throw data::DataError("entry " + std::to_string(i) + ": unknown split tag '" + tag + "'");
    }
    return s;
  }
  std::vector<std::size_t> keys;
  keys.reserve(ds.size());
  for (const auto& e : ds) keys.push_back(strata_key(e.label, task));
  return data::stratified_split(keys, test_frac, val_frac, seed);
}

/// Network inputs for every example, row-major.
inline std::vector<float> extract_all(const data::Dataset& ds, std::span<const std::size_t> idx, FeatureKind kind,
                                      const models::FeatureMeta& meta) {
  FeatureExtractor fx(kind, meta);
  std::vector<float> out(idx.size() * fx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    fx.extract(ds[idx[i]].window, std::span<float>(out).subspan(i * fx.size(), fx.size()));
  return out;
}

struct Predictions {
  std::vector<std::size_t> cls, loc;
  std::vector<std::vector<float>> embedding;
  double mean_loss = 0;
};

inline Predictions predict(const models::Model<float>& m, std::span<const float> feats, std::size_t n,
                           std::span<const models::Target> targets = {}, const models::VaeLossConfig& vae = {}) {
  Predictions p;
  const std::size_t fs = nn::shape_size(m.encoder.input_shape());
  models::ModelWorkspace<float> ws(m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto x = feats.subspan(i * fs, fs);
    if (!targets.empty()) {
      p.mean_loss += models::loss_and_backward<float>(m, x, targets[i], ws, nullptr, vae).total;
    } else {
      models::forward(m, x, ws);
    }
    p.cls.push_back(static_cast<std::size_t>(
        std::max_element(ws.class_probs.begin(), ws.class_probs.end()) - ws.class_probs.begin()));
    p.loc.push_back(ws.loc_probs.empty() ? 0
                                         : static_cast<std::size_t>(std::max_element(ws.loc_probs.begin(),
                                                                                      ws.loc_probs.end()) -
                                                                    ws.loc_probs.begin()));
    p.embedding.push_back(ws.embedding);
  }
  if (n) p.mean_loss /= static_cast<double>(n);
  return p;
}

/// Fraction correct; hierarchical heads average class and location.
inline double accuracy(const Predictions& p, std::span<const models::Target> t, bool hierarchical) {
  if (t.empty()) return 0.0;
  double c = 0, l = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    c += p.cls[i] == t[i].cls;
    l += p.loc[i] == t[i].loc;
  }
  const double n = static_cast<double>(t.size());
  return hierarchical ? 0.5 * (c + l) / n : c / n;
}

inline bool all_finite(const models::Model<float>& m) {
  for (const auto* s : m.stacks()) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      if (!s->weight(i).all_finite() || !s->bias(i).all_finite()) return false;
    }
  }
  return true;
}

/// Fits a PCA basis on the training embeddings of a wide-embedding model.
inline models::Projection fit_projection(const models::Model<float>& m, std::span<const float> feats, std::size_t n) {
  const auto p = predict(m, feats, n);
  std::vector<std::vector<double>> xs;
  for (const auto& e : p.embedding) xs.emplace_back(e.begin(), e.end());
  const auto basis = eval::pca_fit(xs);
  models::Projection out;
  for (Eigen::Index k = 0; k < basis.mean.size(); ++k) out.mean.push_back(static_cast<float>(basis.mean(k)));
  for (Eigen::Index r = 0; r < 2; ++r) {
    for (Eigen::Index k = 0; k < basis.mean.size(); ++k)
      out.components.push_back(static_cast<float>(basis.components(r, k)));
  }
  return out;
}

inline TrainResult train(const data::Dataset& ds, const TrainConfig& cfg) {
  if (cfg.epochs == 0 || cfg.batch_size == 0) throw std::invalid_argument("train: epochs and batch size must be positive");
  cfg.vae.validate();
  const auto head = head_for(cfg.task);
  TrainResult res;
  res.bundle = models::build_model(cfg.arch, head, cfg.seed, cfg.options);
  res.bundle.features = cfg.features;
  auto& m = res.bundle.model;
  res.split = make_split(ds, cfg.task, cfg.test_frac, cfg.val_frac, cfg.seed);
  if (res.split.train.empty()) throw data::DataError("train: training split is empty");

  std::vector<std::size_t> train_idx = res.split.train;
  if (cfg.rebalance != data::RebalanceMode::none) {
    std::vector<std::size_t> keys;
    for (auto i : train_idx) keys.push_back(class_index(ds[i].label, cfg.task));
    std::vector<std::size_t> kept;
    for (auto k : data::rebalance(keys, cfg.rebalance, cfg.seed)) kept.push_back(train_idx[k]);
    train_idx = kept;
  }
  const auto& sel_src = cfg.selection == Selection::paper ? res.split.test : res.split.val;
  const std::vector<std::size_t> sel_idx = sel_src.empty() ? train_idx : sel_src;

  const FeatureKind kind = feature_kind(cfg.arch);
  FeatureExtractor fx(kind, cfg.features);
  const std::size_t fs = fx.size();
  const auto sel_feats = extract_all(ds, sel_idx, kind, cfg.features);
  std::vector<models::Target> sel_t;
  for (auto i : sel_idx) sel_t.push_back(target_for(ds[i].label, cfg.task));
  std::vector<float> clean_train;
  if (cfg.augment.empty()) clean_train = extract_all(ds, train_idx, kind, cfg.features);

  nn::Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  models::ModelWorkspace<float> ws(m);
  models::ModelGrads<float> grads(m);
  nn::AdamState<float> adam;
  adam.lr = cfg.learning_rate;
  std::vector<float> x(fs), noise(head.n_emb);
  std::vector<std::size_t> order(train_idx.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::optional<models::Model<float>> best;
  double best_acc = -1.0, best_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      const float scale = 1.0f / static_cast<float>(b1 - b0);
      grads.zero();
      for (std::size_t k = b0; k < b1; ++k) {
        const std::size_t local = order[k];
        const auto& ex = ds[train_idx[local]];
        if (cfg.augment.empty()) {
          std::copy_n(clean_train.begin() + static_cast<std::ptrdiff_t>(local * fs), fs, x.begin());
        } else {
          fx.extract(data::augment(ex.window, cfg.augment, rng), x);
        }
        std::span<const float> nz;
        if (m.is_vae()) {
          for (auto& v : noise) v = gauss(rng);
          nz = noise;
        }
        const auto lb = models::loss_and_backward<float>(m, x, target_for(ex.label, cfg.task), ws, &grads, cfg.vae,
                                                         nz, scale);
        if (!std::isfinite(lb.total))
          throw eval::NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1));
        epoch_loss += lb.total;
      }
      nn::adam_step(m.parameter_views(), grads.views(m), adam);
    }
    if (!all_finite(m)) throw eval::NumericError("train: non-finite parameters at epoch " + std::to_string(epoch + 1));
    const auto p = predict(m, sel_feats, sel_idx.size(), sel_t, cfg.vae);
    EpochStats st{epoch_loss / static_cast<double>(order.size()), accuracy(p, sel_t, head.hierarchical()), p.mean_loss};
    res.history.push_back(st);
    if (st.select_accuracy > best_acc || (st.select_accuracy == best_acc && st.select_loss < best_loss)) {
      best_acc = st.select_accuracy;
      best_loss = st.select_loss;
      best = m;
      res.bundle.training.best_epoch = epoch + 1;
    }
    if (cfg.on_epoch) cfg.on_epoch(epoch + 1, st.train_loss, st.select_accuracy);
  }
  m = *best;

  auto& tm = res.bundle.training;
  tm.seed = cfg.seed;
  tm.epochs = cfg.epochs;
  tm.batch_size = cfg.batch_size;
  tm.learning_rate = cfg.learning_rate;
  tm.selection = cfg.selection == Selection::paper ? "paper" : "val";
  tm.dataset_hash = data::dataset_hash(ds);
  tm.gamma = cfg.vae.gamma;
  tm.beta = cfg.vae.beta;
  tm.recon_reduction = cfg.vae.recon == nn::Reduction::sum ? "sum" : "mean";
  tm.augmentation = !cfg.augment.empty();
  tm.best_accuracy = best_acc;
  if (cfg.arch == ArchitectureId::tabla_cnn) {
    const auto tf = extract_all(ds, train_idx, kind, cfg.features);
    res.bundle.projection = fit_projection(m, tf, train_idx.size());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  eval::ConfusionMatrix confusion;
  eval::Metrics metrics;
  std::optional<eval::ConfusionMatrix> loc_confusion;
  std::optional<eval::Metrics> loc_metrics;
  eval::EmbeddingSet embeddings;
  /// Raw embeddings (128-d for TablaCNN), one per example.
  std::vector<std::vector<float>> raw_embeddings;
};

/// Runs the bundle over `idx` (all examples when empty). Embedding points
/// are the 2-D bottleneck / mu, or a PCA of the wide layer fitted here.
inline Evaluation evaluate(const models::ModelBundle& b, const data::Dataset& ds, std::vector<std::size_t> idx = {}) {
  if (idx.empty()) {
    idx.resize(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  }
  const Task task = task_for(b.head());
  const auto feats = extract_all(ds, idx, feature_kind(b.arch()), b.features);
  const auto p = predict(b.model, feats, idx.size());
  Evaluation ev;
  ev.confusion = eval::ConfusionMatrix(class_names(task));
  if (b.head().hierarchical()) ev.loc_confusion = eval::ConfusionMatrix(location_names());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto& l = ds[idx[i]].label;
    ev.confusion.add(class_index(l, task), p.cls[i]);
    if (ev.loc_confusion) ev.loc_confusion->add(location_index(l), p.loc[i]);
    ev.embeddings.labels.push_back(l);
  }
  ev.metrics = eval::metrics(ev.confusion);
  if (ev.loc_confusion) ev.loc_metrics = eval::metrics(*ev.loc_confusion);
  ev.raw_embeddings = p.embedding;
  const std::string arch(models::to_string(b.arch()));
  if (b.arch() == ArchitectureId::tabla_cnn) {
    ev.embeddings.source = arch + "/pca";
    if (idx.size() >= 3) {
      std::vector<std::vector<double>> xs;
      for (const auto& e : p.embedding) xs.emplace_back(e.begin(), e.end());
      const auto basis = eval::pca_fit(xs);
      for (const auto& x : xs) ev.embeddings.points.push_back(eval::pca_project(basis, x));
    } else {
      for (const auto& e : p.embedding) {
        const auto q = models::project_embedding(b, e);
        ev.embeddings.points.push_back({q[0], q[1]});
      }
    }
  } else {
    ev.embeddings.source = arch + (b.model.is_vae() ? "/mu" : "/bottleneck");
    for (const auto& e : p.embedding) ev.embeddings.points.push_back({e[0], e[1]});
  }
  return ev;
}

inline eval::Report make_report(const models::ModelBundle& b, const data::Dataset& ds, const Evaluation& ev) {
  eval::Report r;
  r.metrics = ev.metrics;
  r.confusion = ev.confusion;
  r.location_metrics = ev.loc_metrics;
  r.meta = {models::bundle_hash(b), data::dataset_hash(ds), b.training.seed};
  return r;
}

struct CrossResult {
  std::string manifest;
  std::optional<eval::Report> report;
  std::string error;
};

/// Evaluates one bundle on several manifests; a failing manifest is
/// reported and the rest still run.
inline std::vector<CrossResult> cross_dataset_eval(const models::ModelBundle& b, const std::vector<std::string>& manifests,
                                                   const data::ManifestOptions& opt = {}) {
  std::vector<CrossResult> out;
  for (const auto& path : manifests) {
    CrossResult r{path, std::nullopt, {}};
    try {
      const auto ds = data::load_dataset(path, opt);
      r.report = make_report(b, ds, evaluate(b, ds));
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pgr::engine
