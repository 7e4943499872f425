#pragma once

// Classification metrics, PCA for wide embeddings, Gaussian fits and the
// KL-divergence matrices used to judge embedding quality.

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "pgr/labels.hpp"
#include "pgr/util.hpp"

namespace pgr::eval {

using nlohmann::json;

class FitError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Metrics

class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::vector<std::string> labels)
      : labels_(std::move(labels)), counts_(labels_.size() * labels_.size(), 0) {}

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  /// Row = truth, column = prediction.
  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_.at(truth * size() + pred); }
  std::uint64_t& at(std::size_t truth, std::size_t pred) { return counts_.at(truth * size() + pred); }

  void add(std::size_t truth, std::size_t pred) {
    if (truth >= size() || pred >= size()) throw std::out_of_range("ConfusionMatrix: class index out of range");
    ++at(truth, pred);
  }

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (auto c : counts_) n += c;
    return n;
  }
  std::uint64_t support(std::size_t truth) const {
    std::uint64_t n = 0;
    for (std::size_t p = 0; p < size(); ++p) n += at(truth, p);
    return n;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<std::uint64_t> counts_;
};

struct ClassMetrics {
  std::string label;
  double precision = 0.0, recall = 0.0, f = 0.0;
  std::uint64_t support = 0;
};

struct Metrics {
  std::vector<ClassMetrics> per_class;
  double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f = 0.0;
  double accuracy = 0.0;
  /// Only one class occurs in the ground truth: its precision is 1 by
  /// construction and recall is the informative number.
  bool recall_only = false;
};

inline double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

inline Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  const std::size_t n = cm.size();
  std::size_t present = 0;
  for (std::size_t c = 0; c < n; ++c) present += cm.support(c) > 0;
  m.recall_only = present == 1;
  const double total = static_cast<double>(cm.total());
  double diag = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    double tp = static_cast<double>(cm.at(c, c)), fp = 0.0, fn = 0.0;
    for (std::size_t o = 0; o < n; ++o) {
      if (o == c) continue;
      fp += static_cast<double>(cm.at(o, c));
      fn += static_cast<double>(cm.at(c, o));
    }
    diag += tp;
    ClassMetrics k;
    k.label = cm.labels()[c];
    k.support = cm.support(c);
    k.precision = (m.recall_only && k.support > 0) ? 1.0 : safe_div(tp, tp + fp);
    k.recall = safe_div(tp, tp + fn);
    k.f = safe_div(2.0 * k.precision * k.recall, k.precision + k.recall);
    const double w = safe_div(static_cast<double>(k.support), total);
    m.weighted_precision += w * k.precision;
    m.weighted_recall += w * k.recall;
    m.weighted_f += w * k.f;
    m.per_class.push_back(k);
  }
  m.accuracy = safe_div(diag, total);
  return m;
}

inline double percent2(double x) { return std::round(x * 10000.0) / 100.0; }

inline json metrics_to_json(const Metrics& m) {
  json classes = json::array();
  for (const auto& k : m.per_class) {
    classes.push_back({{"label", k.label},
                       {"precision", k.precision},
                       {"recall", k.recall},
                       {"f", k.f},
                       {"f_percent", percent2(k.f)},
                       {"support", k.support}});
  }
  return {{"classes", classes},
          {"weighted", {{"precision", m.weighted_precision},
                        {"recall", m.weighted_recall},
                        {"f", m.weighted_f},
                        {"f_percent", percent2(m.weighted_f)}}},
          {"accuracy", m.accuracy},
          {"recall_only", m.recall_only}};
}

inline json confusion_to_json(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (std::size_t t = 0; t < cm.size(); ++t) {
    json r = json::array();
    for (std::size_t p = 0; p < cm.size(); ++p) r.push_back(cm.at(t, p));
    rows.push_back(r);
  }
  return {{"labels", cm.labels()}, {"counts", rows}};
}

// ---------------------------------------------------------------------------
// PCA

struct PcaBasis {
  Eigen::VectorXd mean;
  /// 2 x d, rows orthonormal.
  Eigen::MatrixXd components;
  std::array<double, 2> explained_variance{};
  std::array<double, 2> explained_ratio{};
};

using EmbeddingPoint = std::array<double, 2>;

inline PcaBasis pca_fit(const std::vector<std::vector<double>>& xs) {
  if (xs.size() < 3) throw FitError("pca_fit: need at least 3 vectors, got " + std::to_string(xs.size()));
  const auto d = static_cast<Eigen::Index>(xs.front().size());
  if (d < 2) throw FitError("pca_fit: vectors must have at least 2 dimensions");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), d);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (static_cast<Eigen::Index>(xs[i].size()) != d) throw FitError("pca_fit: ragged input");
    X.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(xs[i].data(), d);
  }
  PcaBasis b;
  b.mean = X.colwise().mean().transpose();
  X.rowwise() -= b.mean.transpose();
  const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(xs.size() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericError("pca_fit: eigen decomposition failed");
  b.components.resize(2, d);
  const double total = std::max(es.eigenvalues().sum(), 0.0);
  for (int k = 0; k < 2; ++k) {
    const Eigen::Index col = d - 1 - k;  // eigenvalues ascend
    Eigen::VectorXd v = es.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    b.components.row(k) = v.transpose();
    b.explained_variance[static_cast<std::size_t>(k)] = std::max(es.eigenvalues()(col), 0.0);
    b.explained_ratio[static_cast<std::size_t>(k)] =
        total > 0 ? b.explained_variance[static_cast<std::size_t>(k)] / total : 0.0;
  }
  return b;
}

inline EmbeddingPoint pca_project(const PcaBasis& b, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != b.mean.size()) throw std::invalid_argument("pca_project: dimension");
  const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(x.data(), b.mean.size()) - b.mean;
  const Eigen::Vector2d p = b.components * c;
  return {p(0), p(1)};
}

inline std::vector<double> pca_reconstruct(const PcaBasis& b, const EmbeddingPoint& p) {
  const Eigen::VectorXd x = b.mean + b.components.transpose() * Eigen::Vector2d(p[0], p[1]);
  return {x.data(), x.data() + x.size()};
}

// ---------------------------------------------------------------------------
// Gaussian fits and KL

inline constexpr double kRidge = 1e-6;

struct GaussianFit {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();
};

inline GaussianFit fit_gaussian(std::span<const EmbeddingPoint> pts) {
  if (pts.size() < 3) throw FitError("fit_gaussian: need at least 3 points, got " + std::to_string(pts.size()));
  GaussianFit g;
  g.mean.setZero();
  for (const auto& p : pts) g.mean += Eigen::Vector2d(p[0], p[1]);
  g.mean /= static_cast<double>(pts.size());
  g.cov.setZero();
  for (const auto& p : pts) {
    const Eigen::Vector2d d = Eigen::Vector2d(p[0], p[1]) - g.mean;
    g.cov += d * d.transpose();
  }
  g.cov /= static_cast<double>(pts.size() - 1);
  g.cov += kRidge * Eigen::Matrix2d::Identity();
  return g;
}

/// Closed-form KL(a || b) between two bivariate Gaussians.
inline double kl_gaussian(const GaussianFit& a, const GaussianFit& b) {
  const double det_a = a.cov.determinant(), det_b = b.cov.determinant();
  if (!(det_a > 0.0) || !(det_b > 0.0) || !std::isfinite(det_a) || !std::isfinite(det_b))
    throw NumericError("kl_gaussian: covariance is singular");
  const Eigen::Matrix2d inv_b = b.cov.inverse();
  const Eigen::Vector2d dm = b.mean - a.mean;
  const double kl = 0.5 * ((inv_b * a.cov).trace() + dm.dot(inv_b * dm) - 2.0 + std::log(det_b / det_a));
  return std::max(kl, 0.0);
}

struct EmbeddingSet {
  std::vector<EmbeddingPoint> points;
  std::vector<HitLabel> labels;
  /// e.g. "perc_vae/mu", "perc_cnn/bottleneck", "tabla_cnn/pca".
  std::string source;
};

struct KlMatrix {
  Facet facet = Facet::dynamics;
  std::vector<std::string> labels;
  /// nullopt where either side is missing.
  std::vector<std::vector<std::optional<double>>> matrix;
  std::vector<std::string> missing;
  std::vector<std::size_t> counts;

  std::optional<double> at(std::size_t i, std::size_t j) const { return matrix.at(i).at(j); }
  std::optional<double> max_off_diagonal() const {
    std::optional<double> best;
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      for (std::size_t j = 0; j < matrix.size(); ++j) {
        if (i != j && matrix[i][j] && (!best || *matrix[i][j] > *best)) best = matrix[i][j];
      }
    }
    return best;
  }
};

/// Pairwise KL between per-facet Gaussian fits. Facet values with fewer
/// than 3 points are listed in `missing` and their rows/columns are empty.
/// `filter` restricts which points take part.
template <class Pred>
KlMatrix kl_matrix(const EmbeddingSet& emb, Facet facet, Pred filter) {
  KlMatrix out;
  out.facet = facet;
  const auto all = facet_values(facet);
  std::vector<std::vector<EmbeddingPoint>> groups(all.size());
  for (std::size_t i = 0; i < emb.points.size(); ++i) {
    if (!filter(emb.labels[i])) continue;
    groups[facet_index(emb.labels[i], facet)].push_back(emb.points[i]);
  }
  std::vector<std::optional<GaussianFit>> fits;
  for (std::size_t v = 0; v < all.size(); ++v) {
    if (groups[v].empty()) continue;
    out.labels.push_back(all[v]);
    out.counts.push_back(groups[v].size());
    if (groups[v].size() < 3) {
      out.missing.push_back(all[v]);
      fits.emplace_back();
    } else {
      fits.emplace_back(fit_gaussian(groups[v]));
    }
  }
  const std::size_t n = out.labels.size();
  out.matrix.assign(n, std::vector<std::optional<double>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!fits[i] || !fits[j]) continue;
      out.matrix[i][j] = i == j ? 0.0 : kl_gaussian(*fits[i], *fits[j]);
    }
  }
  return out;
}

inline KlMatrix kl_matrix(const EmbeddingSet& emb, Facet facet) {
  return kl_matrix(emb, facet, [](const HitLabel&) { return true; });
}

inline json kl_to_json(const KlMatrix& k) {
  json rows = json::array();
  for (const auto& r : k.matrix) {
    json row = json::array();
    for (const auto& v : r) row.push_back(v ? json(*v) : json(nullptr));
    rows.push_back(row);
  }
  return {{"facet", std::string(to_string(k.facet))},
          {"labels", k.labels},
          {"counts", k.counts},
          {"matrix", rows},
          {"missing", k.missing}};
}

// ---------------------------------------------------------------------------
// Reports

inline constexpr int kReportSchema = 1;

struct ReportMeta {
  std::string bundle_hash;
  std::string dataset_hash;
  std::uint64_t seed = 0;
};

struct Report {
  std::optional<Metrics> metrics;
  std::optional<ConfusionMatrix> confusion;
  std::optional<Metrics> location_metrics;
  std::vector<KlMatrix> kl;
  ReportMeta meta;
};

inline json report_to_json(const Report& r) {
  json j;
  j["schema"] = kReportSchema;
  j["metrics"] = json::object();
  if (r.metrics) j["metrics"] = metrics_to_json(*r.metrics);
  if (r.confusion) j["metrics"]["confusion"] = confusion_to_json(*r.confusion);
  if (r.location_metrics) j["metrics"]["location"] = metrics_to_json(*r.location_metrics);
  j["kl"] = json::array();
  for (const auto& k : r.kl) j["kl"].push_back(kl_to_json(k));
  j["meta"] = {{"bundle_hash", r.meta.bundle_hash}, {"dataset_hash", r.meta.dataset_hash}, {"seed", r.meta.seed}};
  return j;
}

inline std::string points_csv(const EmbeddingSet& e) {
  std::ostringstream out;
  out.precision(9);
  out << "x,y,hand_part,location,dynamics\n";
  for (std::size_t i = 0; i < e.points.size(); ++i) {
    const auto& l = e.labels[i];
    out << e.points[i][0] << ',' << e.points[i][1] << ',' << to_string(l.hand_part) << ','
        << to_string(l.location) << ',' << to_string(l.dynamics) << '\n';
  }
  return out.str();
}

/// Writes report.json and, when embeddings are given, points.csv into
/// `dir`. Returns the report path.
inline std::filesystem::path emit_report(const Report& r, const EmbeddingSet* emb, const std::filesystem::path& dir) {
  try {
    std::filesystem::create_directories(dir);
    const auto path = dir / "report.json";
    util::write_text_file(path.string(), report_to_json(r).dump(2) + "\n");
    if (emb) util::write_text_file((dir / "points.csv").string(), points_csv(*emb));
    return path;
  } catch (const std::filesystem::filesystem_error& e) {
    throw std::runtime_error("emit_report: cannot write to '" + dir.string() + "': " + e.what());
  }
}

}  // namespace pgr::eval
