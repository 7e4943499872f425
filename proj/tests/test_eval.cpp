#include <filesystem>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "pgr/eval.hpp"

using namespace pgr;
using namespace pgr::eval;

namespace {

ConfusionMatrix cm2(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  ConfusionMatrix m({"kick", "non_kick"});
  m.at(0, 0) = a;
  m.at(0, 1) = b;
  m.at(1, 0) = c;
  m.at(1, 1) = d;
  return m;
}

// Sampling from N(mean, L L^T).
std::vector<EmbeddingPoint> draw(std::mt19937_64& rng, const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov,
                                 std::size_t n) {
  const Eigen::Matrix2d L = cov.llt().matrixL();
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<EmbeddingPoint> out(n);
  for (auto& p : out) {
    const Eigen::Vector2d z(g(rng), g(rng));
    const Eigen::Vector2d x = mean + L * z;
    p = {x(0), x(1)};
  }
  return out;
}

double log_density(const GaussianFit& g, const Eigen::Vector2d& x) {
  const Eigen::Vector2d d = x - g.mean;
  return -0.5 * d.dot(g.cov.inverse() * d) - 0.5 * std::log(g.cov.determinant()) - std::log(2.0 * std::numbers::pi);
}

std::string slurp(const std::filesystem::path& p) {
  const auto b = util::read_file(p.string());
  return {b.begin(), b.end()};
}

GaussianFit gaussian(double mx, double my, double sxx, double sxy, double syy) {
  GaussianFit g;
  g.mean = {mx, my};
  g.cov << sxx, sxy, sxy, syy;
  return g;
}

}  // namespace

TEST(Metrics, DiagonalIsPerfect) {
  const auto m = metrics(cm2(30, 0, 0, 70));
  EXPECT_DOUBLE_EQ(m.weighted_f, 1.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
  EXPECT_FALSE(m.recall_only);
  for (const auto& k : m.per_class) EXPECT_DOUBLE_EQ(k.f, 1.0);
}

TEST(Metrics, SymmetricConfusion) {
  const auto m = metrics(cm2(40, 10, 10, 40));
  for (const auto& k : m.per_class) {
    EXPECT_DOUBLE_EQ(k.precision, 0.8);
    EXPECT_DOUBLE_EQ(k.recall, 0.8);
    EXPECT_DOUBLE_EQ(k.f, 0.8);
    EXPECT_EQ(k.support, 50u);
  }
  EXPECT_DOUBLE_EQ(m.weighted_f, 0.8);
}

TEST(Metrics, SingleClassTruthIsRecallOnly) {
  const auto m = metrics(cm2(45, 5, 0, 0));
  EXPECT_TRUE(m.recall_only);
  EXPECT_DOUBLE_EQ(m.per_class[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(m.per_class[0].recall, 0.9);
  EXPECT_DOUBLE_EQ(m.per_class[1].precision, 0.0);
  EXPECT_DOUBLE_EQ(m.per_class[1].f, 0.0);
  EXPECT_NEAR(m.weighted_recall, 0.9, 1e-12);
}

TEST(Metrics, WeightedMeanAndZeroDivision) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    ConfusionMatrix cm({"a", "b", "c", "d"});
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t p = 0; p < 4; ++p) cm.at(t, p) = rng() % 3 == 0 ? 0 : rng() % 20;
    }
    const auto m = metrics(cm);
    double f = 0, n = 0;
    for (const auto& k : m.per_class) {
      f += k.f * k.support;
      n += k.support;
      EXPECT_TRUE(std::isfinite(k.precision) && std::isfinite(k.recall) && std::isfinite(k.f));
      EXPECT_GE(k.f, 0.0);
      EXPECT_LE(k.f, 1.0);
    }
    EXPECT_NEAR(m.weighted_f, n ? f / n : 0.0, 1e-12);
  }
  ConfusionMatrix empty({"a", "b"});
  const auto m = metrics(empty);
  EXPECT_EQ(m.weighted_f, 0.0);
  EXPECT_EQ(m.accuracy, 0.0);
}

TEST(Pca, PlanarDataReconstructsExactly) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd u(6), v(6), o(6);
  u << 1, 2, 0, -1, 0.5, 0;
  v << 0, 1, 1, 1, -2, 3;
  o << 3, -1, 2, 0, 0, 1;
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = o + 3.0 * g(rng) * u + g(rng) * v;
    xs.emplace_back(x.data(), x.data() + 6);
  }
  const auto b = pca_fit(xs);
  EXPECT_NEAR(b.explained_ratio[0] + b.explained_ratio[1], 1.0, 1e-9);
  for (const auto& x : xs) {
    const auto r = pca_reconstruct(b, pca_project(b, x));
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(r[k], x[k], 1e-9);
  }
  const Eigen::MatrixXd gram = b.components * b.components.transpose();
  EXPECT_LT((gram - Eigen::Matrix2d::Identity()).norm(), 1e-12);
  // Idempotent on its own reconstructions and the sign rule holds.
  const auto p = pca_project(b, xs[0]);
  const auto q = pca_project(b, pca_reconstruct(b, p));
  EXPECT_NEAR(p[0], q[0], 1e-9);
  EXPECT_NEAR(p[1], q[1], 1e-9);
  for (int k = 0; k < 2; ++k) {
    Eigen::Index arg = 0;
    b.components.row(k).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(b.components(k, arg), 0.0);
  }
}

TEST(Pca, IsotropicRatios) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> xs(20000, std::vector<double>(4));
  for (auto& x : xs) {
    for (auto& v : x) v = g(rng);
  }
  const auto b = pca_fit(xs);
  EXPECT_NEAR(b.explained_ratio[0], 0.25, 0.025);
  EXPECT_NEAR(b.explained_ratio[1], 0.25, 0.025);
  EXPECT_GE(b.explained_variance[0], b.explained_variance[1]);
}

TEST(Pca, TooFewPoints) {
  EXPECT_THROW(pca_fit({{1, 2}, {3, 4}}), FitError);
  EXPECT_THROW(pca_fit({{1}, {2}, {3}}), FitError);
}

TEST(Gaussian, FitBasics) {
  const std::vector<EmbeddingPoint> tri{{0, 0}, {3, 0}, {0, 3}};
  const auto g = fit_gaussian(tri);
  EXPECT_NEAR(g.mean(0), 1.0, 1e-12);
  EXPECT_NEAR(g.mean(1), 1.0, 1e-12);
  EXPECT_NEAR(g.cov(0, 0), 3.0 + kRidge, 1e-12);
  EXPECT_NEAR(g.cov(0, 1), -1.5, 1e-12);

  const std::vector<EmbeddingPoint> line{{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  const auto c = fit_gaussian(line);
  EXPECT_GT(c.cov.determinant(), 0.0);
  EXPECT_NO_THROW(kl_gaussian(c, c));
  EXPECT_THROW(fit_gaussian(std::vector<EmbeddingPoint>{{0, 0}, {1, 1}}), FitError);

  std::mt19937_64 rng(4);
  const auto truth = gaussian(2.0, -1.0, 2.0, 0.6, 0.5);
  const auto pts = draw(rng, truth.mean, truth.cov, 10000);
  const auto f = fit_gaussian(pts);
  EXPECT_LT((f.mean - truth.mean).norm(), 0.05);
  EXPECT_LT((f.cov - truth.cov).norm(), 0.08);
}

TEST(Gaussian, KlClosedFormCases) {
  const auto a = gaussian(0, 0, 1, 0, 1);
  const auto b = gaussian(1, 0, 1, 0, 1);
  EXPECT_LE(kl_gaussian(a, a), 1e-12);
  EXPECT_NEAR(kl_gaussian(b, a), 0.5, 1e-12);
  const auto wide = gaussian(0, 0, 4, 0, 4);
  // KL(a||wide) = 0.5 (tr/4*2 - 2 + ln 16) ; asymmetric in general.
  EXPECT_NEAR(kl_gaussian(a, wide), 0.5 * (0.5 - 2.0 + std::log(16.0)), 1e-12);
  EXPECT_GT(std::abs(kl_gaussian(a, wide) - kl_gaussian(wide, a)), 0.1);

  GaussianFit bad = a;
  bad.cov.setZero();
  EXPECT_THROW(kl_gaussian(a, bad), NumericError);
}

TEST(Gaussian, KlMatchesMonteCarlo) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    auto rand_fit = [&] {
      const double sx = 0.5 + std::abs(u(rng)), sy = 0.5 + std::abs(u(rng)), r = 0.6 * u(rng);
      return gaussian(u(rng), u(rng), sx * sx, r * sx * sy, sy * sy);
    };
    const auto a = rand_fit(), b = rand_fit();
    const auto xs = draw(rng, a.mean, a.cov, 100000);
    double acc = 0;
    for (const auto& x : xs) {
      const Eigen::Vector2d v(x[0], x[1]);
      acc += log_density(a, v) - log_density(b, v);
    }
    const double mc = acc / xs.size();
    const double exact = kl_gaussian(a, b);
    EXPECT_NEAR(mc, exact, std::max(0.05 * exact, 0.01)) << rep;
  }
}

namespace {

EmbeddingSet dynamics_ladder(std::mt19937_64& rng, double step) {
  EmbeddingSet e;
  for (std::size_t d = 0; d < 4; ++d) {
    const auto pts = draw(rng, Eigen::Vector2d(step * d, 0.0), Eigen::Matrix2d::Identity(), 200);
    for (const auto& p : pts) {
      HitLabel l;
      l.hand_part = HandPart::fingers;
      l.dynamics = kDynamics[d];
      e.points.push_back(p);
      e.labels.push_back(l);
    }
  }
  return e;
}

}  // namespace

TEST(KlMatrixTest, SingleValueAndMissing) {
  EmbeddingSet e;
  for (int i = 0; i < 5; ++i) {
    e.points.push_back({double(i), double(i * i)});
    e.labels.push_back({});
  }
  auto k = kl_matrix(e, Facet::dynamics);
  ASSERT_EQ(k.labels, std::vector<std::string>{"f"});
  ASSERT_EQ(k.matrix.size(), 1u);
  EXPECT_EQ(k.matrix[0][0], 0.0);
  EXPECT_FALSE(k.max_off_diagonal().has_value());

  HitLabel p;
  p.dynamics = Dynamics::p;
  e.points.push_back({0.0, 0.0});
  e.labels.push_back(p);
  k = kl_matrix(e, Facet::dynamics);
  EXPECT_EQ(k.labels, (std::vector<std::string>{"p", "f"}));
  EXPECT_EQ(k.missing, std::vector<std::string>{"p"});
  EXPECT_EQ(k.counts, (std::vector<std::size_t>{1, 5}));
  EXPECT_FALSE(k.matrix[0][1].has_value());
  EXPECT_FALSE(k.matrix[1][0].has_value());
}

TEST(KlMatrixTest, OrderingFollowsSeparation) {
  std::mt19937_64 rng(6);
  const auto e = dynamics_ladder(rng, 1.0);
  const auto k = kl_matrix(e, Facet::dynamics);
  ASSERT_EQ(k.labels.size(), 4u);
  for (std::size_t j = 2; j < 4; ++j) EXPECT_GT(*k.matrix[0][j], *k.matrix[0][j - 1]);
  EXPECT_NEAR(*k.max_off_diagonal(), *k.matrix[0][3] > *k.matrix[3][0] ? *k.matrix[0][3] : *k.matrix[3][0], 1e-12);

  // Row order of the inputs does not matter.
  EmbeddingSet shuffled = e;
  std::vector<std::size_t> perm(e.points.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.points[i] = e.points[perm[i]];
    shuffled.labels[i] = e.labels[perm[i]];
  }
  const auto s = kl_matrix(shuffled, Facet::dynamics);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(*s.matrix[i][j], *k.matrix[i][j], 1e-9);
  }

  const auto none = kl_matrix(e, Facet::dynamics, [](const HitLabel& l) { return l.is_kick(); });
  EXPECT_TRUE(none.labels.empty());
}

TEST(Report, EmptyAndStable) {
  Report r;
  const auto j = report_to_json(r);
  EXPECT_EQ(j["schema"], kReportSchema);
  EXPECT_TRUE(j["metrics"].is_object());
  EXPECT_TRUE(j["kl"].empty());

  std::mt19937_64 rng(7);
  r.metrics = metrics(cm2(40, 10, 10, 40));
  r.confusion = cm2(40, 10, 10, 40);
  const auto e = dynamics_ladder(rng, 2.0);
  r.kl.push_back(kl_matrix(e, Facet::dynamics));
  r.meta = {"abc", "def", 3};
  const auto text = report_to_json(r).dump(2);
  EXPECT_EQ(report_to_json(r).dump(2), text);
  const auto back = json::parse(text);
  EXPECT_EQ(back["metrics"]["confusion"]["counts"][0][1], 10);
  EXPECT_EQ(back["kl"][0]["labels"].size(), 4u);
  EXPECT_EQ(back["meta"]["seed"], 3);

  const auto dir = std::filesystem::temp_directory_path() / "pgr_test_eval_report";
  std::filesystem::remove_all(dir);
  const auto path = emit_report(r, &e, dir);
  EXPECT_EQ(slurp(path), text + "\n");
  const auto csv = slurp(dir / "points.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,y,hand_part,location,dynamics");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 801);
  std::filesystem::remove_all(dir);
}
