#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "pgr/nn/adam.hpp"
#include "pgr/nn/sequential.hpp"

using namespace pgr;
using namespace pgr::nn;

namespace {

// Nested-loop cross-correlation, written without the layer kernels.
std::vector<double> conv1d_oracle(const std::vector<double>& x, std::size_t C, std::size_t L, const std::vector<double>& w,
                                  const std::vector<double>& b, std::size_t O, std::size_t K, std::size_t stride,
                                  std::size_t pad) {
  const std::size_t Lo = (L + 2 * pad - K) / stride + 1;
  std::vector<double> y(O * Lo);
  for (std::size_t o = 0; o < O; ++o) {
    for (std::size_t t = 0; t < Lo; ++t) {
      double acc = b[o];
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t k = 0; k < K; ++k) {
          const auto pos = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(pad);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(L)) continue;
          acc += w[(o * C + c) * K + k] * x[c * L + static_cast<std::size_t>(pos)];
        }
      }
      y[o * Lo + t] = acc;
    }
  }
  return y;
}

}  // namespace

TEST(Conv1d, IdentityKernel) {
  const auto s = LayerSpec::conv1d(1, 1, 1);
  Tensor<double> in({1, 4}, std::vector<double>{1, -2, 3, 4});
  const auto out = conv1d_forward(in, s, Tensor<double>({1, 1, 1}, std::vector<double>{1.0}), Tensor<double>({1}, 0.0));
  EXPECT_EQ(out.values, in.values);
}

TEST(Conv1d, AdjacentSums) {
  const auto s = LayerSpec::conv1d(1, 1, 2);
  Tensor<double> in({1, 4}, std::vector<double>{1, 2, 3, 4});
  const auto out = conv1d_forward(in, s, Tensor<double>({1, 1, 2}, std::vector<double>{1, 1}), Tensor<double>({1}, 0.0));
  EXPECT_EQ(out.values, (std::vector<double>{3, 5, 7}));
  EXPECT_EQ(out.shape, (Shape{1, 3}));
}

TEST(Conv1d, RandomCasesMatchOracle) {
  Rng rng(21);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t C = gradcheck::pick(rng, 1, 4), O = gradcheck::pick(rng, 1, 4), K = gradcheck::pick(rng, 1, 5);
    const std::size_t st = gradcheck::pick(rng, 1, 3), pad = gradcheck::pick(rng, 0, 2), L = K + gradcheck::pick(rng, 0, 10);
    const auto s = LayerSpec::conv1d(C, O, K, st, pad);
    std::vector<double> x(C * L), w(O * C * K), b(O);
    gradcheck::fill(x, rng);
    gradcheck::fill(w, rng);
    gradcheck::fill(b, rng);
    const auto y = conv1d_forward(Tensor<double>({C, L}, x), s, Tensor<double>({O, C, K}, w), Tensor<double>({O}, b));
    const auto ref = conv1d_oracle(x, C, L, w, b, O, K, st, pad);
    ASSERT_EQ(y.size(), ref.size());
    EXPECT_EQ(y.shape[1], (L + 2 * pad - K) / st + 1);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

TEST(Conv1d, ShapeMismatchThrows) {
  const auto s = LayerSpec::conv1d(2, 1, 3);
  EXPECT_THROW(conv1d_forward(Tensor<double>({1, 8}), s, Tensor<double>({1, 2, 3}), Tensor<double>({1})),
               std::invalid_argument);
  EXPECT_THROW(conv1d_forward(Tensor<double>({2, 2}), s, Tensor<double>({1, 2, 3}), Tensor<double>({1})),
               std::invalid_argument);
  EXPECT_THROW(conv1d_forward(Tensor<double>({2, 8}), s, Tensor<double>({1, 2, 2}), Tensor<double>({1})),
               std::invalid_argument);
}

TEST(Layers, ReluDenseFlatten) {
  EXPECT_EQ(relu(Tensor<double>({3}, std::vector<double>{-1, 0, 2})).values, (std::vector<double>{0, 0, 2}));
  const auto d = LayerSpec::dense(3, 3);
  Tensor<double> eye({3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor<double> x({3}, std::vector<double>{0.5, -1.5, 2.0});
  EXPECT_EQ(forward(d, x, eye, Tensor<double>({3}, 0.0)).values, x.values);
  const auto f = forward(LayerSpec::flatten(), Tensor<double>({2, 3}, 1.0));
  EXPECT_EQ(f.shape, (Shape{6}));
}

TEST(Layers, TransposedConvRestoresVaeLengths) {
  // Encoder lengths 64 -> 30 -> 13 -> 5 and their mirrored decoder stages.
  const std::array<std::size_t, 3> k{6, 5, 5};
  std::vector<std::size_t> lens{64};
  for (auto kk : k) lens.push_back(conv_out_len(lens.back(), kk, 2, 0));
  EXPECT_EQ(lens, (std::vector<std::size_t>{64, 30, 13, 5}));
  const auto m = models::build_network<double>(models::ArchitectureId::perc_vae, {2, 0, 2}, 1);
  std::vector<std::size_t> dec_lens;
  for (const auto& sh : m.decoder.shapes()) {
    if (sh.size() == 2) dec_lens.push_back(sh[1]);
  }
  EXPECT_EQ(dec_lens, (std::vector<std::size_t>{5, 13, 13, 30, 30, 64}));
  EXPECT_EQ(m.decoder.output_shape(), m.encoder.input_shape());
}

TEST(Backward, ZeroUpstreamAndReluMask) {
  Sequential<double> net({4}, {LayerSpec::dense(4, 3), LayerSpec::relu(), LayerSpec::dense(3, 2)});
  Rng rng(5);
  net.init_glorot(rng);
  SequentialWorkspace<double> ws(net);
  SequentialGrads<double> g(net);
  std::vector<double> x{0.1, -0.2, 0.3, 0.4};
  EXPECT_THROW(backward<double>(net, ws, std::vector<double>{1.0, 1.0}, g), std::logic_error);
  forward<double>(net, x, ws);
  g.zero();
  backward<double>(net, ws, std::vector<double>{0.0, 0.0}, g);
  for (auto v : g.views(net)) {
    for (double d : v) EXPECT_EQ(d, 0.0);
  }
  std::vector<double> in{-1.0, 2.0}, din(2);
  layer_backward<double>(LayerSpec::relu(), {2}, {2}, in, {}, std::vector<double>{5.0, 5.0}, {}, {}, din);
  EXPECT_EQ(din[0], 0.0);
  EXPECT_EQ(din[1], 5.0);
}

TEST(GradCheck, TwoLayerToyNet) {
  Sequential<double> net({3, 8}, {LayerSpec::conv1d(3, 4, 3, 2), LayerSpec::relu(), LayerSpec::flatten(),
                                  LayerSpec::dense(12, 2)});
  Rng rng(6);
  net.init_glorot(rng);
  std::vector<double> x(24), r{0.7, -1.3};
  gradcheck::fill(x, rng);
  SequentialWorkspace<double> ws(net);
  SequentialGrads<double> g(net);
  g.zero();
  forward<double>(net, x, ws);
  backward<double>(net, ws, r, g);
  auto f = [&] {
    SequentialWorkspace<double> w2(net);
    const auto y = forward<double>(net, x, w2);
    return r[0] * y[0] + r[1] * y[1];
  };
  gradcheck::Stats st;
  auto params = net.parameter_views();
  auto grads = g.views(net);
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t k = 0; k < params[t].size(); ++k) gradcheck::compare(st, "toy", grads[t][k], f, params[t][k]);
  }
  EXPECT_EQ(st.failures, 0u) << st.first_failure;
  EXPECT_GT(st.entries, 50u);
}

TEST(GradCheck, RandomizedLayersAndLosses) {
  const auto res = gradcheck::run_suite(99, 8, 5, 1);
  for (const auto& [name, st] : res.groups) EXPECT_EQ(st.failures, 0u) << name << ": " << st.first_failure;
}

TEST(Losses, Examples) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-12);
  std::vector<double> onehot{0.0, 1.0, 0.0, 0.0};
  EXPECT_LE(ce_loss<double>(onehot, 1), 1e-6);
  EXPECT_THROW(ce_loss<double>(onehot, 4), std::invalid_argument);
  EXPECT_THROW(bce_loss(0.5, 2), std::invalid_argument);
  std::vector<double> x{1.0, -2.0, 3.5};
  EXPECT_EQ(mse_loss<double>(x, x), 0.0);
  std::vector<double> y{0.0, 0.0, 0.5};
  EXPECT_NEAR(mse_loss<double>(x, y), (1.0 + 4.0 + 9.0) / 3.0, 1e-12);
  EXPECT_NEAR(mse_loss<double>(x, y, Reduction::sum), 14.0, 1e-12);
  std::vector<double> p{0.5, 0.25}, pbatch{0.2, 0.8, 0.6, 0.4};
  std::vector<int> tb{1, 0};
  EXPECT_NEAR(bce_loss<double>(p, tb), (std::log(2.0) - std::log(0.75)) / 2.0, 1e-12);
  std::vector<std::size_t> tc{1, 0};
  EXPECT_NEAR(ce_loss<double>(pbatch, 2, tc), -(std::log(0.8) + std::log(0.6)) / 2.0, 1e-12);
}

TEST(Kld, ExamplesAndOracle) {
  EXPECT_EQ(kld_gaussian_standard<double>(std::vector<double>{0, 0}, std::vector<double>{0, 0}), 0.0);
  EXPECT_NEAR(kld_gaussian_standard<double>(std::vector<double>{1, 0}, std::vector<double>{0, 0}), 0.5, 1e-15);
  Rng rng(7);
  std::normal_distribution<double> g(0.0, 2.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> mu{g(rng), g(rng)}, lv{g(rng), g(rng)};
    double oracle = 0;
    for (int d = 0; d < 2; ++d) oracle += 0.5 * (mu[d] * mu[d] + std::exp(lv[d]) - 1.0 - lv[d]);
    const double k = kld_gaussian_standard<double>(mu, lv);
    EXPECT_NEAR(k, oracle, 1e-12 * (1.0 + oracle));
    EXPECT_GE(k, 0.0);
  }
}

TEST(Reparameterize, Limits) {
  std::vector<double> mu{1.0, 2.0}, z(2);
  reparameterize<double>(mu, std::vector<double>{-80, -80}, std::vector<double>{1.5, -2.0}, z);
  EXPECT_NEAR(z[0], 1.0, 1e-12);
  EXPECT_NEAR(z[1], 2.0, 1e-12);
  reparameterize<double>(mu, std::vector<double>{0.7, -0.3}, std::vector<double>{0, 0}, z);
  EXPECT_EQ(z, mu);
}

TEST(Reparameterize, MonteCarloMoments) {
  Rng rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> mu{1.0, 2.0}, lv{0.0, 0.0}, z(2), n(2);
  const int N = 100000;
  std::array<double, 2> s{}, s2{};
  for (int i = 0; i < N; ++i) {
    n = {g(rng), g(rng)};
    reparameterize<double>(mu, lv, n, z);
    for (int d = 0; d < 2; ++d) {
      s[d] += z[d];
      s2[d] += z[d] * z[d];
    }
  }
  for (int d = 0; d < 2; ++d) {
    const double m = s[d] / N, v = s2[d] / N - m * m;
    EXPECT_NEAR(m, mu[d], 0.02);
    EXPECT_NEAR(v, 1.0, 0.05);
  }
}

TEST(Adam, Examples) {
  std::vector<double> p{0.5}, g{0.0};
  AdamState<double> st;
  std::vector<std::span<double>> pv{p}, gv{g};
  adam_step<double>(pv, gv, st);
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(st.step_count, 1u);

  std::vector<double> q{0.0}, h{1.0};
  AdamState<double> st2;
  std::vector<std::span<double>> qv{q}, hv{h};
  adam_step<double>(qv, hv, st2);
  // m_hat = 1, v_hat = 1 after bias correction.
  EXPECT_NEAR(q[0], -1e-3 / (1.0 + 1e-8), 1e-15);

  std::vector<double> theta{0.0}, grad{0.0};
  AdamState<double> st3;
  st3.lr = 0.05;
  std::vector<std::span<double>> tv{theta}, dv{grad};
  for (int i = 0; i < 200; ++i) {
    grad[0] = 2.0 * (theta[0] - 3.0);
    adam_step<double>(tv, dv, st3);
  }
  EXPECT_LT(std::abs(theta[0] - 3.0), 0.5);

  std::vector<double> bad(2);
  std::vector<std::span<double>> bv{bad};
  EXPECT_THROW(adam_step<double>(bv, hv, st2), std::invalid_argument);
}

TEST(Training, DeterministicAndDecreasesBce) {
  // Two linearly separable blobs; a tiny dense net trained with Adam.
  auto run = [](std::uint64_t seed, std::vector<double>& losses) {
    Sequential<float> net({2}, {LayerSpec::dense(2, 2)});
    Rng rng(seed);
    net.init_glorot(rng);
    std::vector<float> xs;
    std::vector<int> ys;
    std::normal_distribution<float> g(0.0f, 0.3f);
    for (int i = 0; i < 64; ++i) {
      const int y = i % 2;
      xs.push_back((y ? 1.0f : -1.0f) + g(rng));
      xs.push_back((y ? 1.0f : -1.0f) + g(rng));
      ys.push_back(y);
    }
    SequentialWorkspace<float> ws(net);
    SequentialGrads<float> grads(net);
    AdamState<float> st;
    st.lr = 1e-2;
    std::vector<float> probs(2), dl(2);
    for (int step = 0; step <= 50; ++step) {
      grads.zero();
      double loss = 0;
      for (int i = 0; i < 64; ++i) {
        const auto out = forward<float>(net, std::span<const float>(xs).subspan(2 * i, 2), ws);
        softmax<float>(out, probs);
        loss += bce_loss<float>(probs[1], ys[i]);
        ce_softmax_grad<float>(probs, static_cast<std::size_t>(ys[i]), 1.0f / 64, dl);
        backward<float>(net, ws, dl, grads, false);
      }
      losses.push_back(loss / 64);
      if (step < 50) adam_step<float>(net.parameter_views(), grads.views(net), st);
    }
    return net;
  };
  std::vector<double> l1, l2;
  const auto a = run(42, l1), b = run(42, l2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.weight(i).values, b.weight(i).values);
    EXPECT_EQ(a.bias(i).values, b.bias(i).values);
  }
  EXPECT_LE(l1.back(), 0.5 * l1.front());
}

TEST(Tensor, Invariants) {
  EXPECT_THROW(Tensor<double>({2, 2}, std::vector<double>{1, 2, 3}), std::invalid_argument);
  Tensor<double> t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_TRUE(t.all_finite());
  t[1] = NAN;
  EXPECT_FALSE(t.all_finite());
}
