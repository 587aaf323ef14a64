#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "rgk/numerics/grad_check.hpp"
#include "rgk/numerics/ops.hpp"
#include "rgk/numerics/optim.hpp"

using namespace rgk;

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool grad = true, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(shape), std::move(v), grad);
}

std::size_t random_dim(std::mt19937_64& rng) { return std::uniform_int_distribution<std::size_t>(1, 8)(rng); }

// Contracts an op output to a scalar with fixed random weights so every
// output entry receives a distinct upstream gradient.
Tensor contract(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor w = random_tensor(y.shape(), rng, false);
  return sum(mul(y, w));
}

void expect_gradients(const std::function<Tensor()>& f, std::vector<Tensor> params, double tol = 1e-6) {
  auto report = grad_check(f, std::move(params), 1e-5, tol);
  EXPECT_TRUE(report.pass) << "worst " << report.worst << " " << report.failure;
}

}  // namespace

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), std::invalid_argument);
  EXPECT_THROW(Tensor({0, 3}, {}), std::invalid_argument);
}

TEST(Ops, MatmulIdentity) {
  std::mt19937_64 rng(1);
  Tensor a = random_tensor({3, 4}, rng, false);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor out = matmul(eye, a);
  EXPECT_EQ(out.shape(), a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(out[i], a[i]);
}

TEST(Ops, MatmulMatchesTripleLoop) {
  std::mt19937_64 rng(2);
  Tensor a = random_tensor({3, 4}, rng, false);
  Tensor b = random_tensor({4, 2}, rng, false);
  Tensor out = matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a[i * 4 + k] * b[k * 2 + j];
      EXPECT_NEAR(out[i * 2 + j], s, 1e-12);
    }
}

TEST(Ops, MatmulShapeErrorNamesShapes) {
  Tensor a = Tensor::zeros({3, 4});
  Tensor b = Tensor::zeros({3, 2});
  try {
    matmul(a, b);
    FAIL();
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("[3,4]"), std::string::npos);
    EXPECT_NE(msg.find("[3,2]"), std::string::npos);
  }
}

TEST(Ops, AddZeroIsIdentity) {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor({4, 5}, rng, false);
  Tensor y = add(x, Tensor::zeros({4, 5}));
  EXPECT_EQ(y.values(), x.values());
}

TEST(Ops, LeadingAxisBroadcast) {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b({3}, {10, 20, 30});
  Tensor y = add(x, b);
  EXPECT_EQ(y.values(), (std::vector<double>{11, 22, 33, 14, 25, 36}));
  EXPECT_THROW(add(x, Tensor::zeros({2})), std::invalid_argument);
}

TEST(Softmax, UniformRow) {
  Tensor x = Tensor::full({1, 5}, 3.7);
  Tensor y = softmax(x, 1);
  for (double v : y.values()) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(Softmax, ShiftInvariantAndNormalized) {
  std::mt19937_64 rng(4);
  Tensor x = random_tensor({3, 6}, rng, false, -5, 5);
  Tensor y1 = softmax(x, 1);
  Tensor y2 = softmax(add_scalar(x, 123.0), 1);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_GE(y1[r * 6 + c], 0.0);
      EXPECT_NEAR(y1[r * 6 + c], y2[r * 6 + c], 1e-12);
      s += y1[r * 6 + c];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_THROW(softmax(x, 2), std::invalid_argument);
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int axis : {0, 1}) {
    Tensor x = random_tensor({4, 3}, rng);
    expect_gradients([&] { return contract(softmax(x, axis), 11); }, {x});
  }
}

TEST(LayerNorm, ConstantRowMapsToBias) {
  Tensor x = Tensor::full({2, 4}, 1.5);
  Tensor gain = Tensor::full({4}, 1.0);
  Tensor bias({4}, {0.1, -0.2, 0.3, 0.4});
  Tensor y = layer_norm(x, gain, bias, 1e-5);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(y[r * 4 + c], bias[c]);
}

TEST(LayerNorm, NormalizedStatistics) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({5, 16}, rng, false, -3, 7);
  Tensor y = layer_norm(x, Tensor::full({16}, 1.0), Tensor::zeros({16}), 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    double mu = 0, var = 0;
    for (std::size_t c = 0; c < 16; ++c) mu += y[r * 16 + c];
    mu /= 16;
    for (std::size_t c = 0; c < 16; ++c) var += (y[r * 16 + c] - mu) * (y[r * 16 + c] - mu);
    var /= 16;
    EXPECT_NEAR(mu, 0.0, 1e-9);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(LayerNorm, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  Tensor x = random_tensor({3, 6}, rng);
  Tensor gain = random_tensor({6}, rng);
  Tensor bias = random_tensor({6}, rng);
  auto report = grad_check([&] { return contract(layer_norm(x, gain, bias, 1e-5), 3); }, {x, gain, bias}, 1e-5, 1e-5);
  EXPECT_TRUE(report.pass) << report.failure;
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::full({3, 2}, 0.5, true);
  Tape tape;
  TapeScope scope(tape);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwiceInput) {
  std::mt19937_64 rng(8);
  Tensor x = random_tensor({7}, rng);
  Tape tape;
  TapeScope scope(tape);
  backward(sum(mul(x, x)));
  auto g = x.grad();
  for (std::size_t i = 0; i < 7; ++i) EXPECT_DOUBLE_EQ(g[i], 2.0 * x[i]);
}

TEST(Backward, ChainedExpressionMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);
  expect_gradients([&] { return sum(gelu(matmul(a, b))); }, {a, b});
}

TEST(Backward, RejectsNonScalarAndUnrecordedLoss) {
  Tensor x = Tensor::full({2}, 1.0, true);
  Tape tape;
  TapeScope scope(tape);
  EXPECT_THROW(backward(scale(x, 2.0)), std::invalid_argument);
  Tensor c = Tensor::scalar(1.0);
  EXPECT_THROW(backward(c), std::invalid_argument);
}

TEST(Backward, RepeatedCallsAccumulate) {
  Tensor x = Tensor::full({3}, 2.0, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor loss = sum(square(x));
  backward(loss);
  backward(loss);
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 8.0);
}

TEST(Backward, IsLinearInTheLoss) {
  std::mt19937_64 rng(10);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor w = random_tensor({3, 3}, rng);
  auto l1 = [&] { return sum(gelu(matmul(x, w))); };
  auto l2 = [&] { return sum(square(softmax(matmul(x, w), 1))); };
  auto grads = [&](const std::function<Tensor()>& f) {
    x.zero_grad();
    w.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    backward(f());
    auto gx = x.grad();
    auto gw = w.grad();
    gx.insert(gx.end(), gw.begin(), gw.end());
    return gx;
  };
  const double alpha = 0.7, beta = -1.9;
  auto g1 = grads(l1);
  auto g2 = grads(l2);
  auto gc = grads([&] { return add(scale(l1(), alpha), scale(l2(), beta)); });
  for (std::size_t i = 0; i < gc.size(); ++i) EXPECT_NEAR(gc[i], alpha * g1[i] + beta * g2[i], 1e-10);
}

TEST(GradCheck, QuadraticForm) {
  std::mt19937_64 rng(11);
  Tensor A = random_tensor({4, 4}, rng, false);
  Tensor x = random_tensor({4, 1}, rng);
  auto report = grad_check([&] { return sum(mul(x, matmul(A, x))); }, {x}, 1e-5, 1e-8);
  EXPECT_TRUE(report.pass) << report.worst;
  EXPECT_LT(report.worst, 1e-8);
}

TEST(GradCheck, ConstantFunction) {
  Tensor x = Tensor::full({3}, 1.0, true);
  auto report = grad_check([&] { return Tensor::scalar(4.0); }, {x});
  EXPECT_TRUE(report.pass);
  EXPECT_EQ(report.worst, 0.0);
}

TEST(GradCheck, DetectsCorruptedBackwardRule) {
  // square with a deliberately wrong derivative 3x instead of 2x.
  auto bad_square = [](const Tensor& x) {
    std::vector<double> v(x.values());
    for (auto& e : v) e *= e;
    return detail::make_result("bad_square", x.shape(), std::move(v), {&x}, [](Node& self) {
      double* g = detail::input_grad(self, 0);
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * 3.0 * self.inputs[0]->value[i];
    });
  };
  std::mt19937_64 rng(12);
  Tensor x = random_tensor({5}, rng, true, 0.5, 1.5);
  auto report = grad_check([&] { return sum(bad_square(x)); }, {x});
  EXPECT_FALSE(report.pass);
  EXPECT_GT(report.worst, 0.1);
}

TEST(GradCheck, ReportsNonFiniteValues) {
  Tensor x = Tensor::full({2}, 800.0, true);
  auto report = grad_check([&] { return sum(exp(x)); }, {x});
  EXPECT_FALSE(report.pass);
  EXPECT_NE(report.failure.find("non-finite"), std::string::npos);
}

// ---------------------------------------------------------------------------
// Registry-wide properties: forward against naive references and gradients
// against central differences, over several seeds and shapes up to 8 per axis.

struct OpCase {
  const char* name;
  std::function<void(std::mt19937_64&)> run;
};

class OpProperty : public ::testing::TestWithParam<int> {};

TEST_P(OpProperty, ForwardAndGradientAgreeWithReferences) {
  const std::uint64_t seed = static_cast<std::uint64_t>(GetParam());
  std::vector<OpCase> cases = {
      {"add/sub/mul broadcast",
       [](std::mt19937_64& rng) {
         std::size_t m = random_dim(rng), n = random_dim(rng);
         Tensor a = random_tensor({m, n}, rng), b = random_tensor({n}, rng);
         Tensor s = add(a, b), d = sub(a, b), p = mul(a, b);
         for (std::size_t i = 0; i < m; ++i)
           for (std::size_t j = 0; j < n; ++j) {
             EXPECT_NEAR(s[i * n + j], a[i * n + j] + b[j], 1e-12);
             EXPECT_NEAR(d[i * n + j], a[i * n + j] - b[j], 1e-12);
             EXPECT_NEAR(p[i * n + j], a[i * n + j] * b[j], 1e-12);
           }
         expect_gradients([&] { return contract(mul(sub(add(a, b), b), add(a, b)), 1); }, {a, b});
       }},
      {"matmul",
       [](std::mt19937_64& rng) {
         std::size_t m = random_dim(rng), k = random_dim(rng), n = random_dim(rng);
         Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
         Tensor c = matmul(a, b);
         for (std::size_t j = 0; j < n; ++j)
           for (std::size_t i = 0; i < m; ++i) {
             double s = 0;
             for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
             EXPECT_NEAR(c[i * n + j], s, 1e-12);
           }
         expect_gradients([&] { return contract(matmul(a, b), 2); }, {a, b});
       }},
      {"concat/slice/transpose/reshape",
       [](std::mt19937_64& rng) {
         std::size_t m = random_dim(rng), n1 = random_dim(rng), n2 = random_dim(rng);
         Tensor a = random_tensor({m, n1}, rng), b = random_tensor({m, n2}, rng);
         Tensor c = concat({a, b}, 1);
         for (std::size_t i = 0; i < m; ++i) {
           for (std::size_t j = 0; j < n1; ++j) EXPECT_EQ(c[i * (n1 + n2) + j], a[i * n1 + j]);
           for (std::size_t j = 0; j < n2; ++j) EXPECT_EQ(c[i * (n1 + n2) + n1 + j], b[i * n2 + j]);
         }
         Tensor s = slice(c, 1, n1, n2);
         EXPECT_EQ(s.values(), b.values());
         Tensor t = transpose(a);
         for (std::size_t i = 0; i < m; ++i)
           for (std::size_t j = 0; j < n1; ++j) EXPECT_EQ(t[j * m + i], a[i * n1 + j]);
         expect_gradients(
             [&] {
               Tensor cc = concat({a, b}, 1);
               return contract(reshape(transpose(slice(cc, 1, 0, n1 + n2 - 1 > 0 ? n1 + n2 - 1 : 1)),
                                       {(n1 + n2 - 1 > 0 ? n1 + n2 - 1 : 1) * m}),
                               3);
             },
             {a, b});
       }},
      {"gather_rows/segment_max",
       [](std::mt19937_64& rng) {
         std::size_t m = random_dim(rng), n = random_dim(rng), r = random_dim(rng);
         Tensor a = random_tensor({m, n}, rng);
         std::vector<std::size_t> idx(r), seg(r);
         for (auto& i : idx) i = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
         for (auto& s : seg) s = std::uniform_int_distribution<std::size_t>(0, 2)(rng);
         Tensor g = gather_rows(a, idx);
         for (std::size_t i = 0; i < r; ++i)
           for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(g[i * n + j], a[idx[i] * n + j]);
         Tensor b = random_tensor({r, n}, rng);
         Tensor sm = segment_max(b, seg, 3);
         for (std::size_t s = 0; s < 3; ++s)
           for (std::size_t j = 0; j < n; ++j) {
             double best = 0.0;
             bool any = false;
             for (std::size_t i = 0; i < r; ++i)
               if (seg[i] == s) best = any ? std::max(best, b[i * n + j]) : b[i * n + j], any = true;
             EXPECT_EQ(sm[s * n + j], best);
           }
         expect_gradients([&] { return contract(gather_rows(a, idx), 4); }, {a});
         expect_gradients([&] { return contract(segment_max(b, seg, 3), 5); }, {b});
       }},
      {"reductions",
       [](std::mt19937_64& rng) {
         std::size_t m = random_dim(rng), n = random_dim(rng), k = random_dim(rng);
         Tensor a = random_tensor({m, n, k}, rng);
         Tensor sa = sum_axis(a, 1), ma = mean_axis(a, 1), mx = max_axis(a, 1), mn = min_axis(a, 2);
         for (std::size_t i = 0; i < m; ++i)
           for (std::size_t l = 0; l < k; ++l) {
             double s = 0, best = -1e300;
             for (std::size_t j = 0; j < n; ++j) s += a[(i * n + j) * k + l], best = std::max(best, a[(i * n + j) * k + l]);
             EXPECT_NEAR(sa[i * k + l], s, 1e-12);
             EXPECT_NEAR(ma[i * k + l], s / n, 1e-12);
             EXPECT_EQ(mx[i * k + l], best);
           }
         double total = 0;
         for (double v : a.values()) total += v;
         EXPECT_NEAR(sum(a).item(), total, 1e-12);
         EXPECT_NEAR(mean(a).item(), total / a.numel(), 1e-12);
         expect_gradients([&] { return add(contract(sum_axis(a, 0), 5), contract(mean_axis(a, 2), 6)); }, {a});
         expect_gradients([&] { return add(contract(max_axis(a, 1), 7), contract(min_axis(a, 2), 8)); }, {a});
       }},
      {"activations",
       [](std::mt19937_64& rng) {
         std::size_t n = random_dim(rng);
         Tensor x = random_tensor({n, 3}, rng, true, -2, 2);
         Tensor r = relu(x), g = gelu(x), e = exp(x), ab = abs(x), c = clamp(x, -0.5, 0.5);
         for (std::size_t i = 0; i < x.numel(); ++i) {
           double v = x[i];
           EXPECT_EQ(r[i], v > 0 ? v : 0.0);
           EXPECT_NEAR(g[i], 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v))), 1e-12);
           EXPECT_NEAR(e[i], std::exp(v), 1e-12);
           EXPECT_EQ(ab[i], std::fabs(v));
           EXPECT_EQ(c[i], std::min(0.5, std::max(-0.5, v)));
         }
         expect_gradients([&] { return contract(add(add(relu(x), gelu(x)), add(exp(x), abs(x))), 9); }, {x});
       }},
      {"softmax/layer_norm",
       [](std::mt19937_64& rng) {
         std::size_t m = random_dim(rng), n = random_dim(rng) + 1;
         Tensor x = random_tensor({m, n}, rng, true, -3, 3);
         Tensor gain = random_tensor({n}, rng), bias = random_tensor({n}, rng);
         Tensor y = softmax(x, 1);
         for (std::size_t i = 0; i < m; ++i) {
           double z = 0;
           for (std::size_t j = 0; j < n; ++j) z += std::exp(x[i * n + j]);
           for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(y[i * n + j], std::exp(x[i * n + j]) / z, 1e-12);
         }
         Tensor ln = layer_norm(x, gain, bias, 1e-5);
         for (std::size_t i = 0; i < m; ++i) {
           double mu = 0, var = 0;
           for (std::size_t j = 0; j < n; ++j) mu += x[i * n + j] / n;
           for (std::size_t j = 0; j < n; ++j) var += (x[i * n + j] - mu) * (x[i * n + j] - mu) / n;
           for (std::size_t j = 0; j < n; ++j)
             EXPECT_NEAR(ln[i * n + j], (x[i * n + j] - mu) / std::sqrt(var + 1e-5) * gain[j] + bias[j], 1e-12);
         }
         expect_gradients([&] { return contract(softmax(x, 1), 10); }, {x});
         expect_gradients([&] { return contract(layer_norm(x, gain, bias, 1e-5), 11); }, {x, gain, bias});
       }},
      {"distances",
       [](std::mt19937_64& rng) {
         std::size_t n = random_dim(rng), m = random_dim(rng);
         Tensor a = random_tensor({n, 3}, rng), b = random_tensor({m, 3}, rng), c = random_tensor({n, 3}, rng);
         double l1 = 0, l2 = 0;
         for (std::size_t i = 0; i < a.numel(); ++i) l1 += std::fabs(a[i] - c[i]), l2 += (a[i] - c[i]) * (a[i] - c[i]);
         EXPECT_NEAR(l1_distance(a, c).item(), l1 / a.numel(), 1e-12);
         EXPECT_NEAR(sq_l2_distance(a, c).item(), l2, 1e-12);
         Tensor d = pairwise_sq_dist(a, b);
         for (std::size_t i = 0; i < n; ++i)
           for (std::size_t j = 0; j < m; ++j) {
             double s = 0;
             for (int k = 0; k < 3; ++k) s += (a[i * 3 + k] - b[j * 3 + k]) * (a[i * 3 + k] - b[j * 3 + k]);
             EXPECT_NEAR(d[i * m + j], s, 1e-12);
           }
         expect_gradients([&] { return add(l1_distance(a, c), sq_l2_distance(a, c)); }, {a, c});
         expect_gradients([&] { return contract(pairwise_sq_dist(a, b), 12); }, {a, b});
         expect_gradients([&] { return chamfer(a, b); }, {a, b});
       }},
      {"rotation/skinning",
       [](std::mt19937_64& rng) {
         std::size_t n = random_dim(rng);
         Tensor r = random_tensor({n, 3}, rng, true, -2, 2);
         Tensor R = rodrigues(r);
         for (std::size_t i = 0; i < n; ++i) {
           // R R^T = I and R r = r.
           const double* M = R.data() + 9 * i;
           for (int a = 0; a < 3; ++a) {
             for (int b = 0; b < 3; ++b) {
               double s = 0;
               for (int k = 0; k < 3; ++k) s += M[3 * a + k] * M[3 * b + k];
               EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-12);
             }
             double rv = M[3 * a] * r[3 * i] + M[3 * a + 1] * r[3 * i + 1] + M[3 * a + 2] * r[3 * i + 2];
             EXPECT_NEAR(rv, r[3 * i + a], 1e-12);
           }
         }
         expect_gradients([&] { return contract(rodrigues(r), 13); }, {r});
         expect_gradients([&] { return contract(clamp_row_norm(r, 1.5), 14); }, {r});
         std::size_t V = random_dim(rng), J = random_dim(rng);
         std::vector<double> W(V * J), P(V * 3);
         std::uniform_real_distribution<double> u(0, 1);
         for (auto& w : W) w = u(rng);
         for (auto& p : P) p = u(rng) - 0.5;
         Tensor rot = random_tensor({J, 3, 3}, rng), trans = random_tensor({J, 3}, rng);
         Tensor out = blend_skin(W, P, rot, trans);
         for (std::size_t i = 0; i < V; ++i)
           for (int a = 0; a < 3; ++a) {
             double s = 0;
             for (std::size_t j = 0; j < J; ++j) {
               double rp = 0;
               for (int b = 0; b < 3; ++b) rp += rot[9 * j + 3 * a + b] * P[3 * i + b];
               s += W[i * J + j] * (rp + trans[3 * j + a]);
             }
             EXPECT_NEAR(out[3 * i + a], s, 1e-12);
           }
         expect_gradients([&] { return contract(blend_skin(W, P, rot, trans), 15); }, {rot, trans});
       }},
  };
  for (auto& c : cases) {
    SCOPED_TRACE(c.name);
    std::mt19937_64 rng(seed * 7919 + 17);
    c.run(rng);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpProperty, ::testing::Values(1, 2, 3, 4, 5));

TEST(Rodrigues, SmallAngleBranchIsContinuous) {
  Tensor r({2, 3}, {1e-5, -2e-5, 3e-5, 1e-3, -2e-3, 3e-3}, true);
  expect_gradients([&] { return contract(rodrigues(r), 21); }, {r}, 1e-6);
  Tensor z = rodrigues(Tensor::zeros({1, 3}));
  for (int k = 0; k < 9; ++k) EXPECT_EQ(z[k], k % 4 == 0 ? 1.0 : 0.0);
}

TEST(AdamW, MinimizesQuadratic) {
  Tensor x({2, 2}, {3, -2, 1, 4}, true);
  AdamW opt({x}, {.lr = 0.05, .weight_decay = 0.0});
  for (int i = 0; i < 600; ++i) {
    Tape tape;
    TapeScope scope(tape);
    backward(sum(square(x)));
    opt.step();
  }
  for (double v : x.values()) EXPECT_NEAR(v, 0.0, 1e-2);
}

TEST(CosineLr, EndpointsAndMidpoint) {
  EXPECT_DOUBLE_EQ(cosine_lr(5e-4, 0, 100), 5e-4);
  EXPECT_NEAR(cosine_lr(5e-4, 50, 100), 2.5e-4, 1e-15);
  EXPECT_NEAR(cosine_lr(5e-4, 100, 100), 0.0, 1e-18);
}
