#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "rgk/model/network.hpp"
#include "rgk/numerics/grad_check.hpp"

using namespace rgk;

namespace {

const HandModel& hand() {
  static const HandModel h = make_stand_in_hand();
  return h;
}

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

PatchSet random_patches(std::uint64_t seed, std::size_t n, std::size_t g, std::size_t s) {
  std::mt19937_64 rng(seed);
  PointCloud cloud{oracle::random_points(rng, n, 0.05)};
  return group_patches(cloud, g, s, seed);
}

HandParams near_pose(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  HandParams p;
  for (auto& v : p.values) v = u(rng);
  p.set_translation({0.0, -0.08, 0.0});
  return p;
}

std::vector<std::uint8_t> first_ones(std::size_t g, std::size_t r) {
  std::vector<std::uint8_t> m(g, 0);
  std::fill_n(m.begin(), r, 1);
  return m;
}

TrainExample toy_example(const ModelConfig& c, std::uint64_t seed) {
  PatchSet ps = random_patches(seed, c.N, c.G, c.S);
  return make_train_example(c, hand(), ps, first_ones(c.G, c.R), near_pose(seed + 1), seed);
}

void expect_same(const Tensor& a, const Tensor& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a[i], b[i]) << "entry " << i;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(ModelConfig, DefaultsAndValidation) {
  ModelConfig c;
  EXPECT_EQ(c.G, 128u);
  EXPECT_EQ(c.S, 32u);
  EXPECT_EQ(c.R, 16u);
  EXPECT_EQ(c.B_hoi, 3u);
  EXPECT_DOUBLE_EQ(c.mask_ratio, 0.6);
  EXPECT_DOUBLE_EQ(c.lr, 5e-4);
  EXPECT_EQ(c.samples_per_region, 20u);
  EXPECT_NO_THROW(c.validate());
  c.heads = 3;
  EXPECT_THROW(c.validate(), UsageError);
  EXPECT_NO_THROW(ModelConfig::toy().validate());
}

TEST(ModelConfig, JsonMergeRejectsUnknownKeys) {
  ModelConfig c = merge_config(ModelConfig::toy(), nlohmann::json{{"d", 32}, {"lambda_kld", 0.1}});
  EXPECT_EQ(c.d, 32u);
  EXPECT_EQ(c.G, 8u);
  EXPECT_DOUBLE_EQ(c.lambda_kld, 0.1);
  EXPECT_THROW(merge_config(c, nlohmann::json{{"depth", 3}}), UsageError);
  EXPECT_THROW(merge_config(c, nlohmann::json{{"d", "wide"}}), UsageError);
}

TEST(Params, InitIsPerNameAndCheckpointRoundTrips) {
  ModelConfig c = ModelConfig::toy();
  ParamStore a = init_cvae(c, 7), b = init_cvae(c, 7), other = init_cvae(c, 8);
  ASSERT_EQ(a.names(), b.names());
  for (std::size_t i = 0; i < a.size(); ++i) expect_same(a.tensors()[i], b.tensors()[i]);
  EXPECT_GT(max_abs_diff(a.get("oenc.block0.attn.q.w"), other.get("oenc.block0.attn.q.w")), 0.0);

  a.quantize_f32();
  Container box;
  a.store(box);
  ParamStore loaded = init_cvae(c, 99);
  EXPECT_EQ(loaded.load(box), a.size());
  for (std::size_t i = 0; i < a.size(); ++i) expect_same(a.tensors()[i], loaded.tensors()[i]);

  ModelConfig wider = c;
  wider.d = 32;
  ParamStore mismatched = init_cvae(wider, 1);
  EXPECT_THROW(mismatched.load(box), DataError);
}

TEST(PatchEmbed, ShapeAndErrors) {
  ModelConfig c = ModelConfig::toy();
  c.G = 128;
  c.S = 8;
  c.N = 512;
  c.d = 64;
  ParamStore P(1);
  declare_patch_embed(P, "e", c);
  PatchInput in = make_patch_input(random_patches(3, c.N, c.G, c.S), c.coord_scale);
  Tensor tok = patch_embed(P, "e", in);
  EXPECT_EQ(tok.shape(), (Shape{128, 64}));
  in.S = 4;
  EXPECT_THROW(patch_embed(P, "e", in), std::invalid_argument);
}

TEST(PatchEmbed, PermutingPointsWithinPatchLeavesTokenUnchanged) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(2);
  declare_patch_embed(P, "e", c);
  PatchSet ps = random_patches(4, 64, c.G, c.S);
  PatchInput in = make_patch_input(ps, c.coord_scale);
  Tensor base = patch_embed(P, "e", in);
  std::mt19937_64 rng(5);
  for (std::size_t g = 0; g < ps.G; ++g)
    std::shuffle(ps.patches.begin() + g * ps.S, ps.patches.begin() + (g + 1) * ps.S, rng);
  expect_same(base, patch_embed(P, "e", make_patch_input(ps, c.coord_scale)));
}

TEST(PatchEmbed, CenterOnlyEntersThroughPositionalTerm) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(3);
  declare_patch_embed(P, "e", c);
  PatchSet ps = random_patches(6, 64, c.G, c.S);
  // Patch 1 gets patch 0's local points with its own center.
  for (std::size_t s = 0; s < ps.S; ++s) ps.patches[ps.S + s] = ps.patches[s];
  PatchInput in = make_patch_input(ps, c.coord_scale);
  Tensor tok = patch_embed(P, "e", in);
  ASSERT_GT(std::fabs(tok[0] - tok[c.d]), 0.0);
  Tensor feat = patch_features(P, "e", in);
  for (std::size_t k = 0; k < c.d; ++k) EXPECT_EQ(feat[k], feat[c.d + k]);
  Tensor pos = nn::linear(P, "e.pos", in.centers);
  for (std::size_t k = 0; k < c.d; ++k)
    EXPECT_NEAR(tok[k] - tok[c.d + k], pos[k] - pos[c.d + k], 1e-12);
}

TEST(Encoders, ZeroDepthIsIdentityAndShapeIsKept) {
  ModelConfig c = ModelConfig::toy();
  std::mt19937_64 rng(7);
  Tensor x = random_tensor(rng, {c.G, c.d});
  c.B_o = 0;
  c.B_h = 0;
  ParamStore empty(1);
  expect_same(o_enc(empty, c, x), x);
  expect_same(h_enc(empty, c, x), x);
  c.B_o = 2;
  ParamStore P(1);
  nn::declare_stack(P, "oenc", c.B_o, c.d, c.ffn_ratio);
  EXPECT_EQ(o_enc(P, c, x).shape(), x.shape());
}

TEST(Encoders, GradientThroughTwoBlocks) {
  ModelConfig c = ModelConfig::toy();
  c.B_o = 2;
  ParamStore P(11);
  nn::declare_stack(P, "oenc", c.B_o, c.d, c.ffn_ratio);
  std::mt19937_64 rng(8);
  Tensor x = random_tensor(rng, {c.G, c.d});
  x.set_requires_grad(true);
  Tensor coeff = random_tensor(rng, {c.G, c.d});
  std::vector<Tensor> params = P.tensors();
  params.push_back(x);
  auto report = grad_check([&] { return sum(mul(o_enc(P, c, x), coeff)); }, params, 1e-5, 1e-4,
                           {.probes_per_param = 6, .seed = 1});
  EXPECT_TRUE(report.pass) << report.worst << " " << report.failure;
}

TEST(Encoders, HandEncoderGradientThroughOneBlock) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(12);
  nn::declare_stack(P, "henc", c.B_h, c.d, c.ffn_ratio);
  std::mt19937_64 rng(9);
  Tensor x = random_tensor(rng, {c.G_h, c.d});
  Tensor coeff = random_tensor(rng, {c.G_h, c.d});
  auto report = grad_check([&] { return sum(mul(h_enc(P, c, x), coeff)); }, P.tensors(), 1e-5, 1e-4);
  EXPECT_TRUE(report.pass) << report.worst << " " << report.failure;
}

TEST(ConditionEncoder, ZeroMaskIsRejected) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(1);
  nn::declare_mlp(P, "cond", c.d, c.d_c, c.d_c);
  std::mt19937_64 rng(10);
  Tensor tok = random_tensor(rng, {c.G, c.d});
  EXPECT_THROW(condition_encode(P, tok, std::vector<std::uint8_t>(c.G, 0)), std::invalid_argument);
  EXPECT_THROW(condition_encode(P, tok, std::vector<std::uint8_t>(c.G - 1, 1)), std::invalid_argument);
  EXPECT_EQ(condition_encode(P, tok, first_ones(c.G, 1)).shape(), (Shape{1, c.d_c}));
}

TEST(ConditionEncoder, MaskedOutTokensHaveNoEffect) {
  ModelConfig c = ModelConfig::toy();
  c.G = 64;
  c.R = 16;
  ParamStore P(2);
  nn::declare_mlp(P, "cond", c.d, c.d_c, c.d_c);
  std::mt19937_64 rng(11);
  std::vector<std::uint8_t> mask(c.G, 0);
  for (std::size_t i = 0; i < c.R; ++i) mask[4 * i + 1] = 1;
  // All-negative tokens: a multiply-by-zero mask would let the zero rows win the max.
  Tensor tok = add_scalar(scale(abs(random_tensor(rng, {c.G, c.d})), -1.0), -0.1);
  Tensor base = condition_encode(P, tok, mask);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor perturbed = tok.detach();
    for (std::size_t g = 0; g < c.G; ++g)
      if (!mask[g])
        for (std::size_t k = 0; k < c.d; ++k) perturbed.mutable_values()[g * c.d + k] += 10.0 * (uniform01(rng) - 0.3);
    expect_same(base, condition_encode(P, perturbed, mask));
  }
  Tensor changed = tok.detach();
  changed.mutable_values()[1 * c.d] += 5.0;
  EXPECT_GT(max_abs_diff(base, condition_encode(P, changed, mask)), 0.0);
}

TEST(ConditionEncoder, PermutingMaskedInRowsLeavesConditionUnchanged) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(3);
  nn::declare_mlp(P, "cond", c.d, c.d_c, c.d_c);
  std::mt19937_64 rng(12);
  Tensor tok = random_tensor(rng, {c.G, c.d});
  std::vector<std::uint8_t> mask = first_ones(c.G, 4);
  std::vector<std::size_t> order = {3, 1, 0, 2, 4, 5, 6, 7};
  expect_same(condition_encode(P, tok, mask), condition_encode(P, gather_rows(tok, order), mask));
}

TEST(GeometricAttention, SelfBlockShapeAndErrors) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(4);
  declare_ga_mhsa(P, "sa", c);
  PatchSet hp = random_patches(13, 64, c.G_h, c.S_h);
  PatchSet op = random_patches(14, 64, c.G, c.S);
  HoiGeometry geo = make_hoi_geometry(hp.centers, op.centers, c.knn_k, c.coord_scale);
  std::mt19937_64 rng(13);
  Tensor h = random_tensor(rng, {c.G_h, c.d});
  EXPECT_EQ(ga_mhsa(P, "sa", c, h, geo).shape(), (Shape{c.G_h, c.d}));
  EXPECT_THROW(make_hoi_geometry(hp.centers, op.centers, c.G_h + 1, c.coord_scale), std::invalid_argument);
}

TEST(GeometricAttention, SpatialBranchIsTranslationInvariant) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(5);
  declare_ga_mhsa(P, "sa", c);
  PatchSet hp = random_patches(15, 64, c.G_h, c.S_h);
  PatchSet op = random_patches(16, 64, c.G, c.S);
  HoiGeometry geo = make_hoi_geometry(hp.centers, op.centers, c.knn_k, c.coord_scale);
  // Shift by a power of two so center differences stay exact.
  auto shifted = hp.centers;
  for (auto& p : shifted) p = p + Vec3{0.25, -0.5, 0.125};
  auto shifted_obj = op.centers;
  for (auto& p : shifted_obj) p = p + Vec3{0.25, -0.5, 0.125};
  HoiGeometry moved = make_hoi_geometry(shifted, shifted_obj, c.knn_k, c.coord_scale);
  Tensor a = ga_mhsa_spatial(P, "sa", geo, c.G_h, c.d);
  Tensor b = ga_mhsa_spatial(P, "sa", moved, c.G_h, c.d);
  EXPECT_LT(max_abs_diff(a, b), 1e-12);
}

TEST(GeometricAttention, ZeroedSpatialBranchIsPlainAttention) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(6);
  declare_ga_mhsa(P, "sa", c);
  PatchSet hp = random_patches(17, 64, c.G_h, c.S_h);
  HoiGeometry geo = make_hoi_geometry(hp.centers, hp.centers, c.knn_k, c.coord_scale);
  std::mt19937_64 rng(14);
  Tensor h = random_tensor(rng, {c.G_h, c.d});
  // Surgery: zero the projection rows fed by the spatial branch.
  auto& w = P.get("sa.proj.w").node().value;
  for (std::size_t r = c.d; r < 2 * c.d; ++r) std::fill_n(w.begin() + r * c.d, c.d, 0.0);
  Tensor out = ga_mhsa(P, "sa", c, h, geo);

  Tensor ln = nn::norm(P, "sa.ln", h);
  Tensor attn = nn::attention(P, "sa.attn", ln, ln, c.heads);
  Tensor proj = add(matmul(attn, slice(P.get("sa.proj.w"), 0, 0, c.d)), P.get("sa.proj.b"));
  Tensor expected = nn::ffn(P, "sa.ffn", add(h, proj));
  EXPECT_LT(max_abs_diff(out, expected), 1e-12);
}

TEST(GeometricAttention, CrossBlockWithZeroObjectTokensIsBiasOnly) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(7);
  declare_ga_mhca(P, "ca", c);
  std::mt19937_64 rng(15);
  Tensor h = random_tensor(rng, {c.G_h, c.d});
  Tensor q = nn::norm(P, "ca.ln_q", h);
  // Zero tokens give zero keys/values before bias; the layer norm of a zero
  // row is its bias, which is zero at init.
  Tensor kv = nn::norm(P, "ca.ln_kv", Tensor::zeros({c.G, c.d}));
  Tensor semantic = nn::attention(P, "ca.attn", q, kv, c.heads);
  const Tensor& vb = P.get("ca.attn.v.b");
  Tensor expected = nn::linear(P, "ca.attn.o", reshape(vb, {1, c.d}));
  for (std::size_t i = 0; i < c.G_h; ++i)
    for (std::size_t k = 0; k < c.d; ++k) EXPECT_NEAR(semantic[i * c.d + k], expected[k], 1e-12);
}

TEST(GeometricAttention, CrossBlockGradientReachesBothStreams) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P(8);
  declare_ga_mhca(P, "ca", c);
  PatchSet hp = random_patches(18, 64, c.G_h, c.S_h);
  PatchSet op = random_patches(19, 64, c.G, c.S);
  HoiGeometry geo = make_hoi_geometry(hp.centers, op.centers, c.knn_k, c.coord_scale);
  std::mt19937_64 rng(16);
  Tensor h = random_tensor(rng, {c.G_h, c.d});
  Tensor o = random_tensor(rng, {c.G, c.d});
  h.set_requires_grad(true);
  o.set_requires_grad(true);
  Tensor coeff = random_tensor(rng, {c.G_h, c.d});
  auto f = [&] { return sum(mul(ga_mhca(P, "ca", c, h, o, geo), coeff)); };
  auto report = grad_check(f, {h, o}, 1e-5, 1e-4);
  EXPECT_TRUE(report.pass) << report.worst << " " << report.failure;
  auto norm_of = [](const std::vector<double>& g) {
    double s = 0;
    for (double v : g) s += v * v;
    return s;
  };
  EXPECT_GT(norm_of(h.grad()), 0.0);
  EXPECT_GT(norm_of(o.grad()), 0.0);
}

TEST(Hoi, FeatureWidthAndGradient) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P = init_cvae(c, 3);
  TrainExample ex = toy_example(c, 20);
  std::mt19937_64 rng(17);
  Tensor h = random_tensor(rng, {c.G_h, c.d});
  Tensor o = random_tensor(rng, {c.G, c.d});
  EXPECT_EQ(hoi_encode(P, c, h, o, ex.geometry).shape(), (Shape{1, c.d_h}));
  Tensor coeff = random_tensor(rng, {1, c.d_h});
  auto report = grad_check([&] { return sum(mul(hoi_encode(P, c, h, o, ex.geometry), coeff)); },
                           P.with_prefix("hoi."), 1e-5, 1e-4, {.probes_per_param = 8, .seed = 2});
  EXPECT_TRUE(report.pass) << report.worst << " " << report.failure;
}

TEST(Vae, EncodeClampsLogvarAndIsDeterministic) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P = init_cvae(c, 4);
  std::mt19937_64 rng(18);
  Tensor f = random_tensor(rng, {1, c.d_h}, 200.0);
  Tensor zc = random_tensor(rng, {1, c.d_c}, 200.0);
  Posterior a = vae_encode(P, c, f, zc), b = vae_encode(P, c, f, zc);
  EXPECT_EQ(a.mu.shape(), (Shape{1, c.d_z}));
  EXPECT_EQ(a.logvar.shape(), (Shape{1, c.d_z}));
  bool hit_bound = false;
  for (double v : a.logvar.values()) {
    EXPECT_GE(v, -10.0);
    EXPECT_LE(v, 10.0);
    hit_bound |= std::fabs(v) == 10.0;
  }
  EXPECT_TRUE(hit_bound);
  expect_same(a.mu, b.mu);
  expect_same(a.logvar, b.logvar);
}

TEST(Vae, ReparameterizeDegenerateVarianceAndSeed) {
  std::mt19937_64 rng(19);
  Posterior post{random_tensor(rng, {1, 8}), Tensor::full({1, 8}, -10.0)};
  Tensor z = reparameterize(post, 42);
  double mu_norm = 0;
  for (double v : post.mu.values()) mu_norm += v * v;
  EXPECT_LT(max_abs_diff(z, post.mu), 1e-2 * std::sqrt(mu_norm) + 1e-3);
  expect_same(reparameterize(post, 42), z);
}

TEST(Vae, ReparameterizeMonteCarloMean) {
  Posterior post{Tensor({1, 3}, {0.5, -1.0, 2.0}), Tensor({1, 3}, {0.0, std::log(4.0), std::log(0.25)})};
  const std::size_t n = 100000;
  std::vector<double> mean(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor z = reparameterize(post, stream_seed(5, "mc", i));
    for (int k = 0; k < 3; ++k) mean[k] += z[k] / n;
  }
  double sigma[3] = {1.0, 2.0, 0.5};
  for (int k = 0; k < 3; ++k) EXPECT_LT(std::fabs(mean[k] - post.mu[k]), 4.0 * sigma[k] / std::sqrt(double(n))) << k;
}

TEST(Vae, ReparameterizeGradientSkipsNoise) {
  std::mt19937_64 rng(20);
  Tensor mu = random_tensor(rng, {1, 4}), lv = random_tensor(rng, {1, 4}, 0.5);
  mu.set_requires_grad(true);
  lv.set_requires_grad(true);
  auto report = grad_check([&] { return sum(square(reparameterize({mu, lv}, 9))); }, {mu, lv}, 1e-6, 1e-6);
  EXPECT_TRUE(report.pass) << report.failure;
}

TEST(Vae, DecodeHas51OutputsAndLiveJacobian) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P = init_cvae(c, 5);
  std::mt19937_64 rng(21);
  Tensor z = random_tensor(rng, {1, c.d_z});
  Tensor zc = random_tensor(rng, {1, c.d_c});
  z.set_requires_grad(true);
  Tensor out = vae_decode(P, z, zc);
  EXPECT_EQ(out.numel(), 51u);
  expect_same(out, vae_decode(P, z, zc));
  double max_entry = 0;
  for (std::size_t i = 0; i < kHandParams; ++i) {
    Tape tape;
    TapeScope scope(tape);
    z.zero_grad();
    Tensor y = vae_decode(P, z, zc);
    backward(slice(y, 0, i, 1));
    for (double g : z.grad()) max_entry = std::max(max_entry, std::fabs(g));
  }
  EXPECT_GT(max_entry, 0.0);
}

TEST(Loss, AnalyticCases) {
  ModelConfig c = ModelConfig::toy();
  std::mt19937_64 rng(22);
  Tensor v = random_tensor(rng, {778, 3}), e = random_tensor(rng, {100, 3});
  Posterior zero{Tensor::zeros({1, c.d_z}), Tensor::zeros({1, c.d_z})};
  EXPECT_EQ(loss_train(c, v, e, v, e, zero).total.item(), 0.0);
  c.lambda_kld = 1.0;
  Posterior ones{Tensor::full({1, c.d_z}, 1.0), Tensor::zeros({1, c.d_z})};
  EXPECT_DOUBLE_EQ(loss_train(c, v, e, v, e, ones).total.item(), 0.5 * c.d_z);
}

TEST(Loss, MatchesScalarReimplementation) {
  ModelConfig c = ModelConfig::toy();
  c.lambda_e = 0.7;
  c.lambda_kld = 0.3;
  std::mt19937_64 rng(23);
  Tensor v = random_tensor(rng, {50, 3}), tv = random_tensor(rng, {50, 3});
  Tensor e = random_tensor(rng, {20, 3}), te = random_tensor(rng, {20, 3});
  Posterior post{random_tensor(rng, {1, c.d_z}), random_tensor(rng, {1, c.d_z})};
  double lv = 0, le = 0, kl = 0;
  for (std::size_t i = 0; i < v.numel(); ++i) lv += std::fabs(v[i] - tv[i]) / v.numel();
  for (std::size_t i = 0; i < e.numel(); ++i) le += std::fabs(e[i] - te[i]) / e.numel();
  for (std::size_t i = 0; i < c.d_z; ++i) {
    double m = post.mu[i], l = post.logvar[i];
    kl += 0.5 * (std::exp(l) + m * m - 1 - l);
  }
  LossTerms t = loss_train(c, v, e, tv, te, post);
  EXPECT_NEAR(t.total.item(), c.lambda_v * lv + c.lambda_e * le + c.lambda_kld * kl, 1e-12);
  EXPECT_NEAR(t.kld, kl, 1e-12);
}

TEST(Loss, KlIsNonNegativeAndZeroOnlyAtStandardNormal) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 200; ++trial) {
    Posterior post{random_tensor(rng, {1, 5}, 2.0), random_tensor(rng, {1, 5}, 3.0)};
    EXPECT_GT(kl_divergence(post).item(), 0.0);
  }
  EXPECT_EQ(kl_divergence({Tensor::zeros({1, 5}), Tensor::zeros({1, 5})}).item(), 0.0);
}

TEST(Pipeline, FullToyGradientCheck) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P = init_cvae(c, 6);
  TrainExample ex = toy_example(c, 30);
  auto f = [&] { return cvae_forward(P, c, hand(), ex, 77).loss.total; };
  auto report = grad_check(f, P.tensors(), 1e-5, 1e-4, {.probes_per_param = 3, .seed = 3});
  EXPECT_TRUE(report.pass) << report.worst << " " << report.failure;
  EXPECT_GT(report.probes, 2 * P.size());
}

TEST(Pipeline, EveryParameterReceivesGradient) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P = init_cvae(c, 7);
  TrainExample ex = toy_example(c, 31);
  Tape tape;
  TapeScope scope(tape);
  backward(cvae_forward(P, c, hand(), ex, 1).loss.total);
  for (std::size_t i = 0; i < P.size(); ++i) {
    double s = 0;
    for (double g : P.tensors()[i].grad()) s += std::fabs(g);
    EXPECT_GT(s, 0.0) << P.names()[i];
  }
}

TEST(Pipeline, ForwardIsBitReproducible) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P = init_cvae(c, 8);
  TrainExample a = toy_example(c, 32), b = toy_example(c, 32);
  expect_same(cvae_forward(P, c, hand(), a, 5).params, cvae_forward(P, c, hand(), b, 5).params);
}

TEST(Generate, SeedsAreReproducibleAndDistinct) {
  ModelConfig c = ModelConfig::toy();
  ParamStore P = init_cvae(c, 9);
  PatchInput obj = make_patch_input(random_patches(40, c.N, c.G, c.S), c.coord_scale);
  auto mask = first_ones(c.G, c.R);
  GraspSample a = generate(P, c, hand(), obj, mask, 1), b = generate(P, c, hand(), obj, mask, 1);
  GraspSample d = generate(P, c, hand(), obj, mask, 2);
  EXPECT_EQ(a.params.values, b.params.values);
  EXPECT_EQ(a.mesh.vertices, b.mesh.vertices);
  EXPECT_EQ(a.z, b.z);
  EXPECT_NE(a.params.values, d.params.values);
  EXPECT_EQ(a.mesh.vertices, hand_mesh(hand(), a.params).vertices);
  EXPECT_EQ(a.z.size(), c.d_z);
}

TEST(Generate, AblationIgnoresRegion) {
  ModelConfig c = ModelConfig::toy();
  c.use_condition_mask = false;
  ParamStore P = init_cvae(c, 10);
  PatchInput obj = make_patch_input(random_patches(41, c.N, c.G, c.S), c.coord_scale);
  GraspSample a = generate(P, c, hand(), obj, first_ones(c.G, 1), 3);
  std::vector<std::uint8_t> other = first_ones(c.G, 1);
  std::reverse(other.begin(), other.end());
  GraspSample b = generate(P, c, hand(), obj, other, 3);
  EXPECT_EQ(a.params.values, b.params.values);
}
