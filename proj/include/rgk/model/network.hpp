#pragma once

// Region-conditioned grasp CVAE.
//
// Training path:   object patches -> O-Enc tokens -> masked pooling -> z_c
//                  hand patches   -> H-Enc tokens -> HOI blocks  -> f_I
//                  [f_I, z_c] -> posterior -> z -> [z, z_c] -> hand params
// Generation path: z ~ N(0, I) replaces the posterior sample.
//
// Parameter prefixes: oenc.* (shared with pretraining), cond.*, henc.*,
// hoi.*, venc.*, vdec.*.

#include "rgk/geometry/sampling.hpp"
#include "rgk/hand/forward.hpp"
#include "rgk/model/config.hpp"
#include "rgk/model/layers.hpp"

namespace rgk {

// Constant network input for one patch set, in scaled coordinates.
struct PatchInput {
  std::size_t G = 0, S = 0;
  Tensor points;                 // (G*S) x 3, center-relative
  Tensor centers;                // G x 3
  std::vector<Vec3> centers_world;
};

inline PatchInput make_patch_input(const PatchSet& ps, double coord_scale) {
  PatchInput in;
  in.G = ps.G;
  in.S = ps.S;
  std::vector<double> pts, ctr;
  pts.reserve(ps.patches.size() * 3);
  for (const auto& p : ps.patches)
    for (double x : p) pts.push_back(coord_scale * x);
  for (const auto& c : ps.centers)
    for (double x : c) ctr.push_back(coord_scale * x);
  in.points = Tensor({ps.G * ps.S, 3}, std::move(pts));
  in.centers = Tensor({ps.G, 3}, std::move(ctr));
  in.centers_world = ps.centers;
  return in;
}

// Neighbourhood structure consumed by the geometric attention blocks.
struct HoiGeometry {
  std::size_t k = 0;
  Tensor hand_rel;                     // (G_h*k) x 3: neighbour center - own center
  Tensor cross_rel;                    // (G_o*k) x 3: object center - hand center
  std::vector<std::size_t> cross_obj;  // object token of each cross pair
  std::vector<std::size_t> cross_hand; // hand token receiving each cross pair
};

inline HoiGeometry make_hoi_geometry(const std::vector<Vec3>& hand_centers, const std::vector<Vec3>& object_centers,
                                     std::size_t knn_k, double coord_scale) {
  if (knn_k > hand_centers.size())
    throw std::invalid_argument(detail::concat("knn_k = ", knn_k, " exceeds hand token count ", hand_centers.size()));
  HoiGeometry g;
  g.k = knn_k;
  PointCloud hand{hand_centers};
  auto nn = knn(hand_centers, hand, knn_k);
  std::vector<double> rel;
  for (std::size_t i = 0; i < hand_centers.size(); ++i)
    for (std::size_t j = 0; j < knn_k; ++j)
      for (int a = 0; a < 3; ++a) rel.push_back(coord_scale * (hand_centers[nn[i * knn_k + j]][a] - hand_centers[i][a]));
  g.hand_rel = Tensor({hand_centers.size() * knn_k, 3}, std::move(rel));
  auto cross = knn(object_centers, hand, knn_k);
  std::vector<double> crel;
  for (std::size_t o = 0; o < object_centers.size(); ++o)
    for (std::size_t j = 0; j < knn_k; ++j) {
      std::size_t h = cross[o * knn_k + j];
      g.cross_obj.push_back(o);
      g.cross_hand.push_back(h);
      for (int a = 0; a < 3; ++a) crel.push_back(coord_scale * (object_centers[o][a] - hand_centers[h][a]));
    }
  g.cross_rel = Tensor({object_centers.size() * knn_k, 3}, std::move(crel));
  return g;
}

// ---------------------------------------------------------------------------
// Patch embedding: shared two-stage point MLP with max-pooling over the S
// points, plus a linear embedding of the center.

inline void declare_patch_embed(ParamStore& P, const std::string& name, const ModelConfig& c) {
  std::size_t e = c.embed_width;
  nn::declare_mlp(P, name + ".local", 3, e, e);
  nn::declare_mlp(P, name + ".fuse", 2 * e, 2 * e, c.d);
  nn::declare_linear(P, name + ".pos", 3, c.d);
}

inline Tensor patch_features(const ParamStore& P, const std::string& name, const PatchInput& in) {
  if (in.points.shape() != Shape{in.G * in.S, 3} || in.centers.shape() != Shape{in.G, 3})
    throw std::invalid_argument("patch_embed: patch tensors do not match G x S layout");
  Tensor h = nn::mlp(P, name + ".local", in.points);
  std::size_t e = h.dim(1);
  Tensor pooled = max_axis(reshape(h, {in.G, in.S, e}), 1);
  std::vector<std::size_t> owner(in.G * in.S);
  for (std::size_t i = 0; i < owner.size(); ++i) owner[i] = i / in.S;
  Tensor fused = nn::mlp(P, name + ".fuse", concat({h, gather_rows(pooled, owner)}, 1));
  return max_axis(reshape(fused, {in.G, in.S, fused.dim(1)}), 1);
}

inline Tensor patch_embed(const ParamStore& P, const std::string& name, const PatchInput& in) {
  return add(patch_features(P, name, in), nn::linear(P, name + ".pos", in.centers));
}

// ---------------------------------------------------------------------------
// Encoders

inline void declare_object_encoder(ParamStore& P, const ModelConfig& c) {
  declare_patch_embed(P, "oenc.embed", c);
  nn::declare_stack(P, "oenc", c.B_o, c.d, c.ffn_ratio);
}

inline Tensor o_enc(const ParamStore& P, const ModelConfig& c, const Tensor& tokens) {
  return nn::stack(P, "oenc", c.B_o, tokens, c.heads);
}

inline Tensor h_enc(const ParamStore& P, const ModelConfig& c, const Tensor& tokens) {
  return nn::stack(P, "henc", c.B_h, tokens, c.heads);
}

inline std::vector<std::uint8_t> effective_mask(const ModelConfig& c, const std::vector<std::uint8_t>& mask) {
  if (c.use_condition_mask) return mask;
  return std::vector<std::uint8_t>(mask.size(), 1);
}

// Max-pool over the tokens selected by the mask, then a two-layer MLP to d_c.
// Selecting rows (instead of multiplying by the mask) keeps masked-out tokens
// from winning the max when every selected value is negative.
inline Tensor condition_encode(const ParamStore& P, const Tensor& tokens,
                               const std::vector<std::uint8_t>& mask) {
  std::size_t G = tokens.dim(0), d = tokens.dim(1);
  if (mask.size() != G) throw std::invalid_argument(detail::concat("condition mask has ", mask.size(), " entries, expected ", G));
  std::vector<std::size_t> rows;
  for (std::size_t g = 0; g < G; ++g)
    if (mask[g]) rows.push_back(g);
  if (rows.empty()) throw std::invalid_argument("condition mask is all zero");
  Tensor pooled = reshape(max_axis(gather_rows(tokens, rows), 0), {1, d});
  return nn::mlp(P, "cond", pooled);
}

// ---------------------------------------------------------------------------
// Geometric-aware attention

inline void declare_ga_mhsa(ParamStore& P, const std::string& name, const ModelConfig& c) {
  nn::declare_norm(P, name + ".ln", c.d);
  nn::declare_attention(P, name + ".attn", c.d);
  nn::declare_mlp(P, name + ".geo", 3, c.d, c.d);
  nn::declare_linear(P, name + ".proj", 2 * c.d, c.d);
  nn::declare_ffn(P, name + ".ffn", c.d, c.ffn_ratio);
}

// Spatial branch of the self-attention block: relative neighbour-center
// coordinates through a shared MLP, max-pooled per token.
inline Tensor ga_mhsa_spatial(const ParamStore& P, const std::string& name, const HoiGeometry& geo, std::size_t G,
                              std::size_t d) {
  return max_axis(reshape(nn::mlp(P, name + ".geo", geo.hand_rel), {G, geo.k, d}), 1);
}

inline Tensor ga_mhsa(const ParamStore& P, const std::string& name, const ModelConfig& c, const Tensor& hand,
                      const HoiGeometry& geo) {
  std::size_t G = hand.dim(0);
  if (geo.hand_rel.dim(0) != G * geo.k) throw std::invalid_argument("ga_mhsa: geometry does not match hand tokens");
  Tensor h = nn::norm(P, name + ".ln", hand);
  Tensor semantic = nn::attention(P, name + ".attn", h, h, c.heads);
  Tensor spatial = ga_mhsa_spatial(P, name, geo, G, c.d);
  Tensor x = add(hand, nn::linear(P, name + ".proj", concat({semantic, spatial}, 1)));
  return nn::ffn(P, name + ".ffn", x);
}

inline void declare_ga_mhca(ParamStore& P, const std::string& name, const ModelConfig& c) {
  nn::declare_norm(P, name + ".ln_q", c.d);
  nn::declare_norm(P, name + ".ln_kv", c.d);
  nn::declare_attention(P, name + ".attn", c.d);
  nn::declare_mlp(P, name + ".geo", 3 + c.d, c.d, c.d);
  nn::declare_linear(P, name + ".proj", 2 * c.d, c.d);
  nn::declare_ffn(P, name + ".ffn", c.d, c.ffn_ratio);
}

// Hand tokens query object tokens; each object center also sends its
// relative position and token to its k nearest hand centers, where the
// messages are max-pooled (hand tokens receiving none get zeros).
inline Tensor ga_mhca(const ParamStore& P, const std::string& name, const ModelConfig& c, const Tensor& hand,
                      const Tensor& object, const HoiGeometry& geo) {
  std::size_t G = hand.dim(0);
  if (geo.cross_obj.size() != object.dim(0) * geo.k) throw std::invalid_argument("ga_mhca: geometry does not match object tokens");
  Tensor q = nn::norm(P, name + ".ln_q", hand);
  Tensor kv = nn::norm(P, name + ".ln_kv", object);
  Tensor semantic = nn::attention(P, name + ".attn", q, kv, c.heads);
  Tensor msg = nn::mlp(P, name + ".geo", concat({geo.cross_rel, gather_rows(kv, geo.cross_obj)}, 1));
  Tensor spatial = segment_max(msg, geo.cross_hand, G);
  Tensor x = add(hand, nn::linear(P, name + ".proj", concat({semantic, spatial}, 1)));
  return nn::ffn(P, name + ".ffn", x);
}

inline Tensor hoi_encode(const ParamStore& P, const ModelConfig& c, Tensor hand, const Tensor& object,
                         const HoiGeometry& geo) {
  for (std::size_t b = 0; b < c.B_hoi; ++b) {
    std::string name = "hoi.block" + std::to_string(b);
    hand = ga_mhsa(P, name + ".sa", c, hand, geo);
    hand = ga_mhca(P, name + ".ca", c, hand, object, geo);
  }
  return nn::linear(P, "hoi.out", reshape(max_axis(hand, 0), {1, c.d}));
}

// ---------------------------------------------------------------------------
// VAE

struct Posterior {
  Tensor mu;      // 1 x d_z
  Tensor logvar;  // 1 x d_z, clamped to [-10, 10]
};

inline Posterior vae_encode(const ParamStore& P, const ModelConfig& c, const Tensor& f_i, const Tensor& z_c) {
  Tensor out = nn::mlp(P, "venc", concat({f_i, z_c}, 1));
  return {slice(out, 1, 0, c.d_z), clamp(slice(out, 1, c.d_z, c.d_z), -10.0, 10.0)};
}

inline Tensor standard_normal_tensor(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = standard_normal(rng);
  return Tensor({1, n}, std::move(v));
}

// z = mu + exp(logvar / 2) * eps with eps drawn from the seeded stream.
inline Tensor reparameterize(const Posterior& post, std::uint64_t seed) {
  Tensor eps = standard_normal_tensor(post.mu.dim(1), seed);
  return add(post.mu, mul(exp(scale(post.logvar, 0.5)), eps));
}

inline void declare_decoder(ParamStore& P, const ModelConfig& c) {
  std::size_t hidden = c.d_h;
  nn::declare_linear(P, "vdec.fc1", c.d_z + c.d_c, hidden);
  nn::declare_linear(P, "vdec.fc2", hidden, hidden);
  nn::declare_linear(P, "vdec.fc3", hidden, kHandParams, 0.01);
}

// Three-layer MLP from [z, z_c] to the 51 hand parameters.
inline Tensor vae_decode(const ParamStore& P, const Tensor& z, const Tensor& z_c) {
  Tensor h = gelu(nn::linear(P, "vdec.fc1", concat({z, z_c}, 1)));
  h = gelu(nn::linear(P, "vdec.fc2", h));
  return reshape(nn::linear(P, "vdec.fc3", h), {kHandParams});
}

// ---------------------------------------------------------------------------

inline ParamStore init_cvae(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  ParamStore P(stream_seed(seed, "init"));
  declare_object_encoder(P, c);
  nn::declare_mlp(P, "cond", c.d, c.d_c, c.d_c);
  declare_patch_embed(P, "henc.embed", c);
  nn::declare_stack(P, "henc", c.B_h, c.d, c.ffn_ratio);
  for (std::size_t b = 0; b < c.B_hoi; ++b) {
    declare_ga_mhsa(P, "hoi.block" + std::to_string(b) + ".sa", c);
    declare_ga_mhca(P, "hoi.block" + std::to_string(b) + ".ca", c);
  }
  nn::declare_linear(P, "hoi.out", c.d, c.d_h);
  nn::declare_mlp(P, "venc", c.d_h + c.d_c, c.d_h, 2 * c.d_z);
  declare_decoder(P, c);
  return P;
}

struct LossTerms {
  Tensor total;
  double verts = 0, edges = 0, kld = 0;
};

// KL(N(mu, exp(logvar)) || N(0, I)) summed over latent dimensions.
inline Tensor kl_divergence(const Posterior& post) {
  Tensor t = sub(sub(add(exp(post.logvar), square(post.mu)), post.logvar), Tensor::full(post.mu.shape(), 1.0));
  return scale(sum(t), 0.5);
}

inline LossTerms loss_train(const ModelConfig& c, const Tensor& verts, const Tensor& edges, const Tensor& target_verts,
                            const Tensor& target_edges, const Posterior& post) {
  Tensor lv = l1_distance(verts, target_verts);
  Tensor le = l1_distance(edges, target_edges);
  Tensor kl = kl_divergence(post);
  LossTerms out;
  out.total = add(add(scale(lv, c.lambda_v), scale(le, c.lambda_e)), scale(kl, c.lambda_kld));
  out.verts = lv.item();
  out.edges = le.item();
  out.kld = kl.item();
  return out;
}

// One training example with every geometric quantity precomputed.
struct TrainExample {
  PatchInput object;
  std::vector<std::uint8_t> mask;
  PatchInput hand;
  HoiGeometry geometry;
  Tensor target_verts;  // 778 x 3
  Tensor target_edges;  // E x 3
};

inline TrainExample make_train_example(const ModelConfig& c, const HandModel& hand_model, const PatchSet& object_patches,
                                       const std::vector<std::uint8_t>& mask, const HandParams& target,
                                       std::uint64_t seed) {
  TrainExample ex;
  ex.object = make_patch_input(object_patches, c.coord_scale);
  ex.mask = mask;
  HandMesh mesh = hand_mesh(hand_model, target);
  PatchSet hp = group_patches(PointCloud{mesh.vertices}, c.G_h, c.S_h, stream_seed(seed, "hand_patches"));
  ex.hand = make_patch_input(hp, c.coord_scale);
  ex.geometry = make_hoi_geometry(hp.centers, object_patches.centers, c.knn_k, c.coord_scale);
  ex.target_verts = points_tensor(mesh.vertices);
  ex.target_edges = points_tensor(mesh.edges);
  return ex;
}

struct CvaeOutput {
  Tensor params;
  Tensor verts;
  Posterior post;
  LossTerms loss;
};

inline CvaeOutput cvae_forward(const ParamStore& P, const ModelConfig& c, const HandModel& hand_model,
                               const TrainExample& ex, std::uint64_t eps_seed) {
  Tensor obj = o_enc(P, c, patch_embed(P, "oenc.embed", ex.object));
  Tensor z_c = condition_encode(P, obj, effective_mask(c, ex.mask));
  Tensor hand = h_enc(P, c, patch_embed(P, "henc.embed", ex.hand));
  Tensor f_i = hoi_encode(P, c, hand, obj, ex.geometry);
  CvaeOutput out;
  out.post = vae_encode(P, c, f_i, z_c);
  Tensor z = reparameterize(out.post, eps_seed);
  out.params = vae_decode(P, z, z_c);
  out.verts = hand_forward(hand_model, out.params);
  out.loss = loss_train(c, out.verts, edge_vectors(out.verts, hand_model), ex.target_verts, ex.target_edges, out.post);
  return out;
}

// ---------------------------------------------------------------------------
// Generation

struct GraspSample {
  HandParams params;
  HandMesh mesh;
  std::vector<double> z;
  std::uint64_t seed = 0;
};

// Condition vector for an object and region mask (no tape needed).
inline Tensor condition_vector(const ParamStore& P, const ModelConfig& c, const PatchInput& object,
                               const std::vector<std::uint8_t>& mask) {
  Tensor obj = o_enc(P, c, patch_embed(P, "oenc.embed", object));
  return condition_encode(P, obj, effective_mask(c, mask));
}

// z ~ N(0, I) from the seed; with zero_latent the prior mean is used instead.
inline GraspSample generate_from_condition(const ParamStore& P, const ModelConfig& c, const HandModel& hand_model,
                                           const Tensor& z_c, std::uint64_t seed, bool zero_latent = false) {
  NoGradScope no_grad;
  Tensor z = zero_latent ? Tensor::zeros({1, c.d_z}) : standard_normal_tensor(c.d_z, stream_seed(seed, "latent"));
  GraspSample s;
  s.params = HandParams::from(vae_decode(P, z, z_c));
  s.mesh = hand_mesh(hand_model, s.params);
  s.z = z.values();
  s.seed = seed;
  return s;
}

inline GraspSample generate(const ParamStore& P, const ModelConfig& c, const HandModel& hand_model,
                            const PatchInput& object, const std::vector<std::uint8_t>& mask, std::uint64_t seed) {
  NoGradScope no_grad;
  return generate_from_condition(P, c, hand_model, condition_vector(P, c, object, mask), seed);
}

}  // namespace rgk
