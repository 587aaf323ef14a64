#pragma once

// Masked-patch autoencoding for the object encoder. Visible patches go
// through O-Enc; a shallow decoder sees the encoded visible tokens plus a
// learned mask token at every masked center and regresses the masked
// patches' center-relative points.

#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "rgk/model/network.hpp"
#include "rgk/numerics/optim.hpp"

namespace rgk {

struct MaskSplit {
  std::vector<std::size_t> visible;
  std::vector<std::size_t> masked;
  double ratio = 0;
};

inline std::size_t masked_count(std::size_t G, double ratio) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(G) + 0.5));
}

// Uniform random subset of round-half-up(ratio * G) patches, both index
// lists sorted ascending.
inline MaskSplit mask_patches(std::size_t G, double ratio, std::uint64_t seed) {
  if (!(ratio > 0 && ratio < 1)) throw std::invalid_argument(detail::concat("mask ratio ", ratio, " outside (0, 1)"));
  std::size_t m = masked_count(G, ratio);
  if (m == 0 || m >= G)
    throw std::invalid_argument(detail::concat("mask ratio ", ratio, " leaves no masked or no visible patch at G = ", G));
  std::vector<std::size_t> order(G);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < m; ++i) std::swap(order[i], order[i + uniform_index(rng, G - i)]);
  MaskSplit s;
  s.ratio = ratio;
  s.masked.assign(order.begin(), order.begin() + m);
  s.visible.assign(order.begin() + m, order.end());
  std::sort(s.masked.begin(), s.masked.end());
  std::sort(s.visible.begin(), s.visible.end());
  return s;
}

inline PatchInput select_patches(const PatchInput& in, const std::vector<std::size_t>& ids) {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size() * in.S);
  for (std::size_t g : ids)
    for (std::size_t s = 0; s < in.S; ++s) rows.push_back(g * in.S + s);
  PatchInput out;
  out.G = ids.size();
  out.S = in.S;
  {
    NoGradScope no_grad;
    out.points = gather_rows(in.points, rows);
    out.centers = gather_rows(in.centers, ids);
  }
  for (std::size_t g : ids) out.centers_world.push_back(in.centers_world[g]);
  return out;
}

// Ground-truth masked patches (|masked| x S x 3, meters, center-relative).
inline Tensor masked_targets(const PatchSet& ps, const MaskSplit& split) {
  std::vector<double> v;
  v.reserve(split.masked.size() * ps.S * 3);
  for (std::size_t g : split.masked)
    for (std::size_t s = 0; s < ps.S; ++s) v.insert(v.end(), ps.point(g, s).begin(), ps.point(g, s).end());
  return Tensor({split.masked.size(), ps.S, 3}, std::move(v));
}

inline void declare_mae_decoder(ParamStore& P, const ModelConfig& c) {
  nn::declare_mlp(P, "mae.pos", 3, c.d, c.d);
  P.normal("mae.mask_token", {c.d}, 0.02);
  nn::declare_stack(P, "mae", c.B_dec, c.d, c.ffn_ratio);
  nn::declare_norm(P, "mae.ln", c.d);
  nn::declare_linear(P, "mae.head", c.d, c.S * 3);
}

// O-Enc plus the MAE decoder; O-Enc names match init_cvae.
inline ParamStore init_mae(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  ParamStore P(stream_seed(seed, "init"));
  declare_object_encoder(P, c);
  declare_mae_decoder(P, c);
  return P;
}

// Predicted masked patches, |masked| x S x 3 in meters.
inline Tensor mae_forward(const ParamStore& P, const ModelConfig& c, const PatchInput& in, const MaskSplit& split) {
  if (in.S != c.S) throw std::invalid_argument(detail::concat("mae_forward: patch size ", in.S, " but config S = ", c.S));
  PatchInput vis = select_patches(in, split.visible);
  Tensor encoded = o_enc(P, c, patch_embed(P, "oenc.embed", vis));
  Tensor masked_centers;
  {
    NoGradScope no_grad;
    masked_centers = gather_rows(in.centers, split.masked);
  }
  Tensor mask_tokens = add(nn::mlp(P, "mae.pos", masked_centers), P.get("mae.mask_token"));
  Tensor x = concat({add(encoded, nn::mlp(P, "mae.pos", vis.centers)), mask_tokens}, 0);
  x = nn::norm(P, "mae.ln", nn::stack(P, "mae", c.B_dec, x, c.heads));
  Tensor head = nn::linear(P, "mae.head", slice(x, 0, split.visible.size(), split.masked.size()));
  return scale(reshape(head, {split.masked.size(), c.S, 3}), 1.0 / c.coord_scale);
}

// Per-patch symmetric Chamfer, averaged over patches.
inline Tensor loss_pretrain(const Tensor& predicted, const Tensor& target) {
  if (predicted.rank() != 3 || target.rank() != 3 || predicted.dim(0) != target.dim(0))
    throw std::invalid_argument("loss_pretrain: expected matching |masked| x S x 3 tensors");
  return chamfer(predicted, target);
}

// ---------------------------------------------------------------------------

struct PretrainOptions {
  std::size_t epochs = 30;
  std::size_t batch = 8;
  double heldout_fraction = 0.1;
  // Ratio at which held-out loss is measured, independent of the training ratio.
  double eval_ratio = 0.6;
  std::uint64_t seed = 0;
  std::ostream* log = nullptr;  // JSONL epoch records
};

struct PretrainRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double heldout_loss = 0;
  double wall_ms = 0;
};

struct PretrainResult {
  ParamStore params;
  double initial_heldout = 0;
  std::vector<PretrainRecord> records;
  std::size_t train_objects = 0, heldout_objects = 0;
};

struct PretrainSample {
  PatchSet patches;
  PatchInput input;
};

inline PretrainSample make_pretrain_sample(const ModelConfig& c, const PointCloud& cloud, std::uint64_t seed) {
  PretrainSample s;
  s.patches = group_patches(cloud, c.G, c.S, seed);
  s.input = make_patch_input(s.patches, c.coord_scale);
  return s;
}

inline double heldout_loss(const ParamStore& P, const ModelConfig& c, const std::vector<PretrainSample>& heldout,
                           double eval_ratio, std::uint64_t seed) {
  NoGradScope no_grad;
  double total = 0;
  for (std::size_t i = 0; i < heldout.size(); ++i) {
    MaskSplit split = mask_patches(c.G, eval_ratio, stream_seed(seed, "heldout_mask", i));
    total += loss_pretrain(mae_forward(P, c, heldout[i].input, split), masked_targets(heldout[i].patches, split)).item();
  }
  return total / static_cast<double>(heldout.size());
}

inline void write_record(std::ostream& out, const PretrainRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"heldout_loss", r.heldout_loss}, {"wall_ms", r.wall_ms}};
  out << j.dump() << '\n';
  out.flush();
}

// Clouds must have at least G points. The last max(1, round(fraction * n))
// clouds are held out when n >= 2; a single cloud is both trained on and
// evaluated.
inline PretrainResult pretrain_run(const std::vector<PointCloud>& clouds, const ModelConfig& c, const PretrainOptions& opt) {
  c.validate();
  if (clouds.empty()) throw DataError("pretraining dataset is empty");
  if (opt.epochs == 0 || opt.batch == 0) throw UsageError("epochs and batch must be >= 1");
  std::size_t n_held = clouds.size() >= 2
                           ? std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(opt.heldout_fraction * clouds.size())),
                                                     1, clouds.size() - 1)
                           : 0;
  std::size_t n_train = clouds.size() - n_held;
  std::vector<PretrainSample> train, held;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    if (clouds[i].size() < c.G || clouds[i].size() < c.S)
      throw DataError(detail::concat("object ", i, " has ", clouds[i].size(), " points, fewer than G or S"));
    auto s = make_pretrain_sample(c, clouds[i], stream_seed(opt.seed, "patches", i));
    (i < n_train ? train : held).push_back(std::move(s));
  }
  if (held.empty()) held = train;

  PretrainResult result{init_mae(c, opt.seed), 0, {}, n_train, n_held};
  ParamStore& P = result.params;
  AdamW adam(P.tensors(), {.lr = c.lr, .weight_decay = c.weight_decay});
  std::size_t steps_per_epoch = (n_train + opt.batch - 1) / opt.batch;
  std::size_t total_steps = steps_per_epoch * opt.epochs, step = 0;
  result.initial_heldout = heldout_loss(P, c, held, opt.eval_ratio, opt.seed);
  auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    Rng shuffle_rng(stream_seed(opt.seed, "epoch_order", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double train_sum = 0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      std::size_t lo = b * opt.batch, hi = std::min(n_train, lo + opt.batch);
      for (std::size_t k = lo; k < hi; ++k) {
        const auto& sample = train[order[k]];
        MaskSplit split = mask_patches(c.G, c.mask_ratio, stream_seed(opt.seed, "train_mask", epoch * n_train + k));
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = loss_pretrain(mae_forward(P, c, sample.input, split), masked_targets(sample.patches, split));
        double value = loss.item();
        if (!std::isfinite(value))
          throw NumericError(detail::concat("non-finite pretraining loss at epoch ", epoch, ", object ", order[k]));
        train_sum += value;
        backward(loss);
      }
      adam.set_lr(cosine_lr(c.lr, step++, total_steps));
      adam.step(1.0 / static_cast<double>(hi - lo));
    }
    PretrainRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_sum / static_cast<double>(n_train);
    rec.heldout_loss = heldout_loss(P, c, held, opt.eval_ratio, opt.seed);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(rec.heldout_loss)) throw NumericError(detail::concat("non-finite held-out loss at epoch ", epoch));
    result.records.push_back(rec);
    if (opt.log) write_record(*opt.log, rec);
  }
  P.quantize_f32();
  return result;
}

}  // namespace rgk
