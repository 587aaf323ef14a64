#pragma once

// CVAE training over a synthetic dataset split.

#include <chrono>
#include <ostream>

#include "rgk/model/network.hpp"
#include "rgk/numerics/optim.hpp"
#include "rgk/synthdata/dataset.hpp"

namespace rgk {

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch = 8;
  std::uint64_t seed = 0;
  std::ostream* log = nullptr;  // JSONL, one record per epoch
};

struct TrainRecord {
  std::size_t epoch = 0;
  double loss = 0, verts = 0, edges = 0, kld = 0;  // means over the epoch's updates
  double lr = 0;
  double wall_ms = 0;
  std::optional<double> replay_loss;  // last epoch only
};

struct TrainResult {
  ParamStore params;
  std::vector<TrainRecord> records;
  double replay_loss = 0;
};

// Model inputs for the dataset samples of one split, built at the model's
// own N, G, S and R.
inline std::vector<TrainExample> make_examples(const Dataset& ds, Split split, const ModelConfig& c,
                                               const HandModel& hand_model, std::uint64_t seed) {
  const auto& m = ds.manifest();
  auto ids = m.samples_in(split);
  std::vector<TrainExample> out(ids.size());
  std::map<std::size_t, ObjectView> views;
  for (auto id : ids) {
    std::size_t obj = m.samples[id].object;
    if (!views.count(obj)) views.emplace(obj, ds.object_view(obj, c.N, c.G, c.S));
  }
  parallel_for(ids.size(), [&](std::size_t k) {
    const SampleRecord& s = m.samples[ids[k]];
    const ObjectView& v = views.at(s.object);
    ConditionRegion region = select_condition_region(v.patches, s.p_c, c.R);
    out[k] = make_train_example(c, hand_model, v.patches, region.mask, ds.params(s), stream_seed(seed, "example", s.id));
  });
  return out;
}

// Mean loss over the examples with fixed latent noise per example.
inline double replay_loss(const ParamStore& P, const ModelConfig& c, const HandModel& hand_model,
                          const std::vector<TrainExample>& examples, std::uint64_t seed) {
  NoGradScope no_grad;
  double total = 0;
  for (std::size_t i = 0; i < examples.size(); ++i)
    total += cvae_forward(P, c, hand_model, examples[i], stream_seed(seed, "replay_eps", i)).loss.total.item();
  return total / static_cast<double>(examples.size());
}

inline void write_record(std::ostream& out, const TrainRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"loss", r.loss}, {"verts", r.verts}, {"edges", r.edges},
                      {"kld", r.kld},     {"lr", r.lr},     {"wall_ms", r.wall_ms}};
  if (r.replay_loss) j["replay_loss"] = *r.replay_loss;
  out << j.dump() << '\n';
  out.flush();
}

// Trains from `init` (fresh or with pretrained O-Enc weights). Parameters are
// rounded to f32 at the end and the replay loss is computed from the rounded
// weights, so a reloaded checkpoint reproduces it.
inline TrainResult train_cvae(ParamStore init, const ModelConfig& c, const HandModel& hand_model,
                              const std::vector<TrainExample>& examples, const TrainOptions& opt) {
  c.validate();
  if (examples.empty()) throw DataError("training set is empty");
  if (opt.epochs == 0 || opt.batch == 0) throw UsageError("epochs and batch must be >= 1");
  TrainResult result{std::move(init), {}, 0};
  ParamStore& P = result.params;
  AdamW adam(P.tensors(), {.lr = c.lr, .weight_decay = c.weight_decay});
  const std::size_t n = examples.size();
  std::size_t steps_per_epoch = (n + opt.batch - 1) / opt.batch;
  std::size_t total_steps = steps_per_epoch * opt.epochs, step = 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto start = std::chrono::steady_clock::now();
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    Rng shuffle_rng(stream_seed(opt.seed, "epoch_order", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    TrainRecord rec;
    rec.epoch = epoch;
    rec.lr = cosine_lr(c.lr, step, total_steps);
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      std::size_t lo = b * opt.batch, hi = std::min(n, lo + opt.batch);
      for (std::size_t k = lo; k < hi; ++k) {
        Tape tape;
        TapeScope scope(tape);
        CvaeOutput out = cvae_forward(P, c, hand_model, examples[order[k]], stream_seed(opt.seed, "eps", epoch * n + k));
        double value = out.loss.total.item();
        if (!std::isfinite(value))
          throw NumericError(detail::concat("non-finite training loss at epoch ", epoch, ", example ", order[k]));
        rec.loss += value;
        rec.verts += out.loss.verts;
        rec.edges += out.loss.edges;
        rec.kld += out.loss.kld;
        backward(out.loss.total);
      }
      adam.set_lr(cosine_lr(c.lr, step++, total_steps));
      adam.step(1.0 / static_cast<double>(hi - lo));
    }
    for (double* x : {&rec.loss, &rec.verts, &rec.edges, &rec.kld}) *x /= static_cast<double>(n);
    if (epoch + 1 == opt.epochs) {
      P.quantize_f32();
      result.replay_loss = replay_loss(P, c, hand_model, examples, opt.seed);
      if (!std::isfinite(result.replay_loss)) throw NumericError("non-finite replay loss after training");
      rec.replay_loss = result.replay_loss;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.records.push_back(rec);
    if (opt.log) write_record(*opt.log, rec);
  }
  return result;
}

}  // namespace rgk
