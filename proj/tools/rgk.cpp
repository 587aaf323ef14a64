// rgk: dataset synthesis, pretraining, training, generation and evaluation.
//
// Config precedence: built-in profile < --config file < command-line flags.
// Exit codes: 0 ok, 2 usage, 3 data or corrupt input, 4 numeric failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "rgk/io/checkpoint.hpp"
#include "rgk/metrics/evaluate.hpp"
#include "rgk/model/train.hpp"
#include "rgk/pretrain/mae.hpp"

using namespace rgk;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string profile = "paper";
  std::string config_path;
  std::string hand_path;
  std::uint64_t seed = 0;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c, bool model_config = true) {
  cmd->add_option("--seed", c.seed, "Global seed");
  cmd->add_option("--hand", c.hand_path, "Hand model container (default: bundled stand-in)");
  cmd->add_flag("--quiet", c.quiet, "Suppress progress output");
  if (model_config) {
    cmd->add_option("--profile", c.profile, "Base model config: paper, desk or toy")->check(CLI::IsMember({"paper", "desk", "toy"}));
    cmd->add_option("--config", c.config_path, "JSON file with ModelConfig keys");
  }
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw UsageError("cannot open config " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

ModelConfig base_config(const Common& c) {
  ModelConfig cfg = c.profile == "toy" ? ModelConfig::toy() : c.profile == "desk" ? ModelConfig::desk() : ModelConfig{};
  if (!c.config_path.empty()) cfg = merge_config(cfg, read_json(c.config_path));
  return cfg;
}

HandModel hand_model(const Common& c) {
  if (c.hand_path.empty()) return make_stand_in_hand();
  return load_hand_model(fs::path(c.hand_path));
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

// The effective configuration of a run, written next to its outputs.
void write_run_config(const fs::path& dir, const std::string& command, const nlohmann::json& settings) {
  nlohmann::json j = {{"command", command}, {"settings", settings}};
  write_text(dir / "run_config.json", j.dump(2) + "\n");
}

std::ostream& progress(const Common& c) {
  static std::ofstream null;
  return c.quiet ? null : std::cerr;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string out;
  DatasetOptions opt;
};

int cmd_synth(SynthArgs& a) {
  a.opt.seed = a.common.seed;
  HandModel hm = hand_model(a.common);
  fs::path out(a.out);
  DatasetManifest m = build_dataset(out, a.opt, hm, &progress(a.common));
  write_run_config(out, "synth",
                   {{"objects", a.opt.n_objects}, {"grasps", a.opt.grasps_per_object}, {"seed", a.opt.seed},
                    {"points", a.opt.points}, {"groups", a.opt.groups}, {"group_size", a.opt.group_size},
                    {"region_size", a.opt.region_size}, {"hand", a.common.hand_path}});
  progress(a.common) << "wrote " << m.samples.size() << " samples (" << m.skipped.size() << " skipped) to "
                     << (out / "manifest.json").string() << '\n';
  return 0;
}

struct PretrainArgs {
  Common common;
  std::string data, out;
  std::optional<double> mask_ratio, lr;
  PretrainOptions opt;
};

int cmd_pretrain(PretrainArgs& a) {
  ModelConfig c = base_config(a.common);
  if (a.mask_ratio) c.mask_ratio = *a.mask_ratio;
  if (a.lr) c.lr = *a.lr;
  c.validate();
  a.opt.seed = a.common.seed;
  Dataset ds{fs::path(a.data)};
  std::vector<PointCloud> clouds;
  for (auto id : ds.manifest().objects_in(Split::Train)) clouds.push_back(ds.object_view(id, c.N, 1, 1).cloud);
  fs::path out(a.out);
  make_out_dir(out);
  std::ofstream log(out / "pretrain_log.jsonl", std::ios::binary);
  if (!log) throw DataError("cannot write " + (out / "pretrain_log.jsonl").string());
  a.opt.log = &log;
  PretrainResult r = pretrain_run(clouds, c, a.opt);
  make_checkpoint(std::move(r.params), c, "mae", a.common.seed).container().save(out / "pretrain.ckpt");
  write_run_config(out, "pretrain",
                   {{"data", a.data}, {"model", c}, {"epochs", a.opt.epochs}, {"batch", a.opt.batch},
                    {"heldout_fraction", a.opt.heldout_fraction}, {"eval_ratio", a.opt.eval_ratio}, {"seed", a.opt.seed}});
  progress(a.common) << "held-out masked Chamfer " << r.initial_heldout << " -> " << r.records.back().heldout_loss
                     << " over " << r.records.size() << " epochs\n";
  return 0;
}

struct TrainArgs {
  Common common;
  std::string data, out, init_oenc;
  std::optional<double> lr;
  bool no_condition_mask = false;
  TrainOptions opt;
};

int cmd_train(TrainArgs& a) {
  ModelConfig c = base_config(a.common);
  if (a.lr) c.lr = *a.lr;
  if (a.no_condition_mask) c.use_condition_mask = false;
  c.validate();
  a.opt.seed = a.common.seed;
  HandModel hm = hand_model(a.common);
  ParamStore P = init_cvae(c, a.common.seed);
  if (!a.init_oenc.empty()) {
    Checkpoint pre = load_checkpoint(a.init_oenc, "mae");
    Container ck;
    pre.params.store(ck);
    std::size_t n = P.load(ck, "oenc.");
    progress(a.common) << "loaded " << n << " O-Enc tensors from " << a.init_oenc << '\n';
  }
  Dataset ds{fs::path(a.data)};
  auto examples = make_examples(ds, Split::Train, c, hm, a.common.seed);
  fs::path out(a.out);
  make_out_dir(out);
  std::ofstream log(out / "train_log.jsonl", std::ios::binary);
  if (!log) throw DataError("cannot write " + (out / "train_log.jsonl").string());
  a.opt.log = &log;
  TrainResult r = train_cvae(std::move(P), c, hm, examples, a.opt);
  make_checkpoint(std::move(r.params), c, "cvae", a.common.seed).container().save(out / "model.ckpt");
  write_run_config(out, "train",
                   {{"data", a.data}, {"model", c}, {"epochs", a.opt.epochs}, {"batch", a.opt.batch},
                    {"init_oenc", a.init_oenc}, {"seed", a.opt.seed}, {"examples", examples.size()},
                    {"hand", a.common.hand_path}});
  progress(a.common) << "trained on " << examples.size() << " examples; replay loss " << r.replay_loss << '\n';
  return 0;
}

struct ReplayArgs {
  Common common;
  std::string data, checkpoint;
};

// Recomputes the training-set replay loss from a checkpoint.
int cmd_replay(ReplayArgs& a) {
  Checkpoint m = load_checkpoint(a.checkpoint, "cvae");
  HandModel hm = hand_model(a.common);
  Dataset ds{fs::path(a.data)};
  auto examples = make_examples(ds, Split::Train, m.config, hm, a.common.seed);
  if (examples.empty()) throw DataError("training split is empty");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", replay_loss(m.params, m.config, hm, examples, a.common.seed));
  std::cout << buf << '\n';
  return 0;
}

struct GenerateArgs {
  Common common;
  std::string checkpoint, object, out;
  std::vector<double> center;
  std::optional<std::size_t> center_index;
  std::optional<std::size_t> region_size;
  std::size_t samples = 20;
};

int cmd_generate(GenerateArgs& a) {
  if (a.center.empty() == !a.center_index) throw UsageError("generate: give exactly one of --center or --center-index");
  Checkpoint m = load_checkpoint(a.checkpoint, "cvae");
  ModelConfig& c = m.config;
  if (a.region_size) c.R = *a.region_size;
  if (c.R < 1 || c.R > c.G) throw UsageError(detail::concat("generate: region size must lie in [1, ", c.G, "]"));
  if (a.samples == 0) throw UsageError("generate: --samples must be >= 1");
  HandModel hm = hand_model(a.common);
  TriMesh mesh = read_mesh(a.object);
  mesh.validate();
  ObjectView view = view_object(mesh, c.N, c.G, c.S, stream_seed(a.common.seed, "cloud"), stream_seed(a.common.seed, "patches"));
  Vec3 p_c;
  if (a.center_index) {
    if (*a.center_index >= view.cloud.size())
      throw UsageError(detail::concat("generate: --center-index ", *a.center_index, " outside [0, ", view.cloud.size(), ")"));
    p_c = view.cloud.points[*a.center_index];
  } else {
    p_c = {a.center[0], a.center[1], a.center[2]};
  }
  ConditionRegion region = select_condition_region(view.patches, p_c, c.R);
  NoGradScope no_grad;
  Tensor z_c = condition_vector(m.params, c, make_patch_input(view.patches, c.coord_scale), region.mask);
  fs::path out(a.out);
  make_out_dir(out);
  std::vector<std::pair<std::string, HandParams>> records;
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < a.samples; ++i) {
    std::uint64_t seed = stream_seed(a.common.seed, "sample", i);
    GraspSample s = generate_from_condition(m.params, c, hm, z_c, seed);
    if (!s.params.finite()) throw NumericError(detail::concat("generate: non-finite parameters in sample ", i));
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03zu", i);
    write_obj(out / (std::string(name) + ".obj"), hand_trimesh(hm, s.mesh.vertices));
    records.emplace_back(name, s.params);
    samples.push_back({{"id", name}, {"seed", seed}, {"z", s.z},
                       {"cr", cr_rate(s.mesh.vertices, view.cloud, region, hm)}});
  }
  {
    std::ofstream pf(out / "samples.params", std::ios::binary);
    if (!pf) throw DataError("cannot write " + (out / "samples.params").string());
    write_params(pf, records);
  }
  std::vector<std::size_t> groups;
  for (std::size_t g = 0; g < region.mask.size(); ++g)
    if (region.mask[g]) groups.push_back(g);
  write_text(out / "region.json", nlohmann::json{{"p_c", p_c}, {"R", c.R}, {"patches", groups}, {"samples", samples}}.dump(2) + "\n");
  write_run_config(out, "generate",
                   {{"checkpoint", a.checkpoint}, {"object", a.object}, {"p_c", p_c}, {"R", c.R}, {"samples", a.samples},
                    {"seed", a.common.seed}, {"hand", a.common.hand_path}});
  progress(a.common) << "wrote " << a.samples << " samples to " << out.string() << '\n';
  return 0;
}

struct EvaluateArgs {
  Common common;
  std::string checkpoint, data, out, split = "test";
  bool no_sim = false;
  EvalOptions opt;
};

int cmd_evaluate(EvaluateArgs& a) {
  Checkpoint m = load_checkpoint(a.checkpoint, "cvae");
  HandModel hm = hand_model(a.common);
  Dataset ds{fs::path(a.data)};
  a.opt.seed = a.common.seed;
  a.opt.simulate = !a.no_sim;
  a.opt.split = nlohmann::json(a.split).get<Split>();
  MetricsReport rep = evaluate(ds, m.params, m.config, hm, a.opt);
  fs::path out(a.out);
  make_out_dir(out);
  nlohmann::json j = report_json(rep);
  j["aggregate"]["split"] = a.split;
  write_text(out / "report.json", j.dump(2) + "\n");
  std::ostringstream csv;
  write_report_csv(csv, rep);
  write_text(out / "report.csv", csv.str());
  write_run_config(out, "evaluate",
                   {{"checkpoint", a.checkpoint}, {"data", a.data}, {"split", a.split}, {"regions", a.opt.regions},
                    {"samples", a.opt.samples}, {"simulate", a.opt.simulate}, {"seed", a.opt.seed},
                    {"contact_threshold", a.opt.contact_threshold}, {"iv_pitch", a.opt.iv_pitch}, {"hand", a.common.hand_path}});
  progress(a.common) << "CR " << rep.cr << ", CA " << rep.ca << " cm2, IV " << rep.iv << " cm3\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rgk: region-conditioned hand grasp generation"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Build a synthetic hand-object dataset");
  add_common(s, synth.common, false);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--objects", synth.opt.n_objects, "Number of objects")->check(CLI::PositiveNumber);
  s->add_option("--grasps", synth.opt.grasps_per_object, "Grasps per object")->check(CLI::PositiveNumber);
  s->add_option("--points", synth.opt.points, "Surface points per object (N)");
  s->add_option("--groups", synth.opt.groups, "Patches per object (G)");
  s->add_option("--group-size", synth.opt.group_size, "Points per patch (S)");
  s->add_option("--region-size", synth.opt.region_size, "Patches per condition region (R)");

  PretrainArgs pre;
  auto* p = app.add_subcommand("pretrain", "Masked-autoencoder pretraining of the object encoder");
  add_common(p, pre.common);
  p->add_option("--data", pre.data, "Dataset directory")->required();
  p->add_option("--out", pre.out, "Output directory")->required();
  p->add_option("--mask-ratio", pre.mask_ratio, "Masking ratio (default 0.6)");
  p->add_option("--epochs", pre.opt.epochs, "Epochs")->check(CLI::PositiveNumber);
  p->add_option("--batch", pre.opt.batch, "Objects per update")->check(CLI::PositiveNumber);
  p->add_option("--lr", pre.lr, "Initial learning rate (default 5e-4)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the conditional VAE");
  add_common(t, train.common);
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--init-oenc", train.init_oenc, "Pretraining checkpoint for the object encoder");
  t->add_option("--epochs", train.opt.epochs, "Epochs")->check(CLI::PositiveNumber);
  t->add_option("--batch", train.opt.batch, "Examples per update")->check(CLI::PositiveNumber);
  t->add_option("--lr", train.lr, "Initial learning rate (default 5e-4)");
  t->add_flag("--no-condition-mask", train.no_condition_mask, "Ablation: condition on the whole object");

  ReplayArgs replay;
  auto* r = app.add_subcommand("replay", "Recompute the training-set replay loss of a checkpoint");
  add_common(r, replay.common, false);
  r->add_option("--data", replay.data, "Dataset directory")->required();
  r->add_option("--checkpoint", replay.checkpoint, "Model checkpoint")->required();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate grasps for an object region");
  add_common(g, gen.common, false);
  g->add_option("--checkpoint", gen.checkpoint, "Model checkpoint")->required();
  g->add_option("--object", gen.object, "Object mesh (.obj or .ply)")->required();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--center", gen.center, "Region center x y z (m)")->expected(3)->delimiter(',');
  g->add_option("--center-index", gen.center_index, "Region center as an object cloud point index");
  g->add_option("--region-size", gen.region_size, "Patches per region (default from the checkpoint, 16)");
  g->add_option("--samples", gen.samples, "Number of samples");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset split");
  add_common(e, ev.common, false);
  e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--split", ev.split, "Dataset split")->check(CLI::IsMember({"train", "val", "test"}));
  e->add_option("--regions", ev.opt.regions, "Region groups per object");
  e->add_option("--samples", ev.opt.samples, "Samples per region");
  e->add_option("--contact-threshold", ev.opt.contact_threshold, "Contact distance (m)");
  e->add_option("--iv-pitch", ev.opt.iv_pitch, "Voxel pitch for interpenetration volume (m)");
  e->add_flag("--no-sim", ev.no_sim, "Skip the grasp displacement simulation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? 0 : 2;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*p) return cmd_pretrain(pre);
    if (*t) return cmd_train(train);
    if (*r) return cmd_replay(replay);
    if (*g) return cmd_generate(gen);
    if (*e) return cmd_evaluate(ev);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return static_cast<int>(err.code());
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
