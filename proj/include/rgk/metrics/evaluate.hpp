#pragma once

// Evaluation protocol: per object, seeded region draws with a fixed number of
// generations each; per-sample contact metrics, per-group diversity, and
// testset-wide aggregates.

#include <numeric>
#include <ostream>

#include "rgk/metrics/contact.hpp"
#include "rgk/metrics/simulate.hpp"
#include "rgk/model/network.hpp"
#include "rgk/synthdata/dataset.hpp"

namespace rgk {

struct EvalOptions {
  std::size_t regions = 5;
  std::size_t samples = 20;
  std::uint64_t seed = 0;
  Split split = Split::Test;
  bool simulate = true;        // GD/GDR; the most expensive part
  bool zero_latent = false;    // decode the prior mean instead of sampling
  double contact_threshold = 0.005;
  double iv_pitch = 0.005;
  SimConfig sim;

  void validate() const {
    if (regions == 0 || samples == 0) throw UsageError("evaluate: regions and samples must be >= 1");
    if (!(contact_threshold > 0) || !(iv_pitch > 0)) throw UsageError("evaluate: threshold and pitch must be > 0");
    sim.validate();
  }
};

struct SampleRow {
  std::size_t object = 0, group = 0, sample = 0;
  std::uint64_t seed = 0;
  double cr = 0, ca = 0, iv = 0;
  std::optional<double> gd;  // m; empty when skipped or unstable
  bool sim_unstable = false;
};

struct GroupRow {
  std::size_t object = 0, group = 0;
  std::size_t center_index = 0;
  Vec3 p_c{};
  double cr = 0, ca = 0, iv = 0;
  std::optional<double> div_dist;  // mm; needs exactly 20 samples
};

struct MetricsReport {
  std::size_t objects = 0, regions = 0, samples = 0;
  std::uint64_t seed = 0;
  double cr = 0;  // mean of per-group means
  double ca = 0, iv = 0;
  std::optional<double> cca_iv;
  std::optional<double> div_dist;
  std::optional<double> gd, reference_gd, gdr;  // over stable simulations
  std::size_t unstable_sims = 0, unstable_reference_sims = 0;
  bool watertight = true;
  std::vector<GroupRow> groups;
  std::vector<SampleRow> rows;
};

inline std::uint64_t sample_seed(std::uint64_t seed, std::size_t object, std::size_t group, std::size_t i) {
  return stream_seed(stream_seed(stream_seed(seed, "sample", object), "group", group), "draw", i);
}

inline MetricsReport evaluate(const Dataset& ds, const ParamStore& P, const ModelConfig& c, const HandModel& hand_model,
                              const EvalOptions& opt) {
  opt.validate();
  c.validate();
  const auto& m = ds.manifest();
  auto objects = m.objects_in(opt.split);
  if (objects.empty()) throw DataError("evaluate: the selected split has no objects");
  MetricsReport rep;
  rep.objects = objects.size();
  rep.regions = opt.regions;
  rep.samples = opt.samples;
  rep.seed = opt.seed;
  const std::size_t per_object = opt.regions * opt.samples;
  rep.groups.resize(objects.size() * opt.regions);
  rep.rows.resize(objects.size() * per_object);
  std::vector<std::uint8_t> watertight(rep.rows.size(), 1);

  parallel_for(objects.size(), [&](std::size_t k) {
    NoGradScope no_grad;
    std::size_t obj = objects[k];
    ObjectView view = ds.object_view(obj, c.N, c.G, c.S);
    PatchInput input = make_patch_input(view.patches, c.coord_scale);
    auto centers = draw_region_centers(view.patches, opt.regions, stream_seed(opt.seed, "eval_regions", obj));
    for (std::size_t g = 0; g < opt.regions; ++g) {
      GroupRow& grp = rep.groups[k * opt.regions + g];
      grp.object = obj;
      grp.group = g;
      grp.center_index = centers[g];
      grp.p_c = view.cloud.points[centers[g]];
      ConditionRegion region = select_condition_region(view.patches, grp.p_c, c.R);
      Tensor z_c = condition_vector(P, c, input, region.mask);
      std::vector<std::vector<Vec3>> meshes;
      for (std::size_t i = 0; i < opt.samples; ++i) {
        std::size_t slot = k * per_object + g * opt.samples + i;
        SampleRow& row = rep.rows[slot];
        row.object = obj;
        row.group = g;
        row.sample = i;
        row.seed = sample_seed(opt.seed, obj, g, i);
        GraspSample s = generate_from_condition(P, c, hand_model, z_c, row.seed, opt.zero_latent);
        TriMesh hand = hand_trimesh(hand_model, s.mesh.vertices);
        row.cr = cr_rate(s.mesh.vertices, view.cloud, region, hand_model);
        row.ca = contact_area(hand, view.mesh, opt.contact_threshold);
        VolumeResult iv = interpenetration_volume(hand, view.mesh, opt.iv_pitch);
        row.iv = iv.cm3;
        watertight[slot] = iv.watertight;
        if (opt.simulate) {
          SimConfig sc = opt.sim;
          sc.seed = row.seed;
          // A deeply embedded grasp can make the drop unstable; that sample
          // is left out of the GD means instead of ending the evaluation.
          try {
            row.gd = grasp_displacement(hand, view.mesh, sc);
          } catch (const NumericError&) {
            row.sim_unstable = true;
          }
        }
        grp.cr += row.cr / static_cast<double>(opt.samples);
        grp.ca += row.ca / static_cast<double>(opt.samples);
        grp.iv += row.iv / static_cast<double>(opt.samples);
        meshes.push_back(std::move(s.mesh.vertices));
      }
      if (opt.samples == kDivDistSamples) grp.div_dist = div_dist(meshes, stream_seed(stream_seed(opt.seed, "div_split", obj), "group", g));
    }
  });

  std::vector<ContactRow> contact;
  for (const auto& r : rep.rows) {
    rep.ca += r.ca;
    rep.iv += r.iv;
    contact.push_back({r.cr, r.ca, r.iv});
  }
  double n_rows = static_cast<double>(rep.rows.size()), n_groups = static_cast<double>(rep.groups.size());
  rep.ca /= n_rows;
  rep.iv /= n_rows;
  for (const auto& g : rep.groups) rep.cr += g.cr / n_groups;
  rep.cca_iv = cca_iv(contact);
  if (opt.samples == kDivDistSamples) {
    double d = 0;
    for (const auto& g : rep.groups) d += *g.div_dist;
    rep.div_dist = d / n_groups;
  }
  rep.watertight = std::all_of(watertight.begin(), watertight.end(), [](std::uint8_t w) { return w != 0; });

  if (opt.simulate) {
    std::vector<double> gen;
    for (const auto& r : rep.rows) {
      if (r.gd) gen.push_back(*r.gd);
      rep.unstable_sims += r.sim_unstable;
    }
    if (!gen.empty()) rep.gd = std::accumulate(gen.begin(), gen.end(), 0.0) / static_cast<double>(gen.size());
    // Reference: the dataset's own grasps on the same objects.
    std::vector<std::size_t> refs;
    for (const auto& s : m.samples)
      if (s.split == opt.split) refs.push_back(s.id);
    if (!refs.empty()) {
      std::vector<std::optional<double>> ref_slots(refs.size());
      parallel_for(refs.size(), [&](std::size_t k) {
        const SampleRecord& s = m.samples[refs[k]];
        TriMesh object = ds.object_mesh(s.object);
        HandMesh mesh = hand_mesh(hand_model, ds.params(s));
        SimConfig sc = opt.sim;
        sc.seed = stream_seed(opt.seed, "reference_sim", s.id);
        try {
          ref_slots[k] = grasp_displacement(hand_trimesh(hand_model, mesh.vertices), object, sc);
        } catch (const NumericError&) {
        }
      });
      std::vector<double> ref_gd;
      for (const auto& x : ref_slots) {
        if (x) ref_gd.push_back(*x);
        rep.unstable_reference_sims += !x;
      }
      if (!ref_gd.empty())
        rep.reference_gd = std::accumulate(ref_gd.begin(), ref_gd.end(), 0.0) / static_cast<double>(ref_gd.size());
      if (!gen.empty() && rep.reference_gd && *rep.reference_gd > 0) rep.gdr = gdr(gen, ref_gd);
    }
  }
  return rep;
}

inline nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

inline nlohmann::json report_json(const MetricsReport& r) {
  nlohmann::json agg = {{"objects", r.objects},
                        {"regions", r.regions},
                        {"samples", r.samples},
                        {"seed", r.seed},
                        {"cr", r.cr},
                        {"ca_cm2", r.ca},
                        {"iv_cm3", r.iv},
                        {"cca_iv", optional_json(r.cca_iv)},
                        {"iv_zero", !r.cca_iv.has_value()},
                        {"div_dist_mm", optional_json(r.div_dist)},
                        {"gd_m", optional_json(r.gd)},
                        {"reference_gd_m", optional_json(r.reference_gd)},
                        {"gdr", optional_json(r.gdr)},
                        {"unstable_sims", r.unstable_sims},
                        {"unstable_reference_sims", r.unstable_reference_sims},
                        {"watertight", r.watertight}};
  nlohmann::json groups = nlohmann::json::array(), rows = nlohmann::json::array();
  for (const auto& g : r.groups)
    groups.push_back({{"object", g.object},
                      {"group", g.group},
                      {"center_index", g.center_index},
                      {"p_c", g.p_c},
                      {"cr", g.cr},
                      {"ca_cm2", g.ca},
                      {"iv_cm3", g.iv},
                      {"div_dist_mm", optional_json(g.div_dist)}});
  for (const auto& s : r.rows)
    rows.push_back({{"object", s.object},
                    {"group", s.group},
                    {"sample", s.sample},
                    {"seed", s.seed},
                    {"cr", s.cr},
                    {"ca_cm2", s.ca},
                    {"iv_cm3", s.iv},
                    {"gd_m", optional_json(s.gd)},
                    {"sim_unstable", s.sim_unstable}});
  return {{"aggregate", agg}, {"groups", groups}, {"samples", rows}};
}

// One line per sample; empty gd_m when the simulation was skipped or unstable.
inline void write_report_csv(std::ostream& out, const MetricsReport& r) {
  out << "object,group,sample,seed,cr,ca_cm2,iv_cm3,gd_m\n";
  char buf[160];
  for (const auto& s : r.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%llu,%.17g,%.17g,%.17g,", s.object, s.group, s.sample,
                  static_cast<unsigned long long>(s.seed), s.cr, s.ca, s.iv);
    out << buf;
    if (s.gd) {
      std::snprintf(buf, sizeof buf, "%.17g", *s.gd);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace rgk
