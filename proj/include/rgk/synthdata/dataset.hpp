#pragma once

// Synthetic dataset on disk:
//   <dir>/manifest.json
//   <dir>/objects/obj_NNNN.obj
//   <dir>/grasps.params           one record per accepted sample
// Object seeds, patch seeds and region centers are in the manifest, so the
// model inputs can be rebuilt at any patch configuration.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "rgk/core/parallel.hpp"
#include "rgk/geometry/mesh_io.hpp"
#include "rgk/geometry/sampling.hpp"
#include "rgk/synthdata/grasps.hpp"
#include "rgk/synthdata/objects.hpp"

namespace rgk {

struct DatasetOptions {
  std::size_t n_objects = 10;
  std::size_t grasps_per_object = 5;
  std::uint64_t seed = 0;
  std::size_t points = 2048;  // N
  std::size_t groups = 128;   // G
  std::size_t group_size = 32;  // S
  std::size_t region_size = 16;  // R
  double max_reject_fraction = 0.5;
  GraspGenOptions grasp;

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw UsageError("dataset options: " + what);
    };
    need(n_objects >= 1, "objects must be >= 1");
    need(grasps_per_object >= 1, "grasps per object must be >= 1");
    need(groups >= 1 && group_size >= 1 && groups <= points && group_size <= points, "need 1 <= G, S <= N");
    need(region_size >= 1 && region_size <= groups, "need 1 <= R <= G");
    need(grasps_per_object <= groups, "grasps per object must be <= G (one region center per FPS center)");
    need(max_reject_fraction >= 0 && max_reject_fraction <= 1, "max reject fraction must be in [0, 1]");
  }
};

enum class Split { Train, Val, Test };

NLOHMANN_JSON_SERIALIZE_ENUM(Split, {{Split::Train, "train"}, {Split::Val, "val"}, {Split::Test, "test"}})

struct ObjectRecord {
  std::size_t id = 0;
  std::string file;
  std::uint64_t seed = 0;
  ObjectSpec spec;
  Split split = Split::Train;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ObjectRecord, id, file, seed, spec, split)

struct SampleRecord {
  std::size_t id = 0;
  std::size_t object = 0;
  std::string params_id;
  std::size_t center_index = 0;  // point index in the object cloud
  Vec3 p_c{};
  std::size_t R = 0;
  std::uint64_t cloud_seed = 0, patch_seed = 0, grasp_seed = 0;
  std::size_t attempts = 0;
  double cr = 0, iv_cm3 = 0;
  Split split = Split::Train;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SampleRecord, id, object, params_id, center_index, p_c, R, cloud_seed, patch_seed,
                                   grasp_seed, attempts, cr, iv_cm3, split)

struct SkipRecord {
  std::size_t object = 0;
  std::size_t center_index = 0;
  std::size_t attempts = 0;
  std::string reason;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SkipRecord, object, center_index, attempts, reason)

struct DatasetManifest {
  int version = 1;
  std::uint64_t seed = 0;
  std::size_t N = 0, G = 0, S = 0, R = 0;
  std::size_t grasps_per_object = 0;
  std::string params_file = "grasps.params";
  std::vector<ObjectRecord> objects;
  std::vector<SampleRecord> samples;
  std::vector<SkipRecord> skipped;

  std::vector<std::size_t> objects_in(Split s) const {
    std::vector<std::size_t> out;
    for (const auto& o : objects)
      if (o.split == s) out.push_back(o.id);
    return out;
  }
  std::vector<std::size_t> samples_in(Split s) const {
    std::vector<std::size_t> out;
    for (const auto& r : samples)
      if (r.split == s) out.push_back(r.id);
    return out;
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DatasetManifest, version, seed, N, G, S, R, grasps_per_object, params_file, objects,
                                   samples, skipped)

// 80/10/10 by a seeded shuffle of object ids. Val and test get round(0.1 n)
// each but at least one object once n allows it (test from n = 2, val from
// n = 3); train takes the rest.
inline std::vector<Split> split_objects(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(stream_seed(seed, "split"));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  auto tenth = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(n) + 0.5)));
  std::size_t n_test = n >= 2 ? tenth : 0, n_val = n >= 3 ? tenth : 0;
  std::size_t n_train = n - n_test - n_val;
  std::vector<Split> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[order[i]] = i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
  return out;
}

// Object surface cloud plus its patches at a given configuration.
struct ObjectView {
  TriMesh mesh;
  PointCloud cloud;
  PatchSet patches;
};

inline ObjectView view_object(TriMesh mesh, std::size_t n, std::size_t g, std::size_t s, std::uint64_t cloud_seed,
                              std::uint64_t patch_seed) {
  ObjectView v;
  v.mesh = std::move(mesh);
  v.cloud = sample_exterior_surface(v.mesh, n, cloud_seed);
  v.patches = group_patches(v.cloud, g, s, patch_seed);
  return v;
}

inline std::uint64_t object_seed(std::uint64_t seed, std::size_t i) { return stream_seed(seed, "object", i); }
inline std::uint64_t cloud_seed(std::uint64_t obj_seed) { return stream_seed(obj_seed, "cloud"); }
inline std::uint64_t patch_seed(std::uint64_t obj_seed) { return stream_seed(obj_seed, "patches"); }

// Region centers: k distinct FPS centers chosen uniformly, in draw order.
inline std::vector<std::size_t> draw_region_centers(const PatchSet& ps, std::size_t k, std::uint64_t seed) {
  if (k > ps.G) throw std::invalid_argument("draw_region_centers: more regions than patch centers");
  std::vector<std::size_t> order(ps.G);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(stream_seed(seed, "regions"));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(order[i], order[i + uniform_index(rng, ps.G - i)]);
    out.push_back(ps.center_indices[order[i]]);
  }
  return out;
}

// The mesh as it reads back from OBJ text, so generation sees the stored bytes.
inline TriMesh obj_round_trip(const TriMesh& mesh) {
  std::stringstream ss;
  write_obj(ss, mesh);
  return read_obj(ss);
}

inline std::string object_file_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "objects/obj_%04zu.obj", id);
  return buf;
}

inline void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << nlohmann::json(m).dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    auto m = nlohmann::json::parse(in).get<DatasetManifest>();
    if (m.version != 1) throw DataError(detail::concat(path.string(), ": unsupported manifest version ", m.version));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed manifest: " + e.what());
  }
}

inline DatasetManifest build_dataset(const std::filesystem::path& dir, const DatasetOptions& opt, const HandModel& model,
                                     std::ostream* log = nullptr) {
  opt.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir / "objects", ec);
  if (ec) throw DataError("cannot create " + (dir / "objects").string() + ": " + ec.message());

  DatasetManifest m;
  m.seed = opt.seed;
  m.N = opt.points;
  m.G = opt.groups;
  m.S = opt.group_size;
  m.R = opt.region_size;
  m.grasps_per_object = opt.grasps_per_object;
  auto splits = split_objects(opt.n_objects, opt.seed);

  struct Slot {
    ObjectRecord object;
    TriMesh mesh;
    std::vector<SampleRecord> samples;
    std::vector<HandParams> params;
    std::vector<SkipRecord> skipped;
  };
  std::vector<Slot> slots(opt.n_objects);
  parallel_for(opt.n_objects, [&](std::size_t i) {
    Slot& slot = slots[i];
    ObjectRecord& rec = slot.object;
    rec.id = i;
    rec.file = object_file_name(i);
    rec.seed = object_seed(opt.seed, i);
    rec.split = splits[i];
    slot.mesh = obj_round_trip(gen_object(rec.seed, &rec.spec));
    ObjectView view = view_object(slot.mesh, opt.points, opt.groups, opt.group_size, cloud_seed(rec.seed),
                                  patch_seed(rec.seed));
    GraspGenerator gen(model, view.mesh, view.cloud, opt.grasp);
    auto centers = draw_region_centers(view.patches, opt.grasps_per_object, rec.seed);
    for (std::size_t j = 0; j < centers.size(); ++j) {
      const Vec3& p_c = view.cloud.points[centers[j]];
      ConditionRegion region = select_condition_region(view.patches, p_c, opt.region_size);
      std::uint64_t gseed = stream_seed(rec.seed, "grasp", j);
      GraspResult g = gen.generate(region, gseed);
      if (!g.params) {
        slot.skipped.push_back({i, centers[j], g.attempts, g.reason});
        continue;
      }
      SampleRecord s;
      s.object = i;
      s.center_index = centers[j];
      s.p_c = p_c;
      s.R = opt.region_size;
      s.cloud_seed = cloud_seed(rec.seed);
      s.patch_seed = patch_seed(rec.seed);
      s.grasp_seed = gseed;
      s.attempts = g.attempts;
      s.cr = g.cr;
      s.iv_cm3 = g.iv_cm3;
      s.split = rec.split;
      slot.samples.push_back(s);
      slot.params.push_back(*g.params);
    }
  });

  std::vector<std::pair<std::string, HandParams>> records;
  for (auto& slot : slots) {
    write_obj(dir / slot.object.file, slot.mesh);
    m.objects.push_back(slot.object);
    for (std::size_t k = 0; k < slot.samples.size(); ++k) {
      SampleRecord s = slot.samples[k];
      s.id = m.samples.size();
      char buf[32];
      std::snprintf(buf, sizeof buf, "g%06zu", s.id);
      s.params_id = buf;
      m.samples.push_back(s);
      records.emplace_back(s.params_id, slot.params[k]);
    }
    for (auto& sk : slot.skipped) {
      if (log) *log << "skipped object " << sk.object << " center " << sk.center_index << ": " << sk.reason << '\n';
      m.skipped.push_back(sk);
    }
  }
  std::size_t total = opt.n_objects * opt.grasps_per_object;
  double rejected = static_cast<double>(m.skipped.size()) / static_cast<double>(total);
  if (rejected > opt.max_reject_fraction)
    throw DataError(detail::concat("grasp rejection rate ", rejected, " (", m.skipped.size(), " of ", total,
                                   ") exceeds ", opt.max_reject_fraction, "; last reason: ", m.skipped.back().reason));
  {
    std::ofstream out(dir / m.params_file, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / m.params_file).string());
    write_params(out, records);
  }
  write_manifest(dir / "manifest.json", m);
  return m;
}

// A dataset opened for reading.
class Dataset {
 public:
  explicit Dataset(std::filesystem::path dir) : dir_(std::move(dir)), manifest_(read_manifest(dir_ / "manifest.json")) {
    std::ifstream in(dir_ / manifest_.params_file, std::ios::binary);
    if (!in) throw DataError("cannot open " + (dir_ / manifest_.params_file).string());
    for (auto& [id, p] : read_params(in, (dir_ / manifest_.params_file).string())) params_.emplace(id, p);
    for (std::size_t i = 0; i < manifest_.objects.size(); ++i)
      if (manifest_.objects[i].id != i) throw DataError("manifest: object ids must be 0..n-1 in order");
    for (std::size_t i = 0; i < manifest_.samples.size(); ++i) {
      const auto& s = manifest_.samples[i];
      if (s.id != i) throw DataError("manifest: sample ids must be 0..n-1 in order");
      if (s.object >= manifest_.objects.size()) throw DataError(detail::concat("manifest: sample ", i, " names a missing object"));
      if (!params_.count(s.params_id)) throw DataError("manifest: params record '" + s.params_id + "' missing");
    }
  }

  const DatasetManifest& manifest() const { return manifest_; }
  const std::filesystem::path& dir() const { return dir_; }

  TriMesh object_mesh(std::size_t id) const {
    TriMesh m = read_mesh(dir_ / manifest_.objects.at(id).file);
    m.validate();
    return m;
  }

  // Cloud and patches at the dataset's own configuration, or another one.
  ObjectView object_view(std::size_t id) const { return object_view(id, manifest_.N, manifest_.G, manifest_.S); }
  ObjectView object_view(std::size_t id, std::size_t n, std::size_t g, std::size_t s) const {
    std::uint64_t seed = manifest_.objects.at(id).seed;
    return view_object(object_mesh(id), n, g, s, cloud_seed(seed), patch_seed(seed));
  }

  const HandParams& params(const SampleRecord& s) const { return params_.at(s.params_id); }

 private:
  std::filesystem::path dir_;
  DatasetManifest manifest_;
  std::map<std::string, HandParams> params_;
};

}  // namespace rgk
