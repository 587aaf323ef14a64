#pragma once

// Heuristic ground-truth grasps. The thumb pad is put on the region center
// facing along the inward surface normal, the wrist twist is chosen to keep
// the hand out of the object with the palm toward it, and the other fingers
// flex in fixed increments until their tips come within a few millimeters of
// the surface. Attempts are jittered and gated on CR and IV.

#include <optional>

#include "rgk/hand/forward.hpp"
#include "rgk/metrics/contact.hpp"

namespace rgk {

struct GraspGenOptions {
  std::size_t max_attempts = 20;
  double min_cr = 0.5;
  double max_iv_cm3 = 5.0;
  double tip_distance = 0.003;
  double flex_step = 0.05;
  double flex_limit = 1.5;  // rad per joint
  std::size_t twist_candidates = 12;
  double jitter = 0.15;  // rad
  double iv_pitch = 0.005;
  double sdf_pitch = 0.0025;
  double sdf_band = 0.015;
};

// Per-model quantities the generator needs, derived once.
struct HandRig {
  struct Chain {
    std::array<std::size_t, 3> joints{};
    std::vector<std::size_t> vertices;  // vertices dominated by the chain
    std::size_t tip = 0;
    Vec3 flex_axis{};
  };
  std::vector<Chain> fingers;  // thumb excluded
  std::size_t thumb_chain_root = 0;
  Vec3 pad_center{}, pad_normal{};
  Vec3 palm_center{};
};

inline std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
  std::vector<Vec3> n(mesh.vertices.size(), Vec3{0, 0, 0});
  for (const auto& f : mesh.faces) {
    Vec3 fn = cross(mesh.vertices[f[1]] - mesh.vertices[f[0]], mesh.vertices[f[2]] - mesh.vertices[f[0]]);
    for (auto v : f) n[v] = n[v] + fn;
  }
  for (auto& x : n) x = normalized(x);
  return n;
}

inline HandRig make_hand_rig(const HandModel& model) {
  HandRig rig;
  const auto& J = model.joints;
  auto chain_of = [&](std::size_t root) {
    HandRig::Chain c;
    std::size_t j = root;
    for (int k = 0; k < 3; ++k) {
      c.joints[k] = j;
      auto kids = model.children(j);
      if (k < 2) {
        if (kids.size() != 1) throw DataError("hand model: finger chains must have three joints");
        j = kids[0];
      }
    }
    return c;
  };
  std::vector<HandRig::Chain> chains;
  for (auto root : model.children(0)) chains.push_back(chain_of(root));
  if (chains.size() != 5) throw DataError("hand model: expected five fingers on the wrist");

  // The thumb is the chain carrying the thumb pulp.
  std::size_t thumb = 0;
  double best = -1;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    double w = 0;
    for (auto v : model.thumb_pulp)
      for (auto j : chains[c].joints) w += model.weight(v, j);
    if (w > best) best = w, thumb = c;
  }
  rig.thumb_chain_root = chains[thumb].joints[0];

  // Palm plane from the finger bases.
  std::vector<std::size_t> others;
  for (std::size_t c = 0; c < chains.size(); ++c)
    if (c != thumb) others.push_back(c);
  Vec3 base_mean{}, across{};
  for (auto c : others) base_mean = base_mean + 0.25 * J[chains[c].joints[0]];
  // Spread direction: first finger base minus the base farthest from it.
  std::size_t far = others[0];
  for (auto c : others)
    if (dist2(J[chains[c].joints[0]], J[chains[others[0]].joints[0]]) > dist2(J[chains[far].joints[0]], J[chains[others[0]].joints[0]]))
      far = c;
  across = J[chains[others[0]].joints[0]] - J[chains[far].joints[0]];
  Vec3 along = base_mean - J[0];
  Vec3 pad{};
  for (auto v : model.thumb_pulp) pad = pad + (1.0 / model.thumb_pulp.size()) * model.template_vertices[v];
  TriMesh tmpl = model.template_mesh();
  auto normals = vertex_normals(tmpl);
  Vec3 pad_normal{};
  for (auto v : model.thumb_pulp) pad_normal = pad_normal + normals[v];
  rig.pad_center = pad;
  rig.pad_normal = normalized(pad_normal);
  // The fingers curl toward the side the thumb pad faces.
  Vec3 palm_normal = normalized(cross(along, across));
  if (dot(palm_normal, rig.pad_normal) < 0) palm_normal = -1.0 * palm_normal;
  rig.palm_center = J[0] + 0.5 * along + 0.02 * palm_normal;

  for (auto c : others) {
    HandRig::Chain ch = chains[c];
    Vec3 dir = normalized(J[ch.joints[1]] - J[ch.joints[0]]);
    ch.flex_axis = normalized(cross(dir, palm_normal));
    double far_s = -1;
    for (std::size_t v = 0; v < model.num_vertices(); ++v) {
      double w = 0;
      for (auto j : ch.joints) w += model.weight(v, j);
      if (w < 0.5) continue;
      ch.vertices.push_back(v);
      double s = dot(model.template_vertices[v] - J[ch.joints[0]], dir);
      if (s > far_s) far_s = s, ch.tip = v;
    }
    rig.fingers.push_back(ch);
  }
  return rig;
}

struct GraspResult {
  std::optional<HandParams> params;
  std::size_t attempts = 0;
  double cr = 0, iv_cm3 = 0;
  std::string reason;  // why the last attempt was rejected
};

class GraspGenerator {
 public:
  GraspGenerator(const HandModel& model, const TriMesh& object, const PointCloud& cloud, GraspGenOptions opt = {})
      : model_(model), object_(object), cloud_(cloud), opt_(opt), rig_(make_hand_rig(model)),
        sdf_(object, opt.sdf_pitch, opt.sdf_band) {
    Aabb box = bounds(object.vertices);
    centroid_ = 0.5 * (box.lo + box.hi);
  }

  const HandRig& rig() const { return rig_; }

  GraspResult generate(const ConditionRegion& region, std::uint64_t seed) const {
    GraspResult out;
    for (std::size_t a = 0; a < opt_.max_attempts; ++a) {
      out.attempts = a + 1;
      HandParams p = attempt(region.center, stream_seed(seed, "grasp_attempt", a));
      HandMesh mesh = hand_mesh(model_, p);
      out.cr = cr_rate(mesh.vertices, cloud_, region, model_);
      out.iv_cm3 = interpenetration_volume(hand_trimesh(model_, mesh.vertices), object_, opt_.iv_pitch).cm3;
      if (out.cr < opt_.min_cr) {
        out.reason = detail::concat("CR ", out.cr, " < ", opt_.min_cr);
      } else if (out.iv_cm3 > opt_.max_iv_cm3) {
        out.reason = detail::concat("IV ", out.iv_cm3, " cm3 > ", opt_.max_iv_cm3);
      } else {
        out.params = p;
        out.reason.clear();
        return out;
      }
    }
    return out;
  }

  // One jittered placement plus finger closure, without the acceptance gates.
  HandParams attempt(const Vec3& p_c, std::uint64_t seed) const {
    Rng rng(seed);
    Vec3 n_o = sdf_.normal(p_c);
    if (norm(n_o) == 0) n_o = normalized(p_c - centroid_);
    Vec3 to_center = normalized(centroid_ - p_c);
    Mat3 base = rotation_between(rig_.pad_normal, -1.0 * n_o);
    Vec3 jitter_axis = normalized(Vec3{standard_normal(rng), standard_normal(rng), standard_normal(rng)});
    Mat3 jitter = axis_angle_matrix((opt_.jitter * (2 * uniform01(rng) - 1)) * jitter_axis);
    double offset = 2 * std::numbers::pi * uniform01(rng);

    HandParams best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < opt_.twist_candidates; ++k) {
      double theta = offset + 2 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(opt_.twist_candidates);
      Mat3 R = matmul3(jitter, matmul3(axis_angle_matrix(theta * n_o), base));
      HandParams p = place(R, p_c + 0.001 * n_o);
      auto verts = hand_mesh(model_, p).vertices;
      Vec3 palm_dir = normalized(rotate(R, rig_.palm_center - rig_.pad_center));
      double cost = penetration(verts) / 0.001 - 5.0 * dot(palm_dir, to_center);
      if (cost < best_cost) best_cost = cost, best = p;
    }
    // Back off along the normal while the open hand sits deep in the object.
    for (int step = 0; step < 10; ++step) {
      if (penetration(hand_mesh(model_, best).vertices) < 0.01) break;
      Vec3 t = best.translation() + 0.002 * n_o;
      best.set_translation(t);
    }
    close_fingers(best);
    return best;
  }

 private:
  // Global rotation R with the thumb pad center at `target`.
  HandParams place(const Mat3& R, const Vec3& target) const {
    HandParams p;
    p.set_global_rotation(matrix_axis_angle(R));
    // Rebuild R from the axis-angle so translation matches what hand_forward applies.
    Mat3 Rq = axis_angle_matrix(p.global_rotation());
    p.set_translation(target - rotate(Rq, rig_.pad_center));
    return p;
  }

  // Summed depth (m) of hand vertices inside the object.
  double penetration(const std::vector<Vec3>& verts) const {
    double s = 0;
    for (const auto& v : verts) s += std::max(0.0, -sdf_.sample(v));
    return s;
  }

  void close_fingers(HandParams& p) const {
    std::size_t nf = rig_.fingers.size();
    std::vector<bool> active(nf, true);
    std::vector<double> angle(nf, 0.0);
    auto set = [&](std::size_t f, double a) {
      for (auto j : rig_.fingers[f].joints) p.set_joint_rotation(j, a * rig_.fingers[f].flex_axis);
    };
    while (std::any_of(active.begin(), active.end(), [](bool b) { return b; })) {
      for (std::size_t f = 0; f < nf; ++f)
        if (active[f]) set(f, angle[f] + opt_.flex_step);
      auto verts = hand_mesh(model_, p).vertices;
      for (std::size_t f = 0; f < nf; ++f) {
        if (!active[f]) continue;
        const auto& ch = rig_.fingers[f];
        double deepest = 0;
        for (auto v : ch.vertices) deepest = std::min(deepest, sdf_.sample(verts[v]));
        if (deepest < -0.0015) {
          set(f, angle[f]);
          active[f] = false;
          continue;
        }
        angle[f] += opt_.flex_step;
        if (sdf_.sample(verts[ch.tip]) <= opt_.tip_distance || angle[f] + opt_.flex_step > opt_.flex_limit) active[f] = false;
      }
    }
  }

  const HandModel& model_;
  const TriMesh& object_;
  const PointCloud& cloud_;
  GraspGenOptions opt_;
  HandRig rig_;
  SignedDistanceGrid sdf_;
  Vec3 centroid_{};
};

}  // namespace rgk
