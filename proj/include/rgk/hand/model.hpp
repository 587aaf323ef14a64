#pragma once

// Articulated hand model: template surface, 16-joint skeleton, skinning
// weights and the thumb pulp vertex set. Loaded from a container file or
// generated procedurally (the bundled stand-in hand).
//
// Joint order: 0 wrist, 1-3 index, 4-6 middle, 7-9 pinky, 10-12 ring,
// 13-15 thumb. Rest frame: wrist at the origin, fingers along +y, palm
// facing -z, thumb on the +x side. Units are meters.

#include <filesystem>
#include <numbers>
#include <optional>

#include "rgk/geometry/primitives.hpp"
#include "rgk/geometry/solid.hpp"
#include "rgk/io/container.hpp"

namespace rgk {

inline constexpr std::size_t kHandVertices = 778;
inline constexpr std::size_t kHandJoints = 16;
inline constexpr std::size_t kHandParams = 6 + 3 * (kHandJoints - 1);

struct HandModel {
  std::vector<Vec3> template_vertices;
  std::vector<Face> faces;
  std::vector<Vec3> joints;
  std::vector<int> parents;     // parents[0] == -1
  std::vector<double> weights;  // V x J, row-major
  std::vector<std::size_t> thumb_pulp;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  std::size_t num_vertices() const { return template_vertices.size(); }
  std::size_t num_joints() const { return joints.size(); }
  double weight(std::size_t v, std::size_t j) const { return weights[v * joints.size() + j]; }

  TriMesh template_mesh() const { return TriMesh{template_vertices, faces}; }

  std::vector<std::size_t> children(std::size_t j) const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < parents.size(); ++c)
      if (parents[c] == static_cast<int>(j)) out.push_back(c);
    return out;
  }

  // Normalizes weight rows and derives the edge list; throws DataError on
  // any structural problem.
  void finalize() {
    std::size_t V = template_vertices.size(), J = joints.size();
    if (V != kHandVertices) throw DataError(detail::concat("hand model: expected 778 vertices, got ", V));
    if (J != kHandJoints) throw DataError(detail::concat("hand model: expected 16 joints, got ", J));
    if (parents.size() != J || parents[0] != -1) throw DataError("hand model: joint 0 must be the root");
    for (std::size_t j = 1; j < J; ++j)
      if (parents[j] < 0 || parents[j] >= static_cast<int>(j))
        throw DataError(detail::concat("hand model: joint ", j, " has invalid parent ", parents[j]));
    if (weights.size() != V * J) throw DataError("hand model: weight matrix must be 778 x 16");
    for (std::size_t v = 0; v < V; ++v) {
      double s = 0;
      for (std::size_t j = 0; j < J; ++j) {
        double w = weights[v * J + j];
        if (!(w >= 0.0) || !std::isfinite(w)) throw DataError(detail::concat("hand model: bad weight at vertex ", v));
        s += w;
      }
      if (s <= 0) throw DataError(detail::concat("hand model: vertex ", v, " has zero total weight"));
      for (std::size_t j = 0; j < J; ++j) weights[v * J + j] /= s;
    }
    if (thumb_pulp.empty()) throw DataError("hand model: empty thumb pulp set");
    for (auto i : thumb_pulp)
      if (i >= V) throw DataError(detail::concat("hand model: thumb pulp index ", i, " out of range"));
    TriMesh m = template_mesh();
    m.validate();
    edges = mesh_edges(m);
  }
};

namespace detail {

struct FingerSpec {
  std::size_t first_joint;  // three consecutive joints
  Vec3 base_joint;          // first joint position
  Vec3 dir;
  std::array<double, 3> lengths;  // joint-to-joint and last joint to tip
  double r0, r1;                  // radius at base and tip
  double embed;                   // tube extends this far behind the first joint
};

inline std::vector<FingerSpec> stand_in_fingers() {
  // index, middle, pinky, ring, thumb
  return {
      {1, {0.028, 0.092, 0.0}, normalized({0.06, 1.0, 0.0}), {0.040, 0.025, 0.022}, 0.0095, 0.0080, 0.014},
      {4, {0.008, 0.096, 0.0}, {0.0, 1.0, 0.0}, {0.044, 0.028, 0.023}, 0.0100, 0.0085, 0.014},
      {7, {-0.030, 0.085, 0.0}, normalized({-0.10, 1.0, 0.0}), {0.032, 0.020, 0.019}, 0.0085, 0.0070, 0.014},
      {10, {-0.012, 0.093, 0.0}, normalized({-0.04, 1.0, 0.0}), {0.041, 0.027, 0.022}, 0.0095, 0.0080, 0.014},
      {13, {0.022, 0.022, -0.004}, normalized({0.55, 0.8, -0.25}), {0.040, 0.032, 0.028}, 0.0110, 0.0092, 0.006},
  };
}

// Direction the thumb pad faces at rest: toward the palm side and the fingers.
inline Vec3 stand_in_pulp_normal(const Vec3& thumb_dir) {
  Vec3 n{-0.6, 0.0, -1.0};
  return normalized(n - dot(n, thumb_dir) * thumb_dir);
}

inline double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3 - 2 * x);
}

}  // namespace detail

// Procedural stand-in: an ellipsoidal palm (128 vertices) and five closed
// finger tubes (130 vertices each).
inline HandModel make_stand_in_hand() {
  constexpr std::size_t J = kHandJoints;
  HandModel h;
  h.parents = {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 0, 10, 11, 0, 13, 14};
  h.joints.assign(J, Vec3{0, 0, 0});
  TriMesh surf;
  std::vector<double> weights;

  // Palm: 9 rings of 14 plus two poles, long axis along +y, rigid with the wrist.
  {
    std::vector<std::pair<double, double>> prof;
    const std::size_t stacks = 10;
    for (std::size_t i = 0; i <= stacks; ++i) {
      double t = std::numbers::pi * (1.0 - static_cast<double>(i) / stacks);
      prof.push_back({i == 0 || i == stacks ? 0.0 : std::sin(t), std::cos(t)});
    }
    TriMesh palm = lathe(prof, 14);
    for (auto& v : palm.vertices) v = Vec3{0.042 * v[0], 0.05 + 0.052 * v[2], -0.014 * v[1]};
    append_mesh(surf, palm);
    for (std::size_t i = 0; i < palm.vertices.size(); ++i) {
      weights.insert(weights.end(), J, 0.0);
      weights[weights.size() - J] = 1.0;
    }
  }

  // Fingers: 16 rings of 8 plus two poles. A vertex's weights follow its
  // axial position, blended over +-5 mm around each joint.
  const double blend = 0.005;
  const std::size_t rings = 16, slices = 8;
  for (const auto& f : detail::stand_in_fingers()) {
    double len = f.embed + f.lengths[0] + f.lengths[1] + f.lengths[2];
    std::array<double, 3> b{f.embed, f.embed + f.lengths[0], f.embed + f.lengths[0] + f.lengths[1]};
    std::array<std::size_t, 4> owner{0, f.first_joint, f.first_joint + 1, f.first_joint + 2};
    for (int k = 0; k < 3; ++k) h.joints[f.first_joint + k] = f.base_joint + (b[k] - f.embed) * f.dir;

    std::vector<std::pair<double, double>> prof{{0.0, 0.0}};
    for (std::size_t k = 1; k <= rings; ++k) {
      double u = static_cast<double>(k) / (rings + 1);
      double round_end = std::pow(1.0 - std::pow(std::fabs(2 * u - 1), 8.0), 1.0 / 8.0);
      prof.push_back({(f.r0 + (f.r1 - f.r0) * u) * round_end, len * u});
    }
    prof.push_back({0.0, len});
    TriMesh tube = lathe(prof, slices);
    Mat3 R = rotation_between({0, 0, 1}, f.dir);
    Vec3 origin = f.base_joint - f.embed * f.dir;
    std::size_t first_vertex = surf.vertices.size();
    for (auto& v : tube.vertices) {
      double s = v[2];
      std::array<double, 3> a{};
      for (int k = 0; k < 3; ++k) a[k] = detail::smoothstep01((s - (b[k] - blend)) / (2 * blend));
      std::array<double, 4> w{1 - a[0], a[0] - a[1], a[1] - a[2], a[2]};
      weights.insert(weights.end(), J, 0.0);
      for (int k = 0; k < 4; ++k) weights[weights.size() - J + owner[k]] += w[k];
      v = origin + rotate(R, v);
    }
    append_mesh(surf, tube);

    if (f.first_joint == 13) {
      // Pad vertices of the distal thumb segment.
      Vec3 pad = detail::stand_in_pulp_normal(f.dir);
      for (std::size_t i = 1; i + 1 < tube.vertices.size(); ++i) {
        const Vec3& p = tube.vertices[i];
        double s = dot(p - origin, f.dir);
        Vec3 radial = normalized(p - origin - s * f.dir);
        if (s > b[2] + blend && dot(radial, pad) > 0.5) h.thumb_pulp.push_back(first_vertex + i);
      }
    }
  }

  // Snap to a 2^-24 m grid: exact in float for |x| < 0.25, and shifts by
  // float-valued offsets stay exact in double.
  auto snap = [](Vec3 v) {
    for (auto& x : v) x = std::ldexp(std::nearbyint(std::ldexp(x, 24)), -24);
    return v;
  };
  for (auto& v : surf.vertices) v = snap(v);
  for (auto& j : h.joints) j = snap(j);
  h.template_vertices = std::move(surf.vertices);
  h.faces = std::move(surf.faces);
  h.weights = std::move(weights);
  h.finalize();
  return h;
}

inline Container hand_model_container(const HandModel& h) {
  Container c;
  c.config = R"({"kind":"hand_model"})";
  std::size_t V = h.num_vertices(), J = h.num_joints();
  std::vector<double> buf;
  for (const auto& v : h.template_vertices) buf.insert(buf.end(), v.begin(), v.end());
  c.put("template", {V, 3}, buf);
  buf.clear();
  for (const auto& f : h.faces)
    for (auto i : f) buf.push_back(static_cast<double>(i));
  c.put("faces", {h.faces.size(), 3}, buf);
  buf.clear();
  for (const auto& j : h.joints) buf.insert(buf.end(), j.begin(), j.end());
  c.put("joints", {J, 3}, buf);
  buf.assign(h.parents.begin(), h.parents.end());
  c.put("parents", {J}, buf);
  c.put("weights", {V, J}, h.weights);
  buf.assign(h.thumb_pulp.begin(), h.thumb_pulp.end());
  c.put("thumb_pulp", {h.thumb_pulp.size()}, buf);
  return c;
}

inline void save_hand_model(const HandModel& h, const std::filesystem::path& path) {
  hand_model_container(h).save(path);
}

namespace detail {

inline std::vector<Vec3> entry_vec3(const ContainerEntry& e) {
  if (e.dims.size() != 2 || e.dims[1] != 3) throw DataError("hand model: entry '" + e.name + "' must be n x 3");
  std::vector<Vec3> out(e.dims[0]);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {e.data[3 * i], e.data[3 * i + 1], e.data[3 * i + 2]};
  return out;
}

inline long entry_index(float x, const std::string& what) {
  if (!std::isfinite(x) || x != std::round(x)) throw DataError("hand model: non-integer value in '" + what + "'");
  return static_cast<long>(x);
}

}  // namespace detail

inline HandModel hand_model_from_container(const Container& c) {
  HandModel h;
  h.template_vertices = detail::entry_vec3(c.get("template"));
  h.joints = detail::entry_vec3(c.get("joints"));
  const auto& faces = c.get("faces");
  if (faces.dims.size() != 2 || faces.dims[1] != 3) throw DataError("hand model: faces must be F x 3");
  for (std::size_t i = 0; i < faces.dims[0]; ++i) {
    Face f;
    for (int k = 0; k < 3; ++k) {
      long idx = detail::entry_index(faces.data[3 * i + k], "faces");
      if (idx < 0) throw DataError("hand model: negative face index");
      f[k] = static_cast<std::size_t>(idx);
    }
    h.faces.push_back(f);
  }
  for (float p : c.get("parents").data) h.parents.push_back(static_cast<int>(detail::entry_index(p, "parents")));
  h.weights = c.get("weights").as_double();
  for (float t : c.get("thumb_pulp").data) {
    long idx = detail::entry_index(t, "thumb_pulp");
    if (idx < 0) throw DataError("hand model: negative thumb pulp index");
    h.thumb_pulp.push_back(static_cast<std::size_t>(idx));
  }
  h.finalize();
  return h;
}

// The bundled stand-in when no path is given.
inline HandModel load_hand_model(const std::optional<std::filesystem::path>& path = std::nullopt) {
  if (!path) return make_stand_in_hand();
  return hand_model_from_container(Container::load(*path));
}

}  // namespace rgk
