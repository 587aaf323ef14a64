#pragma once

// Procedural objects: 1-3 overlapping closed primitives kept as separate
// components of one mesh. Inside tests use winding numbers, so the overlap
// counts once; surface sampling skips the parts buried in other components.

#include <json.hpp>
#include <numeric>

#include "rgk/core/rng.hpp"
#include "rgk/geometry/primitives.hpp"
#include "rgk/geometry/solid.hpp"

namespace rgk {

enum class PrimitiveKind { Box, Cylinder, Sphere, Capsule };

NLOHMANN_JSON_SERIALIZE_ENUM(PrimitiveKind, {{PrimitiveKind::Box, "box"},
                                             {PrimitiveKind::Cylinder, "cylinder"},
                                             {PrimitiveKind::Sphere, "sphere"},
                                             {PrimitiveKind::Capsule, "capsule"}})

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Box;
  // box: half extents; cylinder/capsule: radius, half height; sphere: radius.
  std::vector<double> dims;
  Vec3 rotation{};  // axis-angle
  Vec3 translation{};
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Primitive, kind, dims, rotation, translation)

struct ObjectSpec {
  std::uint64_t seed = 0;
  std::vector<Primitive> parts;
  double scale = 1.0;  // applied after assembly
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ObjectSpec, seed, parts, scale)

inline constexpr double kMinObjectDiameter = 0.05;
inline constexpr double kMaxObjectDiameter = 0.25;

inline TriMesh primitive_mesh(const Primitive& p) {
  TriMesh m;
  switch (p.kind) {
    case PrimitiveKind::Box: m = make_box({p.dims.at(0), p.dims.at(1), p.dims.at(2)}); break;
    case PrimitiveKind::Cylinder: m = make_cylinder(p.dims.at(0), p.dims.at(1), 24, 4); break;
    case PrimitiveKind::Sphere: m = make_sphere(p.dims.at(0), 14, 20); break;
    case PrimitiveKind::Capsule: m = make_capsule(p.dims.at(0), p.dims.at(1), 5, 20); break;
  }
  transform_mesh(m, axis_angle_matrix(p.rotation), p.translation);
  return m;
}

inline TriMesh assemble_object(const ObjectSpec& spec) {
  TriMesh mesh;
  for (const auto& p : spec.parts) append_mesh(mesh, primitive_mesh(p));
  for (auto& v : mesh.vertices) v = spec.scale * v;
  return mesh;
}

// Largest distance between two vertices.
inline double mesh_diameter(const TriMesh& mesh) {
  double best = 0;
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    for (std::size_t j = i + 1; j < mesh.vertices.size(); ++j) best = std::max(best, dist2(mesh.vertices[i], mesh.vertices[j]));
  return std::sqrt(best);
}

// Smallest radius of a ball centered in the primitive and inside it.
inline double inner_radius(const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::Box: return std::min({p.dims[0], p.dims[1], p.dims[2]});
    default: return p.dims[0];
  }
}

inline ObjectSpec object_spec(std::uint64_t seed) {
  Rng rng(stream_seed(seed, "object"));
  auto u = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
  auto random_axis_angle = [&] {
    Vec3 axis = normalized(Vec3{standard_normal(rng), standard_normal(rng), standard_normal(rng)});
    return u(0, std::numbers::pi) * axis;
  };
  ObjectSpec spec;
  spec.seed = seed;
  std::size_t count = 1 + uniform_index(rng, 3);
  for (std::size_t i = 0; i < count; ++i) {
    Primitive p;
    p.kind = static_cast<PrimitiveKind>(uniform_index(rng, 4));
    switch (p.kind) {
      case PrimitiveKind::Box: p.dims = {u(0.015, 0.05), u(0.015, 0.05), u(0.015, 0.05)}; break;
      case PrimitiveKind::Cylinder: p.dims = {u(0.015, 0.04), u(0.02, 0.06)}; break;
      case PrimitiveKind::Sphere: p.dims = {u(0.025, 0.05)}; break;
      case PrimitiveKind::Capsule: p.dims = {u(0.015, 0.035), u(0.015, 0.05)}; break;
    }
    p.rotation = random_axis_angle();
    if (i > 0) {
      // Attach to a previous part with the centers close enough to overlap.
      const Primitive& anchor = spec.parts[uniform_index(rng, spec.parts.size())];
      Vec3 dir = normalized(Vec3{standard_normal(rng), standard_normal(rng), standard_normal(rng)});
      double reach = 0.8 * (inner_radius(anchor) + inner_radius(p));
      p.translation = anchor.translation + u(0.4, 1.0) * reach * dir;
    }
    spec.parts.push_back(p);
  }
  // Center the bounding box and bring the diameter into range.
  TriMesh raw = assemble_object(spec);
  Aabb box = bounds(raw.vertices);
  Vec3 mid = 0.5 * (box.lo + box.hi);
  for (auto& p : spec.parts) p.translation = p.translation - mid;
  double diameter = mesh_diameter(raw);
  double target = std::clamp(diameter, kMinObjectDiameter * 1.05, kMaxObjectDiameter * 0.95);
  spec.scale = target / diameter;
  return spec;
}

inline TriMesh gen_object(std::uint64_t seed, ObjectSpec* spec_out = nullptr) {
  ObjectSpec spec = object_spec(seed);
  TriMesh mesh = assemble_object(spec);
  if (spec_out) *spec_out = spec;
  return mesh;
}

// Face sets of the vertex-connected components.
inline std::vector<std::vector<std::size_t>> face_components(const TriMesh& mesh) {
  std::vector<std::size_t> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& f : mesh.faces)
    for (int k = 1; k < 3; ++k) parent[find(f[k])] = find(f[0]);
  std::map<std::size_t, std::size_t> id;
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    std::size_t root = find(mesh.faces[f][0]);
    auto [it, added] = id.emplace(root, out.size());
    if (added) out.emplace_back();
    out[it->second].push_back(f);
  }
  return out;
}

// Area-uniform samples of the exterior surface: points of one component
// that lie inside another component are rejected and redrawn.
inline PointCloud sample_exterior_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  mesh.validate();
  if (mesh.faces.empty() || n == 0) throw std::invalid_argument("sample_exterior_surface: empty mesh or zero count");
  auto comps = face_components(mesh);
  std::vector<std::size_t> comp_of(mesh.faces.size());
  std::vector<TriMesh> parts(comps.size());
  for (std::size_t c = 0; c < comps.size(); ++c) {
    parts[c].vertices = mesh.vertices;
    for (auto f : comps[c]) {
      comp_of[f] = c;
      parts[c].faces.push_back(mesh.faces[f]);
    }
  }
  std::vector<double> cdf(mesh.faces.size());
  double total = 0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) cdf[f] = total += mesh.face_area(f);
  if (!(total > 0)) throw std::invalid_argument("sample_exterior_surface: zero surface area");
  Rng rng(stream_seed(seed, "surface"));
  PointCloud out;
  std::size_t draws = 0;
  while (out.points.size() < n) {
    if (++draws > 50 * n) throw std::invalid_argument("sample_exterior_surface: exterior surface too small");
    double r = uniform01(rng) * total;
    std::size_t f = std::min<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin(), cdf.size() - 1);
    double a = uniform01(rng), b = uniform01(rng);
    if (a + b > 1) a = 1 - a, b = 1 - b;
    const auto& tri = mesh.faces[f];
    const Vec3 &p0 = mesh.vertices[tri[0]], &p1 = mesh.vertices[tri[1]], &p2 = mesh.vertices[tri[2]];
    Vec3 p = p0 + a * (p1 - p0) + b * (p2 - p0);
    bool buried = false;
    for (std::size_t c = 0; c < parts.size() && !buried; ++c)
      if (c != comp_of[f]) buried = point_inside(parts[c], p);
    if (!buried) out.points.push_back(p);
  }
  return out;
}

}  // namespace rgk
