#pragma once

// Per-grasp contact metrics and the aggregate ratios built from them.
// Geometry is in meters; results use cm, cm^2, cm^3 and mm.

#include <numeric>
#include <optional>
#include <set>

#include "rgk/core/rng.hpp"
#include "rgk/geometry/solid.hpp"
#include "rgk/hand/model.hpp"

namespace rgk {

struct ContactAssignment {
  std::vector<Vec3> thumb;             // thumb-pulp vertex positions
  std::vector<std::size_t> nearest;    // object point per thumb vertex
  std::vector<std::size_t> touched;    // deduplicated, ascending
  std::vector<std::size_t> in_region;  // subset of touched inside the region
  double rate = 0;
};

// Nearest object point for every thumb vertex (ties to the smallest index);
// the rate is |touched ∩ region| / |touched|.
inline ContactAssignment condition_hit(const std::vector<Vec3>& thumb, const PointCloud& object,
                                       const std::vector<std::size_t>& region_indices) {
  if (thumb.empty()) throw std::invalid_argument("cr_rate: empty thumb-pulp set");
  if (object.size() == 0) throw std::invalid_argument("cr_rate: empty object cloud");
  ContactAssignment a;
  a.thumb = thumb;
  for (const auto& q : thumb) {
    std::size_t arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < object.size(); ++i) {
      double d = dist2(q, object.points[i]);
      if (d < best) best = d, arg = i;
    }
    a.nearest.push_back(arg);
  }
  std::set<std::size_t> touched(a.nearest.begin(), a.nearest.end());
  std::set<std::size_t> region(region_indices.begin(), region_indices.end());
  for (auto i : region_indices)
    if (i >= object.size()) throw std::invalid_argument("cr_rate: region index outside the object cloud");
  a.touched.assign(touched.begin(), touched.end());
  for (auto i : a.touched)
    if (region.count(i)) a.in_region.push_back(i);
  a.rate = static_cast<double>(a.in_region.size()) / static_cast<double>(a.touched.size());
  return a;
}

inline double cr_rate(const std::vector<Vec3>& hand_vertices, const PointCloud& object, const ConditionRegion& region,
                      const HandModel& model) {
  std::vector<Vec3> thumb;
  for (auto i : model.thumb_pulp) {
    if (i >= hand_vertices.size()) throw std::invalid_argument("cr_rate: hand mesh has fewer vertices than the model");
    thumb.push_back(hand_vertices[i]);
  }
  return condition_hit(thumb, object, region.member_indices).rate;
}

// Sum of vertex areas (one third of incident faces) over hand vertices within
// `threshold` of the object surface, in cm^2.
inline double contact_area(const TriMesh& hand, const TriMesh& object, double threshold = 0.005) {
  if (!(threshold >= 0)) throw std::invalid_argument("contact_area: threshold must be >= 0");
  if (object.faces.empty()) throw std::invalid_argument("contact_area: object mesh has no faces");
  object.validate();
  std::vector<Aabb> boxes;
  boxes.reserve(object.faces.size());
  for (const auto& f : object.faces) {
    Aabb b;
    for (auto v : f) b.extend(object.vertices[v]);
    boxes.push_back(b);
  }
  auto areas = vertex_areas(hand);
  const double t2 = threshold * threshold;
  double total = 0;
  for (std::size_t v = 0; v < hand.vertices.size(); ++v) {
    const Vec3& p = hand.vertices[v];
    bool close = false;
    for (std::size_t f = 0; f < object.faces.size() && !close; ++f) {
      const Aabb& b = boxes[f];
      if (p[0] < b.lo[0] - threshold || p[0] > b.hi[0] + threshold || p[1] < b.lo[1] - threshold ||
          p[1] > b.hi[1] + threshold || p[2] < b.lo[2] - threshold || p[2] > b.hi[2] + threshold)
        continue;
      const auto& tri = object.faces[f];
      close = point_triangle_dist2(p, object.vertices[tri[0]], object.vertices[tri[1]], object.vertices[tri[2]]) <= t2;
    }
    if (close) total += areas[v];
  }
  return total * 1e4;
}

struct VolumeResult {
  double cm3 = 0;
  bool watertight = true;  // false: inside tests were best effort
};

// Voxels of the object's bounding grid whose centers lie inside both meshes.
inline VolumeResult interpenetration_volume(const TriMesh& hand, const TriMesh& object, double pitch = 0.005) {
  if (!(pitch > 0)) throw std::invalid_argument("interpenetration_volume: pitch must be > 0");
  if (object.faces.empty() || hand.faces.empty()) throw std::invalid_argument("interpenetration_volume: empty mesh");
  VolumeResult r;
  r.watertight = is_watertight(hand) && is_watertight(object);
  Aabb box = bounds(object.vertices), hb = bounds(hand.vertices);
  GridSpec grid;
  grid.pitch = pitch;
  std::size_t* n[3] = {&grid.nx, &grid.ny, &grid.nz};
  for (int k = 0; k < 3; ++k) {
    grid.origin[k] = box.lo[k] + 0.5 * pitch;
    *n[k] = static_cast<std::size_t>(std::ceil((box.hi[k] - box.lo[k]) / pitch));
    if (hb.hi[k] < box.lo[k] || hb.lo[k] > box.hi[k]) return r;
  }
  auto in_object = winding_grid(object, grid);
  auto in_hand = winding_grid(hand, grid);
  std::size_t count = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) count += in_object[i] != 0 && in_hand[i] != 0;
  r.cm3 = static_cast<double>(count) * pitch * pitch * pitch * 1e6;
  return r;
}

struct ContactRow {
  double cr = 0, ca = 0, iv = 0;
};

// (mean CR * mean CA) / mean IV in cm^-1; nullopt when mean IV is zero.
inline std::optional<double> cca_iv(const std::vector<ContactRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("cca_iv: no rows");
  double cr = 0, ca = 0, iv = 0;
  for (const auto& r : rows) cr += r.cr, ca += r.ca, iv += r.iv;
  double n = static_cast<double>(rows.size());
  if (iv == 0) return std::nullopt;
  return (cr / n) * (ca / n) / (iv / n);
}

inline double gdr(const std::vector<double>& generated, const std::vector<double>& reference) {
  if (generated.empty() || reference.empty()) throw std::invalid_argument("gdr: empty displacement set");
  double g = 0, r = 0;
  for (double x : generated) g += x;
  for (double x : reference) r += x;
  g /= static_cast<double>(generated.size());
  r /= static_cast<double>(reference.size());
  if (r == 0) throw std::invalid_argument("gdr: reference mean displacement is zero");
  return g / r;
}

// ---------------------------------------------------------------------------
// Diversity

inline constexpr std::size_t kDivDistSamples = 20;

// Seeded split of the 20 sample indices into two groups of 10; group_a[i]
// is paired with group_b[i].
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> div_dist_groups(std::uint64_t seed) {
  std::vector<std::size_t> order(kDivDistSamples);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(stream_seed(seed, "div_dist"));
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
  std::size_t half = kDivDistSamples / 2;
  return {{order.begin(), order.begin() + half}, {order.begin() + half, order.end()}};
}

// Mean over pairs of the RMS vertex distance, in mm.
inline double div_dist(const std::vector<std::vector<Vec3>>& samples, std::uint64_t seed) {
  if (samples.size() != kDivDistSamples)
    throw std::invalid_argument(detail::concat("div_dist: expected ", kDivDistSamples, " samples, got ", samples.size()));
  auto [a, b] = div_dist_groups(seed);
  double total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &x = samples[a[i]], &y = samples[b[i]];
    if (x.size() != y.size() || x.empty()) throw std::invalid_argument("div_dist: samples differ in vertex count");
    double s = 0;
    for (std::size_t v = 0; v < x.size(); ++v) s += dist2(x[v], y[v]);
    total += std::sqrt(s / static_cast<double>(x.size()));
  }
  return 1000.0 * total / static_cast<double>(a.size());
}

}  // namespace rgk
