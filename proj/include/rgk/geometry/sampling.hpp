#pragma once

// Point-cloud kernels. Every nearest/farthest selection breaks ties by the
// smallest index so results are bit-reproducible and oracle-comparable.

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>

#include "rgk/core/rng.hpp"
#include "rgk/geometry/types.hpp"

namespace rgk {

// Area-uniform surface sampling: face by area, then barycentric point.
inline PointCloud resample_mesh(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("resample_mesh: n must be positive");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) cdf[f] = (total += mesh.face_area(f));
  if (!(total > 0.0)) throw std::invalid_argument("resample_mesh: all faces are degenerate");
  Rng rng(stream_seed(seed, "resample"));
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = uniform01(rng) * total;
    std::size_t f = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    f = std::min(f, cdf.size() - 1);
    while (mesh.face_area(f) == 0.0 && f + 1 < cdf.size()) ++f;
    double r1 = std::sqrt(uniform01(rng)), r2 = uniform01(rng);
    const auto& t = mesh.faces[f];
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    cloud.points.push_back((1.0 - r1) * a + (r1 * (1.0 - r2)) * b + (r1 * r2) * c);
  }
  return cloud;
}

// Greedy max-min selection from an explicit start index.
inline std::vector<std::size_t> farthest_point_sampling_from(const PointCloud& cloud, std::size_t g,
                                                             std::size_t start) {
  std::size_t n = cloud.size();
  if (g == 0 || g > n)
    throw std::invalid_argument(detail::concat("farthest_point_sampling: g=", g, " outside [1, ", n, "]"));
  if (start >= n) throw std::invalid_argument("farthest_point_sampling: start index out of range");
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> picked{start};
  picked.reserve(g);
  min_d[start] = -1.0;
  while (picked.size() < g) {
    const Vec3& last = cloud.points[picked.back()];
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d[i] < 0.0) continue;
      min_d[i] = std::min(min_d[i], dist2(cloud.points[i], last));
      if (min_d[i] > best_d) best_d = min_d[i], best = i;
    }
    picked.push_back(best);
    min_d[best] = -1.0;
  }
  return picked;
}

// Start index drawn uniformly from the seeded stream.
inline std::vector<std::size_t> farthest_point_sampling(const PointCloud& cloud, std::size_t g, std::uint64_t seed) {
  if (cloud.size() == 0) throw std::invalid_argument("farthest_point_sampling: empty cloud");
  Rng rng(stream_seed(seed, "fps"));
  return farthest_point_sampling_from(cloud, g, uniform_index(rng, cloud.size()));
}

// Row q holds the k nearest reference indices to queries[q], ascending.
inline std::vector<std::size_t> knn(std::span<const Vec3> queries, const PointCloud& reference, std::size_t k) {
  std::size_t n = reference.size();
  if (k == 0 || k > n) throw std::invalid_argument(detail::concat("knn: k=", k, " outside [1, ", n, "]"));
  std::vector<std::size_t> out(queries.size() * k);
  std::vector<double> d(n);
  std::vector<std::size_t> order(n);
  for (std::size_t q = 0; q < queries.size(); ++q) {
    for (std::size_t i = 0; i < n; ++i) d[i] = dist2(queries[q], reference.points[i]);
    std::iota(order.begin(), order.end(), 0);
    auto less = [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); };
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), less);
    std::copy_n(order.begin(), k, out.begin() + static_cast<std::ptrdiff_t>(q * k));
  }
  return out;
}

inline PatchSet group_patches(const PointCloud& cloud, std::size_t g, std::size_t s, std::uint64_t seed) {
  PatchSet ps;
  ps.G = g;
  ps.S = s;
  ps.center_indices = farthest_point_sampling(cloud, g, seed);
  for (auto i : ps.center_indices) ps.centers.push_back(cloud.points[i]);
  ps.patch_indices = knn(ps.centers, cloud, s);
  ps.patches.reserve(g * s);
  for (std::size_t c = 0; c < g; ++c)
    for (std::size_t j = 0; j < s; ++j)
      ps.patches.push_back(cloud.points[ps.patch_indices[c * s + j]] - ps.centers[c]);
  return ps;
}

// The r patches whose centers are nearest to p_c (Euclidean).
inline ConditionRegion select_condition_region(const PatchSet& patches, const Vec3& p_c, std::size_t r) {
  if (r == 0 || r > patches.G)
    throw std::invalid_argument(detail::concat("select_condition_region: R=", r, " outside [1, ", patches.G, "]"));
  if (!std::isfinite(p_c[0]) || !std::isfinite(p_c[1]) || !std::isfinite(p_c[2]))
    throw std::invalid_argument("select_condition_region: non-finite region center");
  PointCloud centers{patches.centers};
  auto nearest = knn(std::span<const Vec3>(&p_c, 1), centers, r);
  ConditionRegion region;
  region.center = p_c;
  region.size = r;
  region.mask.assign(patches.G, 0);
  std::sort(nearest.begin(), nearest.end());
  for (auto g : nearest) {
    region.mask[g] = 1;
    for (std::size_t s = 0; s < patches.S; ++s) {
      region.member_points.push_back(patches.point(g, s) + patches.centers[g]);
      region.member_indices.push_back(patches.patch_indices[g * patches.S + s]);
    }
  }
  return region;
}

// (1/|a|) sum_a min_b |x-y|^2 + (1/|b|) sum_b min_a |x-y|^2, squared meters.
inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  if (a.size() == 0 || b.size() == 0) throw std::invalid_argument("chamfer_distance: empty cloud");
  auto directed = [](const PointCloud& from, const PointCloud& to) {
    double s = 0.0;
    for (const auto& x : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : to.points) best = std::min(best, dist2(x, y));
      s += best;
    }
    return s / static_cast<double>(from.size());
  };
  return directed(a, b) + directed(b, a);
}

}  // namespace rgk
