#pragma once

// Solid-mesh queries: watertightness, point-triangle distance, inside tests
// by signed ray crossings (winding number along +x), and a narrow-band
// signed distance grid.

#include <algorithm>
#include <limits>
#include <map>
#include <utility>

#include "rgk/geometry/types.hpp"

namespace rgk {

struct Aabb {
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity()};

  void extend(const Vec3& p) {
    for (int k = 0; k < 3; ++k) lo[k] = std::min(lo[k], p[k]), hi[k] = std::max(hi[k], p[k]);
  }
  double diagonal() const { return norm(hi - lo); }
};

inline Aabb bounds(const std::vector<Vec3>& pts) {
  Aabb box;
  for (const auto& p : pts) box.extend(p);
  return box;
}

// Every undirected edge is shared by exactly two faces.
inline bool is_watertight(const TriMesh& mesh) {
  if (mesh.faces.empty()) return false;
  std::map<std::pair<std::size_t, std::size_t>, int> edges;
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) {
      std::size_t a = f[e], b = f[(e + 1) % 3];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  return std::all_of(edges.begin(), edges.end(), [](const auto& kv) { return kv.second == 2; });
}

// Undirected edge list derived from faces, sorted by (min, max) vertex.
inline std::vector<std::pair<std::size_t, std::size_t>> mesh_edges(const TriMesh& mesh) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) {
      std::size_t a = f[e], b = f[(e + 1) % 3];
      edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

// One third of the incident triangle areas per vertex.
inline std::vector<double> vertex_areas(const TriMesh& mesh) {
  std::vector<double> area(mesh.vertices.size(), 0.0);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    double a = mesh.face_area(f) / 3.0;
    for (auto v : mesh.faces[f]) area[v] += a;
  }
  return area;
}

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return a;
  Vec3 bp = p - b;
  double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return b;
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  Vec3 cp = p - c;
  double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return c;
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  double denom = 1.0 / (va + vb + vc);
  return a + (vb * denom) * ab + (vc * denom) * ac;
}

inline double point_triangle_dist2(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  return dist2(p, closest_point_on_triangle(p, a, b, c));
}

// Unsigned distance from p to the mesh surface.
inline double distance_to_mesh(const Vec3& p, const TriMesh& mesh) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : mesh.faces)
    best = std::min(best, point_triangle_dist2(p, mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]));
  return std::sqrt(best);
}

// Regular grid of nodes origin + pitch * (i, j, k).
struct GridSpec {
  Vec3 origin{};
  double pitch = 0.0;
  std::size_t nx = 0, ny = 0, nz = 0;

  std::size_t size() const { return nx * ny * nz; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return i + nx * (j + ny * k); }
  Vec3 node(std::size_t i, std::size_t j, std::size_t k) const {
    return {origin[0] + pitch * static_cast<double>(i), origin[1] + pitch * static_cast<double>(j),
            origin[2] + pitch * static_cast<double>(k)};
  }

  // Grid covering `box` expanded by `margin`.
  static GridSpec covering(const Aabb& box, double pitch, double margin, double offset = 0.0) {
    GridSpec g;
    g.pitch = pitch;
    for (int k = 0; k < 3; ++k) g.origin[k] = box.lo[k] - margin + offset * pitch;
    auto count = [&](int k) {
      return static_cast<std::size_t>(std::ceil((box.hi[k] + margin - g.origin[k]) / pitch)) + 1;
    };
    g.nx = count(0);
    g.ny = count(1);
    g.nz = count(2);
    return g;
  }
};

namespace detail {

// Crossing of the +x ray through (y, z) with a triangle: x position and the
// winding increment (+1 entering an outward-oriented surface). Edge ties use
// a top-left rule so a point on a shared edge is claimed by exactly one face.
struct RayCrossing {
  double x;
  int delta;
};

struct ProjectedFace {
  double y[3], z[3], x[3];
  double area2;
  int delta;
  double ylo, yhi, zlo, zhi;
};

inline bool project_face(const Vec3& a, const Vec3& b, const Vec3& c, ProjectedFace& pf) {
  double area2 = (b[1] - a[1]) * (c[2] - a[2]) - (b[2] - a[2]) * (c[1] - a[1]);
  if (area2 == 0.0) return false;
  pf.delta = area2 < 0 ? 1 : -1;
  const Vec3* v[3] = {&a, &b, &c};
  if (area2 < 0) std::swap(v[1], v[2]);
  for (int i = 0; i < 3; ++i) pf.x[i] = (*v[i])[0], pf.y[i] = (*v[i])[1], pf.z[i] = (*v[i])[2];
  pf.area2 = std::fabs(area2);
  pf.ylo = std::min({pf.y[0], pf.y[1], pf.y[2]});
  pf.yhi = std::max({pf.y[0], pf.y[1], pf.y[2]});
  pf.zlo = std::min({pf.z[0], pf.z[1], pf.z[2]});
  pf.zhi = std::max({pf.z[0], pf.z[1], pf.z[2]});
  return true;
}

inline bool ray_hits(const ProjectedFace& pf, double y, double z, double& x) {
  double w[3];
  for (int e = 0; e < 3; ++e) {
    int a = e, b = (e + 1) % 3;
    double dy = pf.y[b] - pf.y[a], dz = pf.z[b] - pf.z[a];
    double val = dy * (z - pf.z[a]) - dz * (y - pf.y[a]);
    if (val < 0) return false;
    if (val == 0 && !(dy > 0 || (dy == 0 && dz < 0))) return false;
    w[(e + 2) % 3] = val;  // weight of the vertex opposite edge (a, b)
  }
  x = (w[0] * pf.x[0] + w[1] * pf.x[1] + w[2] * pf.x[2]) / pf.area2;
  return true;
}

}  // namespace detail

// Winding number of `p` with respect to the mesh (nonzero means inside).
inline int winding_number(const TriMesh& mesh, const Vec3& p) {
  int w = 0;
  detail::ProjectedFace pf;
  for (const auto& f : mesh.faces) {
    if (!detail::project_face(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]], pf)) continue;
    if (p[1] < pf.ylo || p[1] > pf.yhi || p[2] < pf.zlo || p[2] > pf.zhi) continue;
    double x;
    if (detail::ray_hits(pf, p[1], p[2], x) && x < p[0]) w += pf.delta;
  }
  return w;
}

inline bool point_inside(const TriMesh& mesh, const Vec3& p) { return winding_number(mesh, p) != 0; }

// Winding numbers at every grid node, one scanline per (j, k) row.
inline std::vector<int> winding_grid(const TriMesh& mesh, const GridSpec& grid) {
  std::vector<std::vector<detail::RayCrossing>> rows(grid.ny * grid.nz);
  detail::ProjectedFace pf;
  const double h = grid.pitch;
  for (const auto& f : mesh.faces) {
    if (!detail::project_face(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]], pf)) continue;
    auto range = [&](double lo, double hi, double o, std::size_t n, std::size_t& a, std::size_t& b) {
      double fa = std::ceil((lo - o) / h), fb = std::floor((hi - o) / h);
      if (fb < 0 || fa > static_cast<double>(n) - 1 || fa > fb) return false;
      a = static_cast<std::size_t>(std::max(0.0, fa));
      b = static_cast<std::size_t>(std::min(static_cast<double>(n) - 1, fb));
      return true;
    };
    std::size_t j0, j1, k0, k1;
    if (!range(pf.ylo, pf.yhi, grid.origin[1], grid.ny, j0, j1)) continue;
    if (!range(pf.zlo, pf.zhi, grid.origin[2], grid.nz, k0, k1)) continue;
    for (std::size_t k = k0; k <= k1; ++k)
      for (std::size_t j = j0; j <= j1; ++j) {
        double x;
        double y = grid.origin[1] + h * static_cast<double>(j), z = grid.origin[2] + h * static_cast<double>(k);
        if (detail::ray_hits(pf, y, z, x)) rows[j + grid.ny * k].push_back({x, pf.delta});
      }
  }
  std::vector<int> out(grid.size(), 0);
  for (std::size_t k = 0; k < grid.nz; ++k)
    for (std::size_t j = 0; j < grid.ny; ++j) {
      auto& row = rows[j + grid.ny * k];
      if (row.empty()) continue;
      std::sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.x < b.x; });
      std::size_t c = 0;
      int w = 0;
      for (std::size_t i = 0; i < grid.nx; ++i) {
        double x = grid.origin[0] + h * static_cast<double>(i);
        while (c < row.size() && row[c].x < x) w += row[c++].delta;
        out[grid.index(i, j, k)] = w;
      }
    }
  return out;
}

// Signed distance sampled on a grid: exact point-triangle distances within
// `band` of the surface, clamped to +-band elsewhere. Negative inside.
class SignedDistanceGrid {
 public:
  SignedDistanceGrid() = default;

  SignedDistanceGrid(const TriMesh& mesh, double pitch, double band) : band_(band) {
    Aabb box = bounds(mesh.vertices);
    // Fractional offset keeps nodes off axis-aligned faces.
    grid_ = GridSpec::covering(box, pitch, band + 2 * pitch, -0.3183098861837907);
    auto winding = winding_grid(mesh, grid_);
    phi_.assign(grid_.size(), band);
    for (std::size_t i = 0; i < phi_.size(); ++i)
      if (winding[i] != 0) phi_[i] = -band;
    std::vector<double> d2(grid_.size(), band * band);
    for (const auto& f : mesh.faces) {
      const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
      std::size_t lo[3], hi[3];
      const std::size_t n[3] = {grid_.nx, grid_.ny, grid_.nz};
      for (int k = 0; k < 3; ++k) {
        double mn = std::min({a[k], b[k], c[k]}) - band, mx = std::max({a[k], b[k], c[k]}) + band;
        lo[k] = static_cast<std::size_t>(std::max(0.0, std::ceil((mn - grid_.origin[k]) / pitch)));
        hi[k] = std::min(n[k] - 1, static_cast<std::size_t>(std::max(0.0, std::floor((mx - grid_.origin[k]) / pitch))));
      }
      for (std::size_t z = lo[2]; z <= hi[2]; ++z)
        for (std::size_t y = lo[1]; y <= hi[1]; ++y)
          for (std::size_t x = lo[0]; x <= hi[0]; ++x) {
            std::size_t id = grid_.index(x, y, z);
            d2[id] = std::min(d2[id], point_triangle_dist2(grid_.node(x, y, z), a, b, c));
          }
    }
    for (std::size_t i = 0; i < phi_.size(); ++i) {
      double d = std::sqrt(d2[i]);
      if (d < band) phi_[i] = phi_[i] < 0 ? -d : d;
    }
  }

  const GridSpec& grid() const { return grid_; }
  double band() const { return band_; }

  // Trilinear interpolation; +band outside the grid.
  double sample(const Vec3& p) const {
    double f[3];
    std::size_t c[3];
    const std::size_t n[3] = {grid_.nx, grid_.ny, grid_.nz};
    for (int k = 0; k < 3; ++k) {
      double u = (p[k] - grid_.origin[k]) / grid_.pitch;
      if (!(u >= 0) || u >= static_cast<double>(n[k] - 1)) return band_;
      c[k] = static_cast<std::size_t>(u);
      f[k] = u - static_cast<double>(c[k]);
    }
    double acc = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      double w = 1.0;
      std::size_t idx[3];
      for (int k = 0; k < 3; ++k) {
        int bit = (corner >> k) & 1;
        w *= bit ? f[k] : 1.0 - f[k];
        idx[k] = c[k] + static_cast<std::size_t>(bit);
      }
      acc += w * phi_[grid_.index(idx[0], idx[1], idx[2])];
    }
    return acc;
  }

  // Central-difference gradient of the interpolant, normalized.
  Vec3 normal(const Vec3& p) const {
    double h = 0.5 * grid_.pitch;
    Vec3 g;
    for (int k = 0; k < 3; ++k) {
      Vec3 a = p, b = p;
      a[k] += h;
      b[k] -= h;
      g[k] = sample(a) - sample(b);
    }
    return normalized(g);
  }

 private:
  GridSpec grid_;
  std::vector<double> phi_;
  double band_ = 0.0;
};

}  // namespace rgk
