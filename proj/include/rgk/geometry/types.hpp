#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rgk/core/error.hpp"

namespace rgk {

using Vec3 = std::array<double, 3>;
using Face = std::array<std::size_t, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 operator*(const Vec3& a, double s) { return s * a; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double dist2(const Vec3& a, const Vec3& b) {
  double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}
inline Vec3 normalized(const Vec3& a) {
  double n = norm(a);
  return n > 0 ? (1.0 / n) * a : Vec3{0, 0, 0};
}

// Triangle mesh in meters.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  void validate() const {
    for (std::size_t f = 0; f < faces.size(); ++f) {
      const auto& t = faces[f];
      for (auto i : t)
        if (i >= vertices.size())
          throw DataError(detail::concat("mesh: face ", f, " references vertex ", i, " of ", vertices.size()));
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
        throw DataError(detail::concat("mesh: face ", f, " repeats a vertex index"));
    }
  }

  double face_area(std::size_t f) const {
    const auto& t = faces[f];
    return 0.5 * norm(cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]));
  }
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.empty()) throw std::invalid_argument("point cloud: empty");
    for (const auto& p : points)
      if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
        throw std::invalid_argument("point cloud: non-finite coordinate");
  }
};

// Grouped cloud: G centers, each with S neighbours stored relative to it.
struct PatchSet {
  std::size_t G = 0, S = 0;
  std::vector<Vec3> centers;                // G
  std::vector<std::size_t> center_indices;  // G, source indices
  std::vector<std::size_t> patch_indices;   // G*S, source indices, nearest first
  std::vector<Vec3> patches;                // G*S, center-relative

  const Vec3& point(std::size_t g, std::size_t s) const { return patches[g * S + s]; }
};

struct ConditionRegion {
  Vec3 center{};
  std::size_t size = 0;                     // R
  std::vector<std::uint8_t> mask;           // G entries, exactly R ones
  std::vector<Vec3> member_points;          // R*S world coordinates
  std::vector<std::size_t> member_indices;  // R*S source indices
};

}  // namespace rgk
