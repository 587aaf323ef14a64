#pragma once

// Closed, outward-oriented primitive meshes and rigid transforms.

#include <numbers>
#include <utility>

#include "rgk/geometry/types.hpp"

namespace rgk {

using Mat3 = std::array<double, 9>;  // row-major

inline Mat3 identity3() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

inline Vec3 rotate(const Mat3& R, const Vec3& v) {
  return {R[0] * v[0] + R[1] * v[1] + R[2] * v[2], R[3] * v[0] + R[4] * v[1] + R[5] * v[2],
          R[6] * v[0] + R[7] * v[1] + R[8] * v[2]};
}

inline Mat3 matmul3(const Mat3& A, const Mat3& B) {
  Mat3 C{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) C[3 * i + j] = A[3 * i] * B[j] + A[3 * i + 1] * B[3 + j] + A[3 * i + 2] * B[6 + j];
  return C;
}

inline Mat3 transpose3(const Mat3& A) { return {A[0], A[3], A[6], A[1], A[4], A[7], A[2], A[5], A[8]}; }

// Rotation by |r| radians about r / |r|.
inline Mat3 axis_angle_matrix(const Vec3& r) {
  double t = norm(r);
  if (t < 1e-15) return identity3();
  Vec3 k = (1.0 / t) * r;
  double c = std::cos(t), s = std::sin(t), v = 1 - c;
  return {c + k[0] * k[0] * v,        k[0] * k[1] * v - k[2] * s, k[0] * k[2] * v + k[1] * s,
          k[1] * k[0] * v + k[2] * s, c + k[1] * k[1] * v,        k[1] * k[2] * v - k[0] * s,
          k[2] * k[0] * v - k[1] * s, k[2] * k[1] * v + k[0] * s, c + k[2] * k[2] * v};
}

// Axis-angle vector of a rotation matrix.
inline Vec3 matrix_axis_angle(const Mat3& R) {
  double c = std::clamp((R[0] + R[4] + R[8] - 1.0) / 2.0, -1.0, 1.0);
  double t = std::acos(c);
  if (t < 1e-12) return {0, 0, 0};
  if (std::numbers::pi - t < 1e-6) {
    // Near pi: axis from the largest diagonal term of (R + I) / 2.
    Vec3 d{std::sqrt(std::max(0.0, (R[0] + 1) / 2)), std::sqrt(std::max(0.0, (R[4] + 1) / 2)),
           std::sqrt(std::max(0.0, (R[8] + 1) / 2))};
    int m = d[0] >= d[1] && d[0] >= d[2] ? 0 : (d[1] >= d[2] ? 1 : 2);
    Vec3 k{};
    k[m] = d[m];
    for (int i = 0; i < 3; ++i)
      if (i != m) k[i] = (R[3 * m + i] + R[3 * i + m]) / (4 * d[m]);
    return t * normalized(k);
  }
  Vec3 axis{R[7] - R[5], R[2] - R[6], R[3] - R[1]};
  return (t / (2 * std::sin(t))) * axis;
}

// Rotation taking unit vector a onto unit vector b.
inline Mat3 rotation_between(const Vec3& a, const Vec3& b) {
  Vec3 axis = cross(a, b);
  double s = norm(axis), c = dot(a, b);
  if (s < 1e-12) {
    if (c > 0) return identity3();
    Vec3 perp = std::fabs(a[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    return axis_angle_matrix(std::numbers::pi * normalized(cross(a, perp)));
  }
  return axis_angle_matrix(std::atan2(s, c) * ((1.0 / s) * axis));
}

inline void transform_mesh(TriMesh& mesh, const Mat3& R, const Vec3& t) {
  for (auto& v : mesh.vertices) v = rotate(R, v) + t;
}

inline void append_mesh(TriMesh& dst, const TriMesh& src) {
  std::size_t off = dst.vertices.size();
  dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
  for (const auto& f : src.faces) dst.faces.push_back({f[0] + off, f[1] + off, f[2] + off});
}

// Signed enclosed volume (positive for outward orientation).
inline double signed_volume(const TriMesh& mesh) {
  double v = 0.0;
  for (const auto& f : mesh.faces) v += dot(mesh.vertices[f[0]], cross(mesh.vertices[f[1]], mesh.vertices[f[2]]));
  return v / 6.0;
}

// Surface of revolution about +z from a (radius, height) profile whose first
// and last entries are the poles (radius 0).
inline TriMesh lathe(const std::vector<std::pair<double, double>>& profile, std::size_t slices) {
  TriMesh m;
  std::size_t rings = profile.size() - 2;
  m.vertices.push_back({0, 0, profile.front().second});
  for (std::size_t i = 1; i + 1 < profile.size(); ++i)
    for (std::size_t j = 0; j < slices; ++j) {
      double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(slices);
      m.vertices.push_back({profile[i].first * std::cos(a), profile[i].first * std::sin(a), profile[i].second});
    }
  m.vertices.push_back({0, 0, profile.back().second});
  std::size_t top = m.vertices.size() - 1;
  auto ring = [&](std::size_t i, std::size_t j) { return 1 + i * slices + (j % slices); };
  for (std::size_t j = 0; j < slices; ++j) m.faces.push_back({0, ring(0, j + 1), ring(0, j)});
  for (std::size_t i = 0; i + 1 < rings; ++i)
    for (std::size_t j = 0; j < slices; ++j) {
      m.faces.push_back({ring(i, j), ring(i, j + 1), ring(i + 1, j + 1)});
      m.faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i + 1, j)});
    }
  for (std::size_t j = 0; j < slices; ++j) m.faces.push_back({ring(rings - 1, j), ring(rings - 1, j + 1), top});
  return m;
}

inline TriMesh make_box(const Vec3& half) {
  TriMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back({(i & 1 ? 1 : -1) * half[0], (i & 2 ? 1 : -1) * half[1], (i & 4 ? 1 : -1) * half[2]});
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

inline TriMesh make_sphere(double radius, std::size_t stacks = 16, std::size_t slices = 24) {
  std::vector<std::pair<double, double>> prof;
  for (std::size_t i = 0; i <= stacks; ++i) {
    double t = std::numbers::pi * (1.0 - static_cast<double>(i) / static_cast<double>(stacks));
    prof.push_back({i == 0 || i == stacks ? 0.0 : radius * std::sin(t), radius * std::cos(t)});
  }
  return lathe(prof, slices);
}

inline TriMesh make_cylinder(double radius, double half_height, std::size_t slices = 24, std::size_t bands = 4) {
  std::vector<std::pair<double, double>> prof{{0.0, -half_height}};
  for (std::size_t i = 0; i <= bands; ++i)
    prof.push_back({radius, -half_height + 2 * half_height * static_cast<double>(i) / static_cast<double>(bands)});
  prof.push_back({0.0, half_height});
  return lathe(prof, slices);
}

inline TriMesh make_capsule(double radius, double half_height, std::size_t cap_stacks = 6, std::size_t slices = 24) {
  std::vector<std::pair<double, double>> prof{{0.0, -half_height - radius}};
  for (std::size_t i = 1; i <= cap_stacks; ++i) {
    double t = 0.5 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(cap_stacks);
    prof.push_back({radius * std::sin(t), -half_height - radius * std::cos(t)});
  }
  for (std::size_t i = cap_stacks; i >= 1; --i) {
    double t = 0.5 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(cap_stacks);
    prof.push_back({radius * std::sin(t), half_height + radius * std::cos(t)});
  }
  prof.push_back({0.0, half_height + radius});
  return lathe(prof, slices);
}

// Closed box shell: outward outer box plus inward-facing inner box.
inline TriMesh make_box_shell(const Vec3& outer_half, const Vec3& inner_half) {
  TriMesh m = make_box(outer_half);
  TriMesh inner = make_box(inner_half);
  for (auto& f : inner.faces) std::swap(f[1], f[2]);
  append_mesh(m, inner);
  return m;
}

}  // namespace rgk
