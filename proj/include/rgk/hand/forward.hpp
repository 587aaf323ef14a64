#pragma once

// Pose parameters to hand surface: forward kinematics over the joint tree,
// linear blend skinning, then global rotation about the origin and
// translation.

#include <cstdio>
#include <numbers>

#include "rgk/hand/model.hpp"
#include "rgk/numerics/ops.hpp"

namespace rgk {

// Layout of the 51-float vector: [0,3) global axis-angle, [3,6) translation,
// [6,51) per-joint axis-angle for joints 1..15.
struct HandParams {
  std::array<double, kHandParams> values{};

  Vec3 global_rotation() const { return {values[0], values[1], values[2]}; }
  Vec3 translation() const { return {values[3], values[4], values[5]}; }
  Vec3 joint_rotation(std::size_t j) const { return {values[3 + 3 * j], values[4 + 3 * j], values[5 + 3 * j]}; }
  void set_global_rotation(const Vec3& r) { std::copy(r.begin(), r.end(), values.begin()); }
  void set_translation(const Vec3& t) { std::copy(t.begin(), t.end(), values.begin() + 3); }
  void set_joint_rotation(std::size_t j, const Vec3& r) { std::copy(r.begin(), r.end(), values.begin() + 3 + 3 * j); }

  Tensor tensor(bool requires_grad = false) const {
    return Tensor({kHandParams}, {values.begin(), values.end()}, requires_grad);
  }
  static HandParams from(const Tensor& t) {
    if (t.numel() != kHandParams) throw std::invalid_argument("hand params: expected 51 values");
    HandParams p;
    std::copy(t.values().begin(), t.values().end(), p.values.begin());
    return p;
  }
  bool finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
};

// params: 51 values. Returns V x 3 vertices on the active tape.
inline Tensor hand_forward(const HandModel& model, const Tensor& params) {
  if (params.numel() != kHandParams)
    throw std::invalid_argument("hand_forward: expected 51 parameters, got " + shape_str(params.shape()));
  const std::size_t J = model.num_joints();
  Tensor flat = reshape(params, {kHandParams});
  Tensor global = reshape(slice(flat, 0, 0, 3), {1, 3});
  Tensor trans = slice(flat, 0, 3, 3);
  Tensor local = rodrigues(clamp_row_norm(reshape(slice(flat, 0, 6, 3 * (J - 1)), {J - 1, 3}), std::numbers::pi));

  auto col = [](const Vec3& v) { return Tensor({3, 1}, {v[0], v[1], v[2]}); };
  const Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  // World rotation W_j and skinning offset o_j with W_j x + o_j mapping rest
  // points of bone j; o_j = o_parent + (W_parent - W_j) J_j, so the rest pose
  // is reproduced without rounding.
  std::vector<Tensor> world_rot(J), offset(J);
  world_rot[0] = eye;
  offset[0] = Tensor::zeros({3, 1});
  for (std::size_t j = 1; j < J; ++j) {
    auto p = static_cast<std::size_t>(model.parents[j]);
    world_rot[j] = matmul(world_rot[p], reshape(slice(local, 0, j - 1, 1), {3, 3}));
    offset[j] = add(offset[p], matmul(sub(world_rot[p], world_rot[j]), col(model.joints[j])));
  }
  // Skin the displacement (W_j - I) x + o_j and add it to the template.
  std::vector<Tensor> rots, offs;
  for (std::size_t j = 0; j < J; ++j) {
    rots.push_back(reshape(sub(world_rot[j], eye), {1, 3, 3}));
    offs.push_back(reshape(offset[j], {1, 3}));
  }
  std::vector<double> rest;
  rest.reserve(3 * model.num_vertices());
  for (const auto& v : model.template_vertices) rest.insert(rest.end(), v.begin(), v.end());
  Tensor posed = add(Tensor({model.num_vertices(), 3}, rest), blend_skin(model.weights, rest, concat(rots, 0), concat(offs, 0)));
  Tensor Rg = reshape(rodrigues(global), {3, 3});
  return add(matmul(posed, transpose(Rg)), trans);
}

inline std::vector<Vec3> to_points(const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 3) throw std::invalid_argument("to_points: expected n x 3");
  std::vector<Vec3> out(t.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {t[3 * i], t[3 * i + 1], t[3 * i + 2]};
  return out;
}

inline Tensor points_tensor(const std::vector<Vec3>& pts) {
  std::vector<double> v;
  v.reserve(pts.size() * 3);
  for (const auto& p : pts) v.insert(v.end(), p.begin(), p.end());
  return Tensor({pts.size(), 3}, std::move(v));
}

struct HandMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> edges;
};

// v_j - v_i for every model edge (i, j); E x 3.
inline Tensor edge_vectors(const Tensor& vertices, const HandModel& model) {
  if (vertices.rank() != 2 || vertices.dim(0) != model.num_vertices() || vertices.dim(1) != 3)
    throw std::invalid_argument("edge_vectors: expected 778 x 3 vertices, got " + shape_str(vertices.shape()));
  std::vector<std::size_t> from, to;
  for (const auto& [i, j] : model.edges) from.push_back(i), to.push_back(j);
  return sub(gather_rows(vertices, to), gather_rows(vertices, from));
}

inline HandMesh hand_mesh(const HandModel& model, const HandParams& params) {
  NoGradScope no_grad;
  Tensor v = hand_forward(model, params.tensor());
  return {to_points(v), to_points(edge_vectors(v, model))};
}

inline TriMesh hand_trimesh(const HandModel& model, const std::vector<Vec3>& vertices) {
  return TriMesh{vertices, model.faces};
}

// Text records: a "# rgk-params v1" header, then "<id> <51 floats>" per line.
inline void write_params(std::ostream& out, const std::vector<std::pair<std::string, HandParams>>& records) {
  out << "# rgk-params v1\n";
  char buf[32];
  for (const auto& [id, p] : records) {
    out << id;
    for (double v : p.values) {
      std::snprintf(buf, sizeof buf, " %.17g", v);
      out << buf;
    }
    out << '\n';
  }
}

inline std::vector<std::pair<std::string, HandParams>> read_params(std::istream& in, const std::string& name = "params") {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# rgk-params v1", 0) != 0)
    throw DataError(name + ": missing '# rgk-params v1' header");
  std::vector<std::pair<std::string, HandParams>> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string id;
    HandParams p;
    ss >> id;
    for (auto& v : p.values)
      if (!(ss >> v)) throw DataError(detail::concat(name, ":", lineno, ": expected 51 values after id"));
    std::string extra;
    if (ss >> extra) throw DataError(detail::concat(name, ":", lineno, ": trailing data"));
    if (!p.finite()) throw DataError(detail::concat(name, ":", lineno, ": non-finite parameter"));
    out.emplace_back(id, p);
  }
  return out;
}

}  // namespace rgk
