#pragma once

// Grasp displacement: the object is a free rigid body under gravity (-z),
// the hand a static collider given by a signed distance grid. Semi-implicit
// Euler with sequential impulses at object surface samples, Coulomb friction
// and Baumgarte position correction.

#include "rgk/geometry/primitives.hpp"
#include "rgk/geometry/sampling.hpp"
#include "rgk/geometry/solid.hpp"

namespace rgk {

struct SimConfig {
  double gravity = 9.81;
  double timestep = 1e-3;
  double duration = 1.0;
  double restitution = 0.0;
  double friction = 0.8;
  double pitch = 0.005;      // voxel pitch of the volume metric
  double sdf_pitch = 0.002;  // hand collider grid
  double sdf_band = 0.012;
  std::size_t surface_samples = 512;
  std::size_t iterations = 10;
  double baumgarte = 0.2;
  double slop = 2e-4;
  double max_pushout = 0.1;  // m/s
  double density = 1000.0;
  std::uint64_t seed = 0;

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw UsageError(std::string("sim config: ") + what);
    };
    need(timestep > 0, "timestep must be > 0");
    need(duration >= timestep, "duration must be >= timestep");
    need(pitch > 0 && sdf_pitch > 0 && sdf_band > sdf_pitch, "pitches must be > 0 and the band wider than sdf_pitch");
    need(restitution >= 0 && friction >= 0 && gravity >= 0, "restitution, friction and gravity must be >= 0");
    need(surface_samples >= 1 && iterations >= 1, "surface_samples and iterations must be >= 1");
    need(density > 0, "density must be > 0");
  }
};

struct MassProperties {
  double volume = 0;
  Vec3 center{};
  Mat3 inertia{};  // about the center, unit density
};

// Signed tetrahedra against the origin. Overlapping closed parts are counted
// once per part.
inline MassProperties mass_properties(const TriMesh& mesh) {
  double vol = 0;
  Vec3 first{};
  double second[3][3] = {};
  for (const auto& f : mesh.faces) {
    const Vec3 &a = mesh.vertices[f[0]], &b = mesh.vertices[f[1]], &c = mesh.vertices[f[2]];
    double det = dot(a, cross(b, c));
    vol += det / 6.0;
    Vec3 s = a + b + c;
    first = first + (det / 24.0) * s;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        second[i][j] += det / 120.0 * (a[i] * a[j] + b[i] * b[j] + c[i] * c[j] + s[i] * s[j]);
  }
  if (!(vol > 0)) throw std::invalid_argument("mass properties: mesh encloses no positive volume");
  MassProperties m;
  m.volume = vol;
  m.center = (1.0 / vol) * first;
  double cov[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) cov[i][j] = second[i][j] - vol * m.center[i] * m.center[j];
  double trace = cov[0][0] + cov[1][1] + cov[2][2];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m.inertia[3 * i + j] = (i == j ? trace : 0.0) - cov[i][j];
  return m;
}

inline Mat3 inverse3(const Mat3& A) {
  Mat3 inv{A[4] * A[8] - A[5] * A[7], A[2] * A[7] - A[1] * A[8], A[1] * A[5] - A[2] * A[4],
           A[5] * A[6] - A[3] * A[8], A[0] * A[8] - A[2] * A[6], A[2] * A[3] - A[0] * A[5],
           A[3] * A[7] - A[4] * A[6], A[1] * A[6] - A[0] * A[7], A[0] * A[4] - A[1] * A[3]};
  double det = A[0] * inv[0] + A[1] * inv[3] + A[2] * inv[6];
  if (det == 0) throw std::invalid_argument("inverse3: singular matrix");
  for (auto& x : inv) x /= det;
  return inv;
}

struct SimResult {
  double displacement = 0;  // m
  Vec3 final_center{};
  std::size_t steps = 0;
  std::size_t max_contacts = 0;
};

// Runs the simulation; an empty hand mesh means no collider.
inline SimResult simulate_drop(const TriMesh& hand, const TriMesh& object, const SimConfig& cfg) {
  cfg.validate();
  MassProperties mp = mass_properties(object);
  const double mass = cfg.density * mp.volume;
  Mat3 body_inertia = mp.inertia;
  for (auto& x : body_inertia) x *= cfg.density;
  const Mat3 body_inv = inverse3(body_inertia);

  std::vector<Vec3> local;
  for (const auto& p : resample_mesh(object, cfg.surface_samples, stream_seed(cfg.seed, "sim_samples")).points)
    local.push_back(p - mp.center);

  const bool has_hand = !hand.faces.empty();
  SignedDistanceGrid sdf;
  if (has_hand) sdf = SignedDistanceGrid(hand, cfg.sdf_pitch, cfg.sdf_band);

  Vec3 x = mp.center, v{}, w{};
  Mat3 R = identity3();
  const double dt = cfg.timestep;
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration / dt));
  // Released potential energy is measured from the highest point reached:
  // push-out can lift an embedded object before it falls back.
  double z_peak = x[2];
  const double energy_floor = mass * cfg.gravity * 1e-3;

  struct Contact {
    Vec3 r, n, t1, t2;
    double phi, target, kn, kt1, kt2, ln = 0, lt1 = 0, lt2 = 0;
  };
  std::vector<Contact> contacts;
  SimResult result;
  for (std::size_t step = 0; step < steps; ++step) {
    v[2] -= cfg.gravity * dt;
    Mat3 inv_world = matmul3(matmul3(R, body_inv), transpose3(R));
    contacts.clear();
    if (has_hand) {
      for (const auto& q : local) {
        Vec3 r = rotate(R, q);
        Vec3 p = x + r;
        double phi = sdf.sample(p);
        if (phi >= sdf.band() * 0.999) continue;
        Vec3 n = sdf.normal(p);
        if (norm(n) == 0) continue;
        Vec3 vp = v + cross(w, r);
        double vn = dot(vp, n);
        // Speculative margin: only points that could reach the surface this step.
        if (phi > cfg.slop + std::max(0.0, -vn) * dt) continue;
        Contact c;
        c.r = r;
        c.n = n;
        c.phi = phi;
        Vec3 helper = std::fabs(n[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        c.t1 = normalized(cross(n, helper));
        c.t2 = cross(n, c.t1);
        auto eff = [&](const Vec3& d) {
          Vec3 rd = cross(r, d);
          return 1.0 / (1.0 / mass + dot(cross(rotate(inv_world, rd), r), d));
        };
        c.kn = eff(n);
        c.kt1 = eff(c.t1);
        c.kt2 = eff(c.t2);
        if (phi > 0) {
          c.target = -phi / dt;
          // Arrives within this step: bounce now instead of landing softly.
          if (cfg.restitution > 0 && phi + vn * dt < 0) c.target = std::max(c.target, -cfg.restitution * vn);
        } else {
          double push = std::min(cfg.max_pushout, cfg.baumgarte * std::max(0.0, -phi - cfg.slop) / dt);
          c.target = std::max(push, vn < 0 ? -cfg.restitution * vn : 0.0);
        }
        contacts.push_back(c);
      }
    }
    result.max_contacts = std::max(result.max_contacts, contacts.size());
    auto apply = [&](const Vec3& r, const Vec3& impulse) {
      v = v + (1.0 / mass) * impulse;
      w = w + rotate(inv_world, cross(r, impulse));
    };
    for (std::size_t it = 0; it < cfg.iterations && !contacts.empty(); ++it) {
      for (auto& c : contacts) {
        Vec3 vp = v + cross(w, c.r);
        double dl = c.kn * (c.target - dot(vp, c.n));
        double ln = std::max(0.0, c.ln + dl);
        dl = ln - c.ln;
        c.ln = ln;
        apply(c.r, dl * c.n);
        if (c.phi > cfg.slop) continue;
        vp = v + cross(w, c.r);
        double t1 = c.lt1 - c.kt1 * dot(vp, c.t1), t2 = c.lt2 - c.kt2 * dot(vp, c.t2);
        double cap = cfg.friction * c.ln, mag = std::hypot(t1, t2);
        if (mag > cap) t1 *= cap / mag, t2 *= cap / mag;
        apply(c.r, (t1 - c.lt1) * c.t1 + (t2 - c.lt2) * c.t2);
        c.lt1 = t1;
        c.lt2 = t2;
      }
    }
    x = x + dt * v;
    R = matmul3(axis_angle_matrix(dt * w), R);

    Mat3 inertia_world = matmul3(matmul3(R, body_inertia), transpose3(R));
    double kinetic = 0.5 * mass * dot(v, v) + 0.5 * dot(w, rotate(inertia_world, w));
    z_peak = std::max(z_peak, x[2]);
    double budget = mass * cfg.gravity * (z_peak - x[2]) + energy_floor;
    if (!std::isfinite(kinetic) || kinetic > 10.0 * budget)
      throw NumericError(detail::concat("simulation unstable at step ", step, ": kinetic energy ", kinetic,
                                        " J exceeds 10x the released potential energy ", budget, " J"));
  }
  result.steps = steps;
  result.final_center = x;
  result.displacement = norm(x - mp.center);
  return result;
}

inline double grasp_displacement(const TriMesh& hand, const TriMesh& object, const SimConfig& cfg = {}) {
  return simulate_drop(hand, object, cfg).displacement;
}

}  // namespace rgk
