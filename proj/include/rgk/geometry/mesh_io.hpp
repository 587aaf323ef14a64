#pragma once

// OBJ and ASCII PLY mesh readers, OBJ writer, and the "x y z" point format.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rgk/geometry/types.hpp"

namespace rgk {

namespace detail {

inline std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  for (auto& c : e) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return e;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace detail

inline TriMesh read_obj(std::istream& in, const std::string& name = "obj") {
  TriMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ss >> v[0] >> v[1] >> v[2])) throw DataError(detail::concat(name, ":", lineno, ": malformed vertex"));
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::size_t> poly;
      std::string tok;
      while (ss >> tok) {
        long idx = 0;
        try {
          idx = std::stol(tok.substr(0, tok.find('/')));
        } catch (const std::exception&) {
          throw DataError(detail::concat(name, ":", lineno, ": malformed face index '", tok, "'"));
        }
        long nv = static_cast<long>(mesh.vertices.size());
        long resolved = idx < 0 ? nv + idx : idx - 1;
        if (resolved < 0 || resolved >= nv)
          throw DataError(detail::concat(name, ":", lineno, ": face index ", idx, " out of range"));
        poly.push_back(static_cast<std::size_t>(resolved));
      }
      if (poly.size() < 3) throw DataError(detail::concat(name, ":", lineno, ": face with fewer than 3 vertices"));
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
    }
  }
  mesh.validate();
  return mesh;
}

inline TriMesh read_ply(std::istream& in, const std::string& name = "ply") {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw DataError(name + ": missing ply magic");
  std::size_t nv = 0, nf = 0;
  std::vector<std::string> vprops;
  std::string current;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string kw;
    ss >> kw;
    if (kw == "format") {
      std::string fmt;
      ss >> fmt;
      ascii = fmt == "ascii";
    } else if (kw == "element") {
      std::size_t count = 0;
      ss >> current >> count;
      if (current == "vertex") nv = count;
      if (current == "face") nf = count;
    } else if (kw == "property" && current == "vertex") {
      std::string type, pname;
      ss >> type >> pname;
      vprops.push_back(pname);
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!ascii) throw DataError(name + ": only ASCII PLY is supported");
  auto find_prop = [&](const char* p) {
    for (std::size_t i = 0; i < vprops.size(); ++i)
      if (vprops[i] == p) return i;
    throw DataError(detail::concat(name, ": vertex property '", p, "' missing"));
  };
  std::size_t ix = find_prop("x"), iy = find_prop("y"), iz = find_prop("z");
  TriMesh mesh;
  for (std::size_t v = 0; v < nv; ++v) {
    if (!std::getline(in, line)) throw DataError(name + ": truncated vertex list");
    std::istringstream ss(line);
    std::vector<double> vals(vprops.size());
    for (auto& x : vals)
      if (!(ss >> x)) throw DataError(detail::concat(name, ": malformed vertex ", v));
    mesh.vertices.push_back({vals[ix], vals[iy], vals[iz]});
  }
  for (std::size_t f = 0; f < nf; ++f) {
    if (!std::getline(in, line)) throw DataError(name + ": truncated face list");
    std::istringstream ss(line);
    std::size_t k = 0;
    if (!(ss >> k) || k < 3) throw DataError(detail::concat(name, ": malformed face ", f));
    std::vector<std::size_t> poly(k);
    for (auto& i : poly)
      if (!(ss >> i) || i >= nv) throw DataError(detail::concat(name, ": bad index in face ", f));
    for (std::size_t j = 1; j + 1 < k; ++j) mesh.faces.push_back({poly[0], poly[j], poly[j + 1]});
  }
  mesh.validate();
  return mesh;
}

// Dispatches on the file extension (.obj / .ply).
inline TriMesh read_mesh(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  std::string ext = detail::lower_ext(path);
  if (ext == ".obj") return read_obj(in, path.string());
  if (ext == ".ply") return read_ply(in, path.string());
  throw DataError("unsupported mesh format: " + path.string());
}

inline void write_obj(std::ostream& out, const TriMesh& mesh) {
  char buf[96];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
    out << buf;
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

inline void write_obj(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_obj(out, mesh);
}

inline PointCloud read_points(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    std::istringstream ss(line);
    Vec3 p;
    if (!(ss >> p[0] >> p[1] >> p[2])) throw DataError(detail::concat(path.string(), ":", lineno, ": expected x y z"));
    cloud.points.push_back(p);
  }
  if (cloud.points.empty()) throw DataError(path.string() + ": no points");
  return cloud;
}

inline void write_points(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  char buf[96];
  for (const auto& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    out << buf;
  }
}

}  // namespace rgk
