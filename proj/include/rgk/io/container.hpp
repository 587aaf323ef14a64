#pragma once

// Named-array container used for checkpoints and hand-model files.
//
// Layout (all integers little-endian):
//   "RGKC1"                     magic, 5 bytes
//   u32 version                 currently 1
//   u32 n, n bytes              config snapshot (JSON text)
//   u64 rng digest
//   u32 entry count
//   per entry:
//     u32 n, n bytes            name
//     u32 rank, rank x u64      dims
//     numel x f32               data
// Entries keep insertion order, so load followed by save reproduces the
// input bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "rgk/core/error.hpp"

namespace rgk {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

struct ContainerEntry {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<float> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  std::vector<double> as_double() const { return {data.begin(), data.end()}; }
};

class Container {
 public:
  static constexpr char kMagic[5] = {'R', 'G', 'K', 'C', '1'};
  static constexpr std::uint32_t kVersion = 1;

  std::string config;  // JSON text
  std::uint64_t rng_digest = 0;

  void put(const std::string& name, std::vector<std::uint64_t> dims, std::span<const double> values) {
    std::vector<float> data(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) data[i] = static_cast<float>(values[i]);
    put_f32(name, std::move(dims), std::move(data));
  }

  void put_f32(const std::string& name, std::vector<std::uint64_t> dims, std::vector<float> data) {
    if (has(name)) throw DataError("duplicate container entry '" + name + "'");
    ContainerEntry e{name, std::move(dims), std::move(data)};
    if (e.numel() != e.data.size())
      throw std::invalid_argument(detail::concat("entry '", name, "': dims describe ", e.numel(), " values, got ",
                                                 e.data.size()));
    entries_.push_back(std::move(e));
  }

  bool has(const std::string& name) const { return find(name) != nullptr; }

  const ContainerEntry& get(const std::string& name) const {
    const ContainerEntry* e = find(name);
    if (!e) throw DataError("missing container entry '" + name + "'");
    return *e;
  }

  const std::vector<ContainerEntry>& entries() const { return entries_; }

  void write(std::ostream& out) const {
    out.write(kMagic, sizeof kMagic);
    put_u32(out, kVersion);
    put_str(out, config);
    put_u64(out, rng_digest);
    put_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& e : entries_) {
      put_str(out, e.name);
      put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
      for (auto d : e.dims) put_u64(out, d);
      out.write(reinterpret_cast<const char*>(e.data.data()), static_cast<std::streamsize>(e.data.size() * 4));
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    write(out);
    if (!out) throw DataError("write failed: " + path.string());
  }

  static Container read(std::istream& in, const std::string& name = "container") {
    char magic[5];
    if (!in.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0)
      throw DataError(name + ": bad magic (not an RGKC1 container)");
    Reader r{in, name};
    std::uint32_t version = r.u32();
    if (version != kVersion) throw DataError(detail::concat(name, ": unsupported container version ", version));
    Container c;
    c.config = r.str();
    c.rng_digest = r.u64();
    std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string ename = r.str();
      std::uint32_t rank = r.u32();
      if (rank > 8) throw DataError(detail::concat(name, ": entry '", ename, "' has implausible rank ", rank));
      std::vector<std::uint64_t> dims(rank);
      std::uint64_t numel = 1;
      for (auto& d : dims) {
        d = r.u64();
        numel *= d;
        if (numel > (std::uint64_t{1} << 32)) throw DataError(name + ": entry '" + ename + "' is too large");
      }
      std::vector<float> data(numel);
      r.bytes(reinterpret_cast<char*>(data.data()), numel * 4);
      c.put_f32(ename, std::move(dims), std::move(data));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(name + ": trailing bytes after last entry");
    return c;
  }

  static Container load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return read(in, path.string());
  }

 private:
  std::vector<ContainerEntry> entries_;

  const ContainerEntry* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  struct Reader {
    std::istream& in;
    const std::string& name;
    void bytes(char* dst, std::size_t n) {
      if (!in.read(dst, static_cast<std::streamsize>(n))) throw DataError(name + ": truncated container");
    }
    std::uint32_t u32() {
      std::uint32_t v;
      bytes(reinterpret_cast<char*>(&v), 4);
      return v;
    }
    std::uint64_t u64() {
      std::uint64_t v;
      bytes(reinterpret_cast<char*>(&v), 8);
      return v;
    }
    std::string str() {
      std::uint32_t n = u32();
      if (n > (1u << 26)) throw DataError(name + ": implausible string length");
      std::string s(n, '\0');
      bytes(s.data(), n);
      return s;
    }
  };

  static void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
  static void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
  static void put_str(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
};

}  // namespace rgk
