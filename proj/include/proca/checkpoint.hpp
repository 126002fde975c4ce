#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "proca/tensor.hpp"

namespace proca {

/// Flat checkpoint container: named tensors plus a schedule step counter.
/// On-disk layout (all integers and floats little-endian):
///   magic "PRCK" | u32 version | u64 step | u32 entry_count |
///   entries: u16 name_len | name | u8 dtype (0=f32, 1=i64) |
///            u8 ndim | u32 dims[ndim] | payload
/// Model parameters are stored as raw 32-bit floats; integer side arrays
/// (prototype counts, masks) as 64-bit ints.
struct CheckpointEntry {
  std::vector<std::uint32_t> dims;
  std::vector<float> f32;
  std::vector<std::int64_t> i64;

  bool is_f32() const { return i64.empty(); }
  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

struct Checkpoint {
  std::uint64_t step = 0;
  std::map<std::string, CheckpointEntry> entries;

  template <typename T>
  void put_matrix(const std::string& name, const Mat<T>& m) {
    CheckpointEntry e;
    e.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
    e.f32.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) e.f32[i] = static_cast<float>(m.data()[i]);
    entries[name] = std::move(e);
  }

  void put_i64(const std::string& name, const std::vector<std::int64_t>& v) {
    CheckpointEntry e;
    e.dims = {static_cast<std::uint32_t>(v.size())};
    e.i64 = v;
    entries[name] = std::move(e);
  }

  template <typename T>
  Mat<T> get_matrix(const std::string& name) const {
    const auto it = entries.find(name);
    if (it == entries.end()) throw InputError("checkpoint: missing tensor " + name);
    const auto& e = it->second;
    if (!e.is_f32() || e.dims.size() != 2)
      throw InputError("checkpoint: tensor " + name + " is not a 2-d float matrix");
    Mat<T> m(e.dims[0], e.dims[1]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(e.f32[i]);
    return m;
  }

  std::vector<std::int64_t> get_i64(const std::string& name) const {
    const auto it = entries.find(name);
    if (it == entries.end()) throw InputError("checkpoint: missing tensor " + name);
    if (it->second.is_f32()) throw InputError("checkpoint: tensor " + name + " is not i64");
    return it->second.i64;
  }

  bool has(const std::string& name) const { return entries.count(name) > 0; }
};

namespace detail {

template <typename V>
void write_raw(std::ostream& os, const V& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(value));
}

template <typename V>
V read_raw(std::istream& is) {
  V value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(value));
  return value;
}

}  // namespace detail

inline constexpr char kCheckpointMagic[4] = {'P', 'R', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("save_checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, 4);
  detail::write_raw(os, kCheckpointVersion);
  detail::write_raw(os, ckpt.step);
  detail::write_raw(os, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [name, e] : ckpt.entries) {
    detail::write_raw(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_raw(os, static_cast<std::uint8_t>(e.is_f32() ? 0 : 1));
    detail::write_raw(os, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) detail::write_raw(os, d);
    if (e.is_f32())
      os.write(reinterpret_cast<const char*>(e.f32.data()),
               static_cast<std::streamsize>(e.f32.size() * sizeof(float)));
    else
      os.write(reinterpret_cast<const char*>(e.i64.data()),
               static_cast<std::streamsize>(e.i64.size() * sizeof(std::int64_t)));
  }
  if (!os) throw InputError("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("load_checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw InputError("load_checkpoint: bad magic in " + path);
  if (detail::read_raw<std::uint32_t>(is) != kCheckpointVersion)
    throw InputError("load_checkpoint: unsupported version in " + path);
  Checkpoint ckpt;
  ckpt.step = detail::read_raw<std::uint64_t>(is);
  const auto count = detail::read_raw<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_raw<std::uint16_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto dtype = detail::read_raw<std::uint8_t>(is);
    const auto ndim = detail::read_raw<std::uint8_t>(is);
    CheckpointEntry e;
    e.dims.resize(ndim);
    for (auto& d : e.dims) d = detail::read_raw<std::uint32_t>(is);
    const std::size_t n = e.element_count();
    if (dtype == 0) {
      e.f32.resize(n);
      is.read(reinterpret_cast<char*>(e.f32.data()),
              static_cast<std::streamsize>(n * sizeof(float)));
    } else {
      e.i64.resize(n);
      is.read(reinterpret_cast<char*>(e.i64.data()),
              static_cast<std::streamsize>(n * sizeof(std::int64_t)));
    }
    ckpt.entries[name] = std::move(e);
  }
  if (!is) throw InputError("load_checkpoint: truncated file " + path);
  return ckpt;
}

}  // namespace proca
