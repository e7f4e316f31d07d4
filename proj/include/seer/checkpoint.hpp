#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "seer/net.hpp"
#include "seer/tensor.hpp"

namespace seer {

// Checkpoint file layout (all integers and floats little-endian):
//   magic "SEERCKPT" | u32 format_version | u32 meta_len | meta (UTF-8, the
//   model manifest as key=value lines) | u32 n_params | n_params x
//   { u32 name_len | name | u32 rows | u32 cols } | f64 arrays in manifest
//   order | u8 has_opt | optional optimizer section in the same layout
//   (u32 count, entries, arrays).
inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'E', 'R', 'C', 'K', 'P', 'T'};
inline constexpr uint32_t kCheckpointVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

struct NamedTensor {
  std::string name;
  Tensor2D value;
};

struct Checkpoint {
  uint32_t format_version = kCheckpointVersion;
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> params;
  bool has_optimizer = false;
  std::vector<NamedTensor> optimizer;

  const NamedTensor* find(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return &p;
    return nullptr;
  }

  std::string meta_at(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw std::runtime_error("checkpoint: missing manifest key '" + key + "'");
    return it->second;
  }

  double meta_double(const std::string& key) const { return std::stod(meta_at(key)); }
  int meta_int(const std::string& key) const { return std::stoi(meta_at(key)); }
};

namespace detail {

inline void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

inline void write_section(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  write_u32(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    write_u32(os, static_cast<uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(os, static_cast<uint32_t>(t.value.rows()));
    write_u32(os, static_cast<uint32_t>(t.value.cols()));
  }
  for (const auto& t : tensors) {
    os.write(reinterpret_cast<const char*>(t.value.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.value.size())));
  }
}

inline std::vector<NamedTensor> read_section(std::istream& is) {
  uint32_t n = read_u32(is);
  std::vector<NamedTensor> tensors(n);
  for (auto& t : tensors) {
    uint32_t name_len = read_u32(is);
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    uint32_t rows = read_u32(is);
    uint32_t cols = read_u32(is);
    t.value.resize(rows, cols);
  }
  for (auto& t : tensors) {
    is.read(reinterpret_cast<char*>(t.value.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(t.value.size())));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor data");
  }
  return tensors;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_u32(os, ckpt.format_version);
  std::string meta;
  for (const auto& [k, v] : ckpt.meta) meta += k + "=" + v + "\n";
  detail::write_u32(os, static_cast<uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  detail::write_section(os, ckpt.params);
  char has_opt = ckpt.has_optimizer ? 1 : 0;
  os.write(&has_opt, 1);
  if (ckpt.has_optimizer) detail::write_section(os, ckpt.optimizer);
  if (!os) throw std::runtime_error("checkpoint: write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  Checkpoint ckpt;
  ckpt.format_version = detail::read_u32(is);
  if (ckpt.format_version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported format_version " +
                             std::to_string(ckpt.format_version) + " in " + path);
  }
  uint32_t meta_len = detail::read_u32(is);
  std::string meta(meta_len, '\0');
  is.read(meta.data(), meta_len);
  size_t pos = 0;
  while (pos < meta.size()) {
    size_t eol = meta.find('\n', pos);
    if (eol == std::string::npos) eol = meta.size();
    std::string line = meta.substr(pos, eol - pos);
    pos = eol + 1;
    size_t eq = line.find('=');
    if (eq != std::string::npos) ckpt.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ckpt.params = detail::read_section(is);
  char has_opt = 0;
  is.read(&has_opt, 1);
  if (is && has_opt == 1) {
    ckpt.has_optimizer = true;
    ckpt.optimizer = detail::read_section(is);
  }
  return ckpt;
}

/// Copies the parameter set's tensors into named checkpoint entries.
inline std::vector<NamedTensor> snapshot_params(const ParameterSet& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto& r : params) out.push_back({r.name, *r.value});
  return out;
}

/// Restores tensors by name; throws on missing names or shape mismatch.
inline void restore_params(ParameterSet& params, const Checkpoint& ckpt) {
  for (auto& r : params) {
    const NamedTensor* src = ckpt.find(r.name);
    if (!src) throw std::runtime_error("checkpoint: parameter '" + r.name + "' not found");
    require_shape(src->value, r.value->rows(), r.value->cols(), r.name.c_str());
    *r.value = src->value;
  }
}

}  // namespace seer
