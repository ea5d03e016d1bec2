#pragma once

// Binary checkpoint layout (all integers and floats little-endian):
//
//   magic        8 bytes  "CESDCKPT"
//   version      u32      kCheckpointVersion
//   count        u32      number of networks
//   per network:
//     name_len   u32, then name_len bytes (UTF-8, no terminator)
//     layers     u32
//     per layer:
//       rows     u32      output width
//       cols     u32      input width
//       act      u8       0 identity, 1 relu, 2 tanh
//       weight   rows*cols f64, row-major
//       bias     rows f64

#include "cesd/mlp.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cesd {

inline constexpr std::array<char, 8> kCheckpointMagic{'C', 'E', 'S', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedNetwork {
  std::string name;
  Mlp net;
};

struct Checkpoint {
  std::vector<NamedNetwork> networks;

  void put(std::string name, Mlp net) {
    for (auto& n : networks)
      if (n.name == name) {
        n.net = std::move(net);
        return;
      }
    networks.push_back({std::move(name), std::move(net)});
  }

  const Mlp* find(std::string_view name) const {
    for (const auto& n : networks)
      if (n.name == name) return &n.net;
    return nullptr;
  }

  const Mlp& at(std::string_view name) const {
    if (const Mlp* p = find(name)) return *p;
    throw std::runtime_error("checkpoint has no network named '" + std::string(name) + "'");
  }
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline void read_exact(std::istream& is, void* dst, std::size_t n) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) throw std::runtime_error("corrupt checkpoint: truncated");
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  read_exact(is, b, 4);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

inline double get_f64(std::istream& is) {
  unsigned char b[8];
  read_exact(is, b, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(ckpt.networks.size()));
  for (const auto& [name, net] : ckpt.networks) {
    detail::put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& layer : net.layers) {
      detail::put_u32(os, static_cast<std::uint32_t>(layer.weight.rows()));
      detail::put_u32(os, static_cast<std::uint32_t>(layer.weight.cols()));
      const auto act = static_cast<char>(layer.activation);
      os.write(&act, 1);
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) detail::put_f64(os, layer.weight(r, c));
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) detail::put_f64(os, layer.bias(r));
    }
  }
  if (!os) throw std::runtime_error("failed writing checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  std::array<char, 8> magic{};
  detail::read_exact(is, magic.data(), magic.size());
  if (magic != kCheckpointMagic) throw std::runtime_error("corrupt checkpoint: bad magic");
  const auto version = detail::get_u32(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  constexpr std::uint32_t kMaxDim = 1u << 16;
  Checkpoint ckpt;
  const auto count = detail::get_u32(is);
  if (count > 4096) throw std::runtime_error("corrupt checkpoint: implausible network count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::get_u32(is);
    if (name_len > 256) throw std::runtime_error("corrupt checkpoint: implausible name length");
    std::string name(name_len, '\0');
    detail::read_exact(is, name.data(), name_len);
    const auto n_layers = detail::get_u32(is);
    if (n_layers == 0 || n_layers > 64) throw std::runtime_error("corrupt checkpoint: implausible layer count");
    Mlp net;
    for (std::uint32_t l = 0; l < n_layers; ++l) {
      const auto rows = detail::get_u32(is);
      const auto cols = detail::get_u32(is);
      if (rows == 0 || cols == 0 || rows > kMaxDim || cols > kMaxDim)
        throw std::runtime_error("corrupt checkpoint: implausible layer shape");
      char act = 0;
      detail::read_exact(is, &act, 1);
      if (act < 0 || act > 3) throw std::runtime_error("corrupt checkpoint: unknown activation");
      Layer layer;
      layer.activation = static_cast<Activation>(act);
      layer.weight.resize(rows, cols);
      layer.bias.resize(rows);
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = detail::get_f64(is);
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = detail::get_f64(is);
      net.layers.push_back(std::move(layer));
    }
    try {
      validate(net);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(std::string("corrupt checkpoint: ") + e.what());
    }
    ckpt.networks.push_back({std::move(name), std::move(net)});
  }
  return ckpt;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_checkpoint(os, ckpt);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  return read_checkpoint(is);
}

}  // namespace cesd
