#include "rlattack/nn_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rlattack/bytes.hpp"

namespace rlattack {

namespace {

constexpr char kMagic[] = "RLAL-NET";  // written with its terminating NUL
constexpr std::size_t kMagicSize = sizeof(kMagic);

}  // namespace

std::string serialize_network(const Network& net) {
  ByteWriter w;
  w.raw(kMagic, kMagicSize);
  w.u32(kNetworkFormatVersion);
  w.u32(static_cast<std::uint32_t>(net.layer_count()));
  for (const auto& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.in_dim()));
    w.u32(static_cast<std::uint32_t>(l.out_dim()));
    w.u8(static_cast<std::uint8_t>(l.activation));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.f64(l.weight(r, c));
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) w.f64(l.bias(r));
  }
  return w.take();
}

Network deserialize_network(const std::string& bytes) {
  ByteReader r(bytes);
  std::string magic = r.raw(kMagicSize);
  if (std::memcmp(magic.data(), kMagic, kMagicSize) != 0) {
    throw std::runtime_error("network file: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kNetworkFormatVersion) {
    throw std::runtime_error("network file: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  if (count == 0 || count > 1024) throw std::runtime_error("network file: implausible layer count");
  std::vector<DenseLayer<double>> layers;
  layers.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t in = r.u32();
    const std::uint32_t out = r.u32();
    const std::uint8_t act = r.u8();
    if (act > 1) throw std::runtime_error("network file: unknown activation code");
    if (in == 0 || out == 0) throw std::runtime_error("network file: zero layer dimension");
    if (static_cast<std::uint64_t>(in) * out * 8 > r.remaining()) {
      throw std::runtime_error("network file: truncated weights");
    }
    DenseLayer<double> l;
    l.activation = static_cast<Activation>(act);
    l.weight.resize(out, in);
    for (std::uint32_t row = 0; row < out; ++row) {
      for (std::uint32_t col = 0; col < in; ++col) l.weight(row, col) = r.f64();
    }
    l.bias.resize(out);
    for (std::uint32_t row = 0; row < out; ++row) l.bias(row) = r.f64();
    layers.push_back(std::move(l));
  }
  if (r.remaining() != 0) throw std::runtime_error("network file: trailing bytes");
  return Network(std::move(layers));
}

void save_network(const Network& net, const std::filesystem::path& path) {
  write_file(path, serialize_network(net));
}

Network load_network(const std::filesystem::path& path) { return deserialize_network(read_file(path)); }

}  // namespace rlattack
