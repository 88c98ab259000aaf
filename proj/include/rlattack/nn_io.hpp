#pragma once

// Binary network persistence.
//
// Layout (all integers and reals little-endian):
//   "RLAL-NET\0"            9 bytes
//   format version          u32 (currently 1)
//   layer count             u32
//   per layer:
//     in_dim, out_dim       u32, u32
//     activation            u8 (0 identity, 1 relu)
//     weights               out_dim*in_dim f64, row-major
//     biases                out_dim f64

#include <cstdint>
#include <filesystem>
#include <string>

#include "rlattack/nn.hpp"

namespace rlattack {

inline constexpr std::uint32_t kNetworkFormatVersion = 1;

std::string serialize_network(const Network& net);
Network deserialize_network(const std::string& bytes);

void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

}  // namespace rlattack
