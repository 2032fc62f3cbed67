#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mfrl/nn.hpp"

namespace mfrl {

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> bytes);
Digest sha256(std::string_view text);
std::string to_hex(const Digest& digest);

// Binary checkpoint, all integers little-endian:
//
//   "MFRLCKPT"  u32 version
//   repeated sections: u32 tag, u64 payload length, payload
//     1 spec        u32 input, u32 depth, depth x u32 hidden, u32 output,
//                   u8 activation, u8 bias
//     2 theta_sgd   u64 count, count x f64
//     3 theta_swa   same layout (absent when no SWA phase ran)
//     4 log digest  32 bytes, SHA-256 of train_log.csv
//     5 config hash 32 bytes, SHA-256 of the canonical training config
//     6 seed        u64
//
// Sections are written in tag order; decoding requires 1, 2, 4, 5 and 6.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  MlpSpec spec;
  ParamVector theta_sgd;
  std::optional<ParamVector> theta_swa;
  Digest log_digest{};
  Digest config_hash{};
  std::uint64_t seed = 0;

  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mfrl
