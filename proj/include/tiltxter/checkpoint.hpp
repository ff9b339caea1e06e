#pragma once

// Checkpoint file: "TXMD", u16 version, u32 input C/H/W, u16 layer count,
// per layer u8 tag + u32 dims, u64 value count, the model's flat state as
// f64, then u32 CRC32 over every preceding byte.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tiltxter/model.hpp"

namespace tiltxter::nn {

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace tiltxter::nn
