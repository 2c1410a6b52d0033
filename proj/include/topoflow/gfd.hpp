#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "topoflow/fields.hpp"

namespace topoflow::gfd {

/// Gridded tensor container (".gfd"):
///   "GFD1" | u32 version=1 | u32 C | u32 H | u32 W | u32 p | u32 c | u32 r
///   C x (u16 len + UTF-8 name, u16 len + UTF-8 unit)
///   C*H*W little-endian float32, channel-major then row-major.
inline constexpr std::uint32_t version = 1;

std::vector<std::uint8_t> encode(const Field& field);
/// Throws FormatError with the byte offset of the first problem.
Field decode(std::span<const std::uint8_t> bytes);

void write(const Field& field, const std::filesystem::path& path);
void write(const LandMask& mask, const std::filesystem::path& path);
Field read(const std::filesystem::path& path);
LandMask read_mask(const std::filesystem::path& path);

}  // namespace topoflow::gfd
