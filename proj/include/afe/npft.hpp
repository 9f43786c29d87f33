#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "afe/tensor.hpp"

namespace afe::npft {

// NPFT v1, little-endian throughout:
//   0..3  "NPFT"
//   4     version (1)
//   5     dtype (1 = f32)
//   6..7  reserved, zero
//   u32   ndim
//   u64   extents[ndim]
//   f32   payload, row-major
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;

std::string serialize(const Tensor& t);
Tensor deserialize(std::string_view bytes);

// write_tensor goes through a temporary file and a rename.
void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace afe::npft
