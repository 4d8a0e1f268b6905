#pragma once

#include <string>

#include "cfel/types.hpp"

namespace cfel {

// Parameter checkpoint: 16-byte header (magic "CFEL", u32 version, u64
// dimension, both little-endian) followed by the values as little-endian
// 64-bit floats.
inline constexpr char kCheckpointMagic[4] = {'C', 'F', 'E', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::string& path, const ParamVec& params);
ParamVec read_checkpoint(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace cfel
