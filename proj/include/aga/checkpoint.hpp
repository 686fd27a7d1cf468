#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "aga/model.hpp"

namespace aga {

inline constexpr char kCheckpointMagic[6] = {'A', 'G', 'A', 'G', 'I', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout, all integers little-endian:
//   magic "AGAGI\0" | u32 version | u64 header length | header text
//   | u64 payload length | f32 values of every parameter in named() order
// The header holds the model config as key=value lines followed by
// `meta.<key>=<value>` lines.
struct Checkpoint {
  ModelConfig config;
  std::map<std::string, std::string> meta;
  Parameters<float> params;
};

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const std::map<std::string, std::string>& meta, const Parameters<float>& params);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aga
