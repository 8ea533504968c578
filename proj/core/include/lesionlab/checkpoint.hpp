#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "lesionlab/model.hpp"

namespace lesionlab {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic, format version, JSON header (config, tensor
/// names and shapes, zero mask) and the raw little-endian doubles.
/// Round-trips bit-exactly.
std::string serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

}  // namespace lesionlab
