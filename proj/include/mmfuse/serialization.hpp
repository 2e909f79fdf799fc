#pragma once

#include <filesystem>

#include <json.hpp>

#include "mmfuse/core_data.hpp"
#include "mmfuse/encoder.hpp"
#include "mmfuse/experiment.hpp"
#include "mmfuse/fusion_model.hpp"
#include "mmfuse/train.hpp"

namespace mmfuse {

using Json = nlohmann::json;

// Config sections. from_json fills unspecified keys with defaults and throws
// ConfigError naming the offending field.
Json to_json(const EncoderSpec& spec);
EncoderSpec encoder_spec_from_json(const Json& j);

Json to_json(const FusionModelConfig& config);
FusionModelConfig model_config_from_json(const Json& j);

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

Json to_json(const ClinicalSchema& schema);
ClinicalSchema schema_from_json(const Json& j);

Json to_json(const NormalizerStats& stats);
NormalizerStats stats_from_json(const Json& j);

Json to_json(const MetricsReport& report);

// Binary checkpoint layout (all integers little-endian):
//   8 bytes   magic "MMFCKPT1"
//   u32       length of the config text, then that many bytes of JSON
//             (fold, model config, schema, normalizer stats, loss history)
//   u32       tensor count, then per tensor:
//               u32 name length, name bytes (UTF-8)
//               u32 rank, rank x u32 dims
//               prod(dims) x float32 values, row-major
void save_checkpoint(const std::filesystem::path& path, const FoldModel& model);
FoldModel load_checkpoint(const std::filesystem::path& path);

}  // namespace mmfuse
