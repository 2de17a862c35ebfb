#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "gyrocal/nn/train.hpp"
#include "gyrocal/pipeline.hpp"

namespace gyrocal {

/// Everything one experiment run needs, serializable to a single JSON file.
struct RunConfig {
  CorpusConfig corpus;
  PipelineConfig pipeline;
  nn::ModelConfig model;
  nn::TrainHyper training;
  struct Seeds {
    std::uint64_t corpus = 1;
    std::uint64_t split = 2;
    std::uint64_t training = 3;
  } seeds;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

/// FNV-1a hash of the canonical serialized config, as 16 hex digits. Embedded
/// in output files so results can be traced to the configuration that
/// produced them.
std::string config_hash(const RunConfig& config);

}  // namespace gyrocal
