#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hintpose/model.hpp"
#include "hintpose/pipeline.hpp"
#include "hintpose/trainer.hpp"

namespace hintpose::cli {

// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
int run(int argc, const char* const* argv);

// Section parsers shared by subcommands and tests. Unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
EvalConfig eval_config_from_json(const nlohmann::json& j);
nlohmann::json load_config_file(const std::string& path);

}  // namespace hintpose::cli
