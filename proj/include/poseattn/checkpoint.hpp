#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "poseattn/config.hpp"
#include "poseattn/model.hpp"
#include "poseattn/nn.hpp"

namespace poseattn {

inline constexpr int kCheckpointVersion = 1;

/// The streams a run trains, with their optimizer states.
struct Models {
  config::RunConfig config;
  config::ModelDims dims;
  std::optional<model::RgbStream> rgb;
  std::optional<model::PoseStream> pose;
  std::optional<nn::AdamState> rgb_adam;
  std::optional<nn::AdamState> pose_adam;

  std::vector<NamedTensor> parameters() const;
};

// Initializes every stream the config asks for, each from its own seed.
Models build_models(const config::RunConfig& c, const config::ModelDims& dims);

/// Writes <dir>/manifest.json (version, config, dims, parameter shapes,
/// `extra`) and <dir>/params.bin (named tensors followed by Adam moments).
void save_checkpoint(const std::filesystem::path& dir, const Models& models,
                     const nlohmann::json& extra = nlohmann::json::object());
Models load_checkpoint(const std::filesystem::path& dir);
nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir);

// Snapshot of parameter values, used for keeping the best epoch in memory.
std::vector<std::vector<double>> snapshot(std::span<const NamedTensor> params);
void restore(std::span<const NamedTensor> params, const std::vector<std::vector<double>>& values);

}  // namespace poseattn
