#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "poseattn/dataset.hpp"
#include "poseattn/model.hpp"

namespace poseattn::config {

inline constexpr int kConfigVersion = 1;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class ModelVariant { PoseOnly, RgbOnly, TwoStream };

const char* to_string(ModelVariant v);
ModelVariant parse_variant(const std::string& s);

struct RgbSection {
  model::Conditioning conditioning = model::Conditioning::AugmentedPose;
  model::Pooling pooling = model::Pooling::Attention;
  model::EncoderKind encoder = model::EncoderKind::Precomputed;
  std::size_t feature_dim = 0;  // encoder output size; 0 keeps the dataset's size
  std::size_t hidden = 1024;
  std::size_t spatial_hidden = 256;
  std::size_t temporal_hidden = 32;
  bool mask_absent_hands = false;
};

struct PoseSection {
  std::size_t hidden = 150;
  std::size_t layers = 3;
  bool dropout_between_layers = true;
};

struct TrainSection {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch = 32;
  double dropout = 0.5;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t eval_batch = 128;
  std::uint64_t seed = 0;
};

/// Defaults reproduce the published architecture and optimizer settings.
struct RunConfig {
  int version = kConfigVersion;
  ModelVariant model = ModelVariant::TwoStream;
  std::size_t window = 20;
  RgbSection rgb;
  PoseSection pose;
  TrainSection train;
  std::string dataset;
  std::string output_dir;

  bool has_rgb() const { return model != ModelVariant::PoseOnly; }
  bool has_pose() const { return model != ModelVariant::RgbOnly; }
};

nlohmann::json to_json(const RunConfig& c);
// Missing keys keep their defaults; unknown keys and version mismatches
// raise ConfigError.
RunConfig from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
void validate(const RunConfig& c);

/// Applies "section.key=value"; the value is parsed as JSON when possible,
/// otherwise taken as a string.
void apply_override(RunConfig& c, const std::string& assignment);

// Sizes that come from the data rather than the config.
struct ModelDims {
  std::size_t classes = 0;
  std::size_t hand_input_dim = 0;
  std::size_t pose_dim = 0;

  std::size_t aug_pose_dim() const { return 3 * pose_dim; }
};

ModelDims dims_from_dataset(const data::Dataset& ds);
nlohmann::json to_json(const ModelDims& d);
ModelDims dims_from_json(const nlohmann::json& j);

model::RgbStreamConfig rgb_stream_config(const RunConfig& c, const ModelDims& d);
model::PoseStreamConfig pose_stream_config(const RunConfig& c, const ModelDims& d);

}  // namespace poseattn::config
