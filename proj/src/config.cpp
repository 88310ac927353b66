#include "poseattn/config.hpp"

#include <fstream>

namespace poseattn::config {

using nlohmann::json;

const char* to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::PoseOnly: return "pose";
    case ModelVariant::RgbOnly: return "rgb";
    case ModelVariant::TwoStream: return "two-stream";
  }
  return "?";
}

ModelVariant parse_variant(const std::string& s) {
  for (auto v : {ModelVariant::PoseOnly, ModelVariant::RgbOnly, ModelVariant::TwoStream}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("unknown model variant '" + s + "' (expected pose, rgb or two-stream)");
}

json to_json(const RunConfig& c) {
  return {
      {"version", c.version},
      {"model", to_string(c.model)},
      {"window", c.window},
      {"rgb",
       {{"conditioning", model::to_string(c.rgb.conditioning)},
        {"pooling", model::to_string(c.rgb.pooling)},
        {"encoder", model::to_string(c.rgb.encoder)},
        {"feature_dim", c.rgb.feature_dim},
        {"hidden", c.rgb.hidden},
        {"spatial_hidden", c.rgb.spatial_hidden},
        {"temporal_hidden", c.rgb.temporal_hidden},
        {"mask_absent_hands", c.rgb.mask_absent_hands}}},
      {"pose",
       {{"hidden", c.pose.hidden},
        {"layers", c.pose.layers},
        {"dropout_between_layers", c.pose.dropout_between_layers}}},
      {"train",
       {{"lr", c.train.lr},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"eps", c.train.eps},
        {"batch", c.train.batch},
        {"dropout", c.train.dropout},
        {"max_epochs", c.train.max_epochs},
        {"patience", c.train.patience},
        {"eval_batch", c.train.eval_batch},
        {"seed", c.train.seed}}},
      {"dataset", c.dataset},
      {"output_dir", c.output_dir},
  };
}

namespace {

void check_keys(const json& given, const json& reference, const std::string& where) {
  if (!given.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!reference.contains(key)) throw ConfigError("config: unknown key '" + path + "'");
    if (reference[key].is_object()) check_keys(value, reference[key], path);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig from_json(const json& j) {
  RunConfig c;
  check_keys(j, to_json(c), "");
  const int version = j.value("version", kConfigVersion);
  if (version != kConfigVersion) {
    throw ConfigError("config version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  try {
    if (j.contains("model")) c.model = parse_variant(j["model"].get<std::string>());
    read(j, "window", c.window);
    read(j, "dataset", c.dataset);
    read(j, "output_dir", c.output_dir);
    if (j.contains("rgb")) {
      const auto& r = j["rgb"];
      if (r.contains("conditioning")) {
        c.rgb.conditioning = model::parse_conditioning(r["conditioning"].get<std::string>());
      }
      if (r.contains("pooling")) c.rgb.pooling = model::parse_pooling(r["pooling"].get<std::string>());
      if (r.contains("encoder")) c.rgb.encoder = model::parse_encoder(r["encoder"].get<std::string>());
      read(r, "feature_dim", c.rgb.feature_dim);
      read(r, "hidden", c.rgb.hidden);
      read(r, "spatial_hidden", c.rgb.spatial_hidden);
      read(r, "temporal_hidden", c.rgb.temporal_hidden);
      read(r, "mask_absent_hands", c.rgb.mask_absent_hands);
    }
    if (j.contains("pose")) {
      const auto& p = j["pose"];
      read(p, "hidden", c.pose.hidden);
      read(p, "layers", c.pose.layers);
      read(p, "dropout_between_layers", c.pose.dropout_between_layers);
    }
    if (j.contains("train")) {
      const auto& t = j["train"];
      read(t, "lr", c.train.lr);
      read(t, "beta1", c.train.beta1);
      read(t, "beta2", c.train.beta2);
      read(t, "eps", c.train.eps);
      read(t, "batch", c.train.batch);
      read(t, "dropout", c.train.dropout);
      read(t, "max_epochs", c.train.max_epochs);
      read(t, "patience", c.train.patience);
      read(t, "eval_batch", c.train.eval_batch);
      read(t, "seed", c.train.seed);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (c.window == 0) fail("window must be positive");
  if (c.rgb.hidden == 0 || c.pose.hidden == 0 || c.pose.layers == 0) fail("hidden sizes must be positive");
  if (c.rgb.spatial_hidden == 0 || c.rgb.temporal_hidden == 0) fail("attention sizes must be positive");
  if (!(c.train.lr >= 0.0)) fail("train.lr must be non-negative");
  if (c.train.beta1 < 0.0 || c.train.beta1 >= 1.0 || c.train.beta2 < 0.0 || c.train.beta2 >= 1.0) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(c.train.eps > 0.0)) fail("train.eps must be positive");
  if (c.train.batch == 0 || c.train.eval_batch == 0) fail("batch sizes must be positive");
  if (c.train.dropout < 0.0 || c.train.dropout >= 1.0) fail("train.dropout must lie in [0, 1)");
  if (c.train.patience == 0) fail("train.patience must be positive");
}

void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  json j = to_json(c);
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) {
      throw ConfigError("override: unknown key '" + path + "'");
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw ConfigError("override: '" + path + "' is a section, not a value");
  // Numeric fields accept either integer or float literals from the command line.
  if (node->is_number_unsigned() && value.is_number_integer() && value.get<long long>() < 0) {
    throw ConfigError("override: '" + path + "' must be non-negative");
  }
  if (node->is_string() && !value.is_string()) value = text;
  *node = value;
  c = from_json(j);
}

ModelDims dims_from_dataset(const data::Dataset& ds) {
  return {ds.classes, ds.feature_dim, 2 * ds.joints * 3};
}

json to_json(const ModelDims& d) {
  return {{"classes", d.classes}, {"hand_input_dim", d.hand_input_dim}, {"pose_dim", d.pose_dim}};
}

ModelDims dims_from_json(const json& j) {
  ModelDims d;
  d.classes = j.at("classes").get<std::size_t>();
  d.hand_input_dim = j.at("hand_input_dim").get<std::size_t>();
  d.pose_dim = j.at("pose_dim").get<std::size_t>();
  return d;
}

model::RgbStreamConfig rgb_stream_config(const RunConfig& c, const ModelDims& d) {
  model::RgbStreamConfig r;
  r.window = c.window;
  r.hand_input_dim = d.hand_input_dim;
  r.feature_dim = c.rgb.encoder == model::EncoderKind::Patch && c.rgb.feature_dim != 0
                      ? c.rgb.feature_dim
                      : d.hand_input_dim;
  if (c.rgb.encoder == model::EncoderKind::Precomputed && c.rgb.feature_dim != 0 &&
      c.rgb.feature_dim != d.hand_input_dim) {
    throw ConfigError("config: rgb.feature_dim " + std::to_string(c.rgb.feature_dim) +
                      " does not match the dataset's feature size " +
                      std::to_string(d.hand_input_dim) + " (precomputed encoder)");
  }
  r.aug_pose_dim = d.aug_pose_dim();
  r.hidden = c.rgb.hidden;
  r.spatial_hidden = c.rgb.spatial_hidden;
  r.temporal_hidden = c.rgb.temporal_hidden;
  r.classes = d.classes;
  r.conditioning = c.rgb.conditioning;
  r.pooling = c.rgb.pooling;
  r.encoder = c.rgb.encoder;
  r.mask_absent_hands = c.rgb.mask_absent_hands;
  r.dropout = c.train.dropout;
  return r;
}

model::PoseStreamConfig pose_stream_config(const RunConfig& c, const ModelDims& d) {
  model::PoseStreamConfig p;
  p.pose_dim = d.pose_dim;
  p.hidden = c.pose.hidden;
  p.layers = c.pose.layers;
  p.classes = d.classes;
  p.dropout = c.train.dropout;
  p.dropout_between_layers = c.pose.dropout_between_layers;
  return p;
}

}  // namespace poseattn::config
