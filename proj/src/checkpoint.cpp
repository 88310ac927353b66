#include "poseattn/checkpoint.hpp"

#include <zlib.h>

#include <fstream>
#include <map>
#include <sstream>

#include "poseattn/binary_io.hpp"
#include "poseattn/dataset.hpp"
#include "poseattn/parallel.hpp"

namespace poseattn {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'T', 'T', 'N', 'C', 'K', '\0'};

void write_string(std::ostream& out, const std::string& s) {
  io::write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = io::read_u32(in);
  if (n > (1u << 20)) throw data::DataError("checkpoint: implausible name length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw io::TruncatedInput("checkpoint: truncated name");
  return s;
}

void write_adam(std::ostream& out, const std::string& stream, const nn::AdamState& adam,
                std::span<const NamedTensor> params) {
  write_string(out, stream);
  io::write_u64(out, adam.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_tensor(out, Tensor(params[i].tensor.shape(), adam.m[i]));
    write_tensor(out, Tensor(params[i].tensor.shape(), adam.v[i]));
  }
}

void read_adam(std::istream& in, nn::AdamState& adam, std::span<const NamedTensor> params) {
  adam.step = io::read_u64(in);
  adam.m.resize(params.size());
  adam.v.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (auto* buf : {&adam.m[i], &adam.v[i]}) {
      Tensor t = read_tensor(in);
      if (t.shape() != params[i].tensor.shape()) {
        throw data::DataError("checkpoint: optimizer state shape mismatch for " + params[i].name);
      }
      buf->assign(t.values().begin(), t.values().end());
    }
  }
}

nn::AdamConfig adam_config(const config::RunConfig& c) {
  return {c.train.lr, c.train.beta1, c.train.beta2, c.train.eps};
}

}  // namespace

std::vector<NamedTensor> Models::parameters() const {
  std::vector<NamedTensor> out;
  if (rgb) {
    auto p = rgb->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  if (pose) {
    auto p = pose->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

Models build_models(const config::RunConfig& c, const config::ModelDims& dims) {
  Models m;
  m.config = c;
  m.dims = dims;
  if (c.has_rgb()) {
    Rng rng(derive_seed(c.train.seed, 0x4a8));
    m.rgb.emplace(config::rgb_stream_config(c, dims), rng);
    m.rgb_adam = nn::init_adam(m.rgb->parameters(), adam_config(c));
  }
  if (c.has_pose()) {
    Rng rng(derive_seed(c.train.seed, 0x905e));
    m.pose.emplace(config::pose_stream_config(c, dims), rng);
    m.pose_adam = nn::init_adam(m.pose->parameters(), adam_config(c));
  }
  return m;
}

void save_checkpoint(const std::filesystem::path& dir, const Models& models,
                     const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  const auto params = models.parameters();

  std::ostringstream body(std::ios::binary);
  body.write(kMagic, sizeof(kMagic));
  io::write_u32(body, kCheckpointVersion);
  io::write_u32(body, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    write_string(body, p.name);
    write_tensor(body, p.tensor);
  }
  const std::uint32_t adam_count = (models.rgb_adam ? 1u : 0u) + (models.pose_adam ? 1u : 0u);
  io::write_u32(body, adam_count);
  if (models.rgb_adam) write_adam(body, "rgb", *models.rgb_adam, models.rgb->parameters());
  if (models.pose_adam) write_adam(body, "pose", *models.pose_adam, models.pose->parameters());
  const std::string bytes = body.str();
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));

  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["config"] = config::to_json(models.config);
  manifest["dims"] = config::to_json(models.dims);
  manifest["params_crc32"] = crc;
  auto& shapes = manifest["parameters"] = nlohmann::json::array();
  for (const auto& p : params) shapes.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
  for (const auto& [k, v] : extra.items()) manifest[k] = v;

  // Write to temporaries first so an interrupted save leaves the previous
  // checkpoint intact.
  const auto params_tmp = dir / "params.bin.tmp";
  const auto manifest_tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(params_tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    io::write_u32(out, crc);
    if (!out) throw data::DataError("cannot write " + params_tmp.string());
  }
  {
    std::ofstream out(manifest_tmp, std::ios::trunc);
    out << manifest.dump(2) << "\n";
    if (!out) throw data::DataError("cannot write " + manifest_tmp.string());
  }
  std::filesystem::rename(params_tmp, dir / "params.bin");
  std::filesystem::rename(manifest_tmp, dir / "manifest.json");
}

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw data::DataError("no checkpoint manifest in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data::DataError("checkpoint manifest: " + std::string(e.what()));
  }
  const int version = j.value("format_version", -1);
  if (version != kCheckpointVersion) {
    throw data::VersionError("checkpoint format version " + std::to_string(version) +
                             " is not supported");
  }
  return j;
}

Models load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest = read_checkpoint_manifest(dir);
  Models m = build_models(config::from_json(manifest.at("config")),
                          config::dims_from_json(manifest.at("dims")));

  std::ifstream file(dir / "params.bin", std::ios::binary);
  if (!file) throw data::DataError("no checkpoint parameters in " + dir.string());
  std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMagic) + 4) throw data::DataError("checkpoint parameters truncated");
  const std::string payload = bytes.substr(0, bytes.size() - 4);
  std::istringstream tail(bytes.substr(bytes.size() - 4), std::ios::binary);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
  if (io::read_u32(tail) != crc) throw data::ChecksumError("checkpoint parameters checksum mismatch");

  std::istringstream in(payload, std::ios::binary);
  try {
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (std::string(magic, sizeof(magic)) != std::string(kMagic, sizeof(kMagic))) {
      throw data::DataError("not a checkpoint parameter file");
    }
    if (io::read_u32(in) != kCheckpointVersion) {
      throw data::VersionError("checkpoint parameter version mismatch");
    }
    const auto params = m.parameters();
    std::map<std::string, Tensor> by_name;
    for (const auto& p : params) by_name[p.name] = p.tensor;
    const auto count = io::read_u32(in);
    if (count != params.size()) {
      throw data::DataError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                            std::to_string(params.size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::string name = read_string(in);
      Tensor t = read_tensor(in);
      auto it = by_name.find(name);
      if (it == by_name.end()) throw data::DataError("checkpoint: unexpected parameter " + name);
      if (it->second.shape() != t.shape()) {
        throw data::DataError("checkpoint: shape mismatch for " + name);
      }
      auto dst = it->second.mutable_values();
      std::copy(t.values().begin(), t.values().end(), dst.begin());
    }
    const auto adam_count = io::read_u32(in);
    for (std::uint32_t i = 0; i < adam_count; ++i) {
      const std::string stream = read_string(in);
      if (stream == "rgb" && m.rgb) {
        read_adam(in, *m.rgb_adam, m.rgb->parameters());
      } else if (stream == "pose" && m.pose) {
        read_adam(in, *m.pose_adam, m.pose->parameters());
      } else {
        throw data::DataError("checkpoint: optimizer state for unknown stream " + stream);
      }
    }
  } catch (const io::TruncatedInput& e) {
    throw data::DataError(std::string("checkpoint parameters truncated: ") + e.what());
  }
  return m;
}

std::vector<std::vector<double>> snapshot(std::span<const NamedTensor> params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const auto& p : params) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void restore(std::span<const NamedTensor> params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = params[i].tensor;
    auto dst = t.mutable_values();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace poseattn
