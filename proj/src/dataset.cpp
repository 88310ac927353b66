#include "poseattn/dataset.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "poseattn/binary_io.hpp"
#include "poseattn/random.hpp"

namespace poseattn::data {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'T', 'T', 'N', 'D', 'S', '\0'};

std::uint32_t crc_of(const std::string& bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

struct TableEntry {
  std::uint32_t id;
  std::uint32_t label;
  std::uint8_t split;
  std::uint8_t subjects;  // bit 0: subject 1 present, bit 1: subject 2
  std::uint16_t layout;
  std::uint32_t frames;
  std::uint64_t offset;
  std::uint64_t bytes;
  std::uint32_t crc;
};

std::size_t frame_floats(const Dataset& ds) { return 2 * ds.joints * 3; }

std::string encode_block(const Dataset& ds, const SequenceRecord& r) {
  std::ostringstream os(std::ios::binary);
  const std::size_t pose_n = frame_floats(ds);
  for (std::size_t t = 0; t < r.length(); ++t) {
    const auto& f = r.pose.frames[t];
    for (std::size_t i = 0; i < pose_n; ++i) io::write_f32(os, static_cast<float>(f.joints[i]));
    for (const auto& h : f.hands) {
      io::write_f32(os, static_cast<float>(h.u));
      io::write_f32(os, static_cast<float>(h.v));
    }
  }
  for (float v : r.features) io::write_f32(os, v);
  os.write(reinterpret_cast<const char*>(r.hand_present.data()),
           static_cast<std::streamsize>(r.hand_present.size()));
  os.write(reinterpret_cast<const char*>(r.active_slot.data()),
           static_cast<std::streamsize>(r.active_slot.size()));
  io::write_u32(os, static_cast<std::uint32_t>(r.event_start));
  io::write_u32(os, r.event_length);
  return os.str();
}

SequenceRecord decode_block(const Dataset& ds, const TableEntry& e, const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  SequenceRecord r;
  r.id = e.id;
  r.split = static_cast<Split>(e.split);
  r.layout = e.layout;
  r.pose.joints = ds.joints;
  r.pose.label = static_cast<int>(e.label);
  r.pose.subject_present = {(e.subjects & 1u) != 0, (e.subjects & 2u) != 0};
  const std::size_t pose_n = frame_floats(ds);
  r.pose.frames.resize(e.frames);
  for (auto& f : r.pose.frames) {
    f.joints.resize(pose_n);
    for (auto& v : f.joints) v = io::read_f32(is);
    for (auto& h : f.hands) {
      h.u = io::read_f32(is);
      h.v = io::read_f32(is);
    }
  }
  r.features.resize(static_cast<std::size_t>(e.frames) * kSlots * ds.feature_dim);
  for (auto& v : r.features) v = io::read_f32(is);
  r.hand_present.resize(static_cast<std::size_t>(e.frames) * kSlots);
  is.read(reinterpret_cast<char*>(r.hand_present.data()),
          static_cast<std::streamsize>(r.hand_present.size()));
  r.active_slot.resize(e.frames);
  is.read(reinterpret_cast<char*>(r.active_slot.data()),
          static_cast<std::streamsize>(r.active_slot.size()));
  r.event_start = static_cast<std::int32_t>(io::read_u32(is));
  r.event_length = io::read_u32(is);
  if (!is) throw io::TruncatedInput("record block shorter than its frame count implies");
  return r;
}

}  // namespace

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (sequences[i].split == split) out.push_back(i);
  }
  return out;
}

void Dataset::validate() const {
  if (classes < 2) throw DataError("dataset needs at least two classes");
  if (feature_dim == 0) throw DataError("dataset feature dimension is zero");
  std::map<std::uint32_t, int> seen;
  for (const auto& r : sequences) {
    const std::string where = "record " + std::to_string(r.id);
    if (seen[r.id]++) throw DataError("duplicate sequence id " + std::to_string(r.id));
    if (r.label() < 0 || static_cast<std::uint32_t>(r.label()) >= classes) {
      throw DataError(where + ": label out of range");
    }
    if (r.length() == 0) throw DataError(where + ": no frames");
    if (r.pose.joints != joints) throw DataError(where + ": joint count mismatch");
    try {
      pose::validate(r.pose);
    } catch (const pose::PoseError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (r.features.size() != r.length() * kSlots * feature_dim ||
        r.hand_present.size() != r.length() * kSlots || r.active_slot.size() != r.length()) {
      throw DataError(where + ": payload sizes do not match frame count");
    }
  }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  ds.validate();
  std::vector<std::string> blocks;
  blocks.reserve(ds.sequences.size());
  for (const auto& r : ds.sequences) blocks.push_back(encode_block(ds, r));

  const std::uint32_t task_len = static_cast<std::uint32_t>(ds.task.size());
  constexpr std::uint64_t kEntryBytes = 4 + 4 + 1 + 1 + 2 + 4 + 8 + 8 + 4;
  const std::uint64_t header_bytes =
      8 + 4 * 6 + task_len + kEntryBytes * ds.sequences.size() + 4;

  std::ostringstream head(std::ios::binary);
  head.write(kMagic, sizeof(kMagic));
  io::write_u32(head, kFormatVersion);
  io::write_u32(head, ds.classes);
  io::write_u32(head, ds.feature_dim);
  io::write_u32(head, ds.joints);
  io::write_u32(head, static_cast<std::uint32_t>(ds.sequences.size()));
  io::write_u32(head, task_len);
  head.write(ds.task.data(), task_len);
  std::uint64_t offset = header_bytes;
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    const auto& r = ds.sequences[i];
    io::write_u32(head, r.id);
    io::write_u32(head, static_cast<std::uint32_t>(r.label()));
    head.put(static_cast<char>(r.split));
    head.put(static_cast<char>((r.pose.subject_present[0] ? 1 : 0) |
                               (r.pose.subject_present[1] ? 2 : 0)));
    head.put(static_cast<char>(r.layout & 0xff));
    head.put(static_cast<char>(r.layout >> 8));
    io::write_u32(head, static_cast<std::uint32_t>(r.length()));
    io::write_u64(head, offset);
    io::write_u64(head, blocks[i].size());
    io::write_u32(head, crc_of(blocks[i]));
    offset += blocks[i].size();
  }
  std::string header = head.str();
  std::ostringstream crc_bytes(std::ios::binary);
  io::write_u32(crc_bytes, crc_of(header));
  header += crc_bytes.str();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& b : blocks) out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::string header;
  auto take = [&](std::size_t n) {
    std::string bytes(n, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      throw TruncationError("dataset header truncated in " + path.string(), -1);
    }
    header += bytes;
    return bytes;
  };
  auto take_u32 = [&] {
    std::istringstream is(take(4), std::ios::binary);
    return io::read_u32(is);
  };
  auto take_u64 = [&] {
    std::istringstream is(take(8), std::ios::binary);
    return io::read_u64(is);
  };

  if (take(8) != std::string(kMagic, sizeof(kMagic))) {
    throw DataError(path.string() + " is not a poseattn dataset");
  }
  const auto version = take_u32();
  if (version != kFormatVersion) {
    throw VersionError("dataset format version " + std::to_string(version) +
                       " is not supported (expected " + std::to_string(kFormatVersion) + ")");
  }
  Dataset ds;
  ds.classes = take_u32();
  ds.feature_dim = take_u32();
  ds.joints = take_u32();
  const auto count = take_u32();
  const auto task_len = take_u32();
  if (task_len > 4096) throw DataError("implausible task name length");
  ds.task = take(task_len);
  std::vector<TableEntry> table(count);
  for (auto& e : table) {
    e.id = take_u32();
    e.label = take_u32();
    const std::string flags = take(2);
    e.split = static_cast<std::uint8_t>(flags[0]);
    e.subjects = static_cast<std::uint8_t>(flags[1]);
    const std::string layout = take(2);
    e.layout = static_cast<std::uint16_t>(static_cast<std::uint8_t>(layout[0]) |
                                          (static_cast<std::uint8_t>(layout[1]) << 8));
    e.frames = take_u32();
    e.offset = take_u64();
    e.bytes = take_u64();
    e.crc = take_u32();
  }
  const std::uint32_t expected_crc = crc_of(header);
  std::string crc_raw(4, '\0');
  in.read(crc_raw.data(), 4);
  if (in.gcount() != 4) throw TruncationError("dataset header truncated in " + path.string(), -1);
  std::istringstream crc_in(crc_raw, std::ios::binary);
  if (io::read_u32(crc_in) != expected_crc) {
    throw ChecksumError("dataset header checksum mismatch in " + path.string());
  }

  ds.sequences.reserve(count);
  for (const auto& e : table) {
    if (e.split > static_cast<std::uint8_t>(Split::Test)) {
      throw DataError("record " + std::to_string(e.id) + ": unknown split");
    }
    in.seekg(static_cast<std::streamoff>(e.offset));
    std::string block(e.bytes, '\0');
    in.read(block.data(), static_cast<std::streamsize>(e.bytes));
    if (static_cast<std::uint64_t>(in.gcount()) != e.bytes) {
      throw TruncationError("dataset truncated inside record " + std::to_string(e.id),
                            static_cast<long>(e.id));
    }
    if (crc_of(block) != e.crc) {
      throw ChecksumError("checksum mismatch in record " + std::to_string(e.id));
    }
    try {
      ds.sequences.push_back(decode_block(ds, e, block));
    } catch (const io::TruncatedInput&) {
      throw TruncationError("record " + std::to_string(e.id) + " is shorter than declared",
                            static_cast<long>(e.id));
    }
    in.clear();
  }
  ds.validate();
  return ds;
}

nlohmann::json manifest_json(const Dataset& ds) {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["task"] = ds.task;
  j["classes"] = ds.classes;
  j["feature_dim"] = ds.feature_dim;
  j["joints"] = ds.joints;
  std::map<std::string, std::size_t> counts;
  auto& records = j["records"] = nlohmann::json::array();
  for (const auto& r : ds.sequences) {
    counts[to_string(r.split)]++;
    records.push_back({{"id", r.id},
                       {"label", r.label()},
                       {"split", to_string(r.split)},
                       {"subjects", r.subject_count()},
                       {"frames", r.length()},
                       {"event_start", r.event_start},
                       {"event_length", r.event_length},
                       {"layout", r.layout}});
  }
  j["split_counts"] = counts;
  return j;
}

std::string content_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string prefix = "blob " + std::to_string(bytes.size()) + std::string(1, '\0');
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, prefix.data(), prefix.size());
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

void assign_validation_split(Dataset& ds, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  std::size_t pool = 0;
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    auto& r = ds.sequences[i];
    if (r.split == Split::Val) r.split = Split::Train;
    if (r.split != Split::Train) continue;
    by_class[static_cast<std::size_t>(r.label())].push_back(i);
    ++pool;
  }
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool)));
  Rng rng(seed);
  for (auto& members : by_class) rng.shuffle(members);
  std::vector<std::size_t> order(ds.classes);
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  rng.shuffle(order);
  // Larger classes first, ties in seeded order: round-robin then keeps both
  // the validation and the remaining training counts within one per class.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return by_class[a].size() > by_class[b].size();
  });
  std::vector<std::size_t> taken(ds.classes, 0);
  std::size_t assigned = 0;
  while (assigned < target) {
    bool progress = false;
    for (auto c : order) {
      if (assigned == target) break;
      if (taken[c] < by_class[c].size()) {
        ds.sequences[by_class[c][taken[c]++]].split = Split::Val;
        ++assigned;
        progress = true;
      }
    }
    if (!progress) break;
  }
}

}  // namespace poseattn::data
