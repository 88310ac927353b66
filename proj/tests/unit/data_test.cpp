#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "poseattn/dataset.hpp"
#include "poseattn/pose.hpp"
#include "poseattn/synth.hpp"

using namespace poseattn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("poseattn_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

synth::SyntheticSpec small_spec(synth::TaskKind task, std::uint64_t seed = 0) {
  auto s = synth::default_spec(task);
  s.train_count = 120;
  s.test_count = 40;
  s.seed = seed;
  return s;
}

bool same_records(const data::SequenceRecord& a, const data::SequenceRecord& b) {
  if (a.id != b.id || a.split != b.split || a.label() != b.label() || a.layout != b.layout ||
      a.pose.subject_present != b.pose.subject_present || a.length() != b.length() ||
      a.features != b.features || a.hand_present != b.hand_present ||
      a.active_slot != b.active_slot || a.event_start != b.event_start ||
      a.event_length != b.event_length) {
    return false;
  }
  for (std::size_t t = 0; t < a.length(); ++t) {
    const auto& fa = a.pose.frames[t];
    const auto& fb = b.pose.frames[t];
    for (std::size_t i = 0; i < fa.joints.size(); ++i) {
      if (static_cast<float>(fa.joints[i]) != static_cast<float>(fb.joints[i])) return false;
    }
    for (std::size_t h = 0; h < 4; ++h) {
      if (static_cast<float>(fa.hands[h].u) != static_cast<float>(fb.hands[h].u)) return false;
    }
  }
  return true;
}

// Offset of the first record block: the byte after the header CRC.
std::uintmax_t first_block_offset(const data::Dataset& ds) {
  return 8 + 4 * 6 + ds.task.size() + 36 * ds.sequences.size() + 4;
}

}  // namespace

TEST_CASE("save then load round-trips") {
  auto dir = temp_dir("roundtrip");
  auto ds = synth::generate(small_spec(synth::TaskKind::Combined)).dataset;
  data::save_dataset(ds, dir / "a.bin");
  auto back = data::load_dataset(dir / "a.bin");
  CHECK(back.classes == ds.classes);
  CHECK(back.feature_dim == ds.feature_dim);
  CHECK(back.task == ds.task);
  CHECK(data::manifest_json(back) == data::manifest_json(ds));
  REQUIRE(back.sequences.size() == ds.sequences.size());
  for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
    CHECK(same_records(ds.sequences[i], back.sequences[i]));
  }
  // Re-saving the loaded dataset reproduces the file byte for byte.
  data::save_dataset(back, dir / "b.bin");
  CHECK(data::content_hash(dir / "a.bin") == data::content_hash(dir / "b.bin"));
}

TEST_CASE("truncation names the failing record") {
  auto dir = temp_dir("truncate");
  auto ds = synth::generate(small_spec(synth::TaskKind::ActiveHand)).dataset;
  data::save_dataset(ds, dir / "full.bin");
  const auto size = fs::file_size(dir / "full.bin");
  const auto block = (size - first_block_offset(ds)) / ds.sequences.size();

  // Cut inside the seventh record block.
  fs::copy_file(dir / "full.bin", dir / "cut.bin");
  fs::resize_file(dir / "cut.bin", first_block_offset(ds) + 6 * block + block / 2);
  try {
    data::load_dataset(dir / "cut.bin");
    FAIL("expected a truncation error");
  } catch (const data::TruncationError& e) {
    CHECK(e.record_id() == static_cast<long>(ds.sequences[6].id));
    CHECK(std::string(e.what()).find(std::to_string(ds.sequences[6].id)) != std::string::npos);
  }

  fs::copy_file(dir / "full.bin", dir / "head.bin");
  fs::resize_file(dir / "head.bin", 20);
  try {
    data::load_dataset(dir / "head.bin");
    FAIL("expected a truncation error");
  } catch (const data::TruncationError& e) {
    CHECK(e.record_id() == -1);
  }
}

TEST_CASE("version and checksum failures are distinct errors") {
  auto dir = temp_dir("corrupt");
  auto ds = synth::generate(small_spec(synth::TaskKind::ActiveHand)).dataset;
  data::save_dataset(ds, dir / "full.bin");
  auto patch = [&](const std::string& name, std::uintmax_t offset, char value) {
    fs::copy_file(dir / "full.bin", dir / name, fs::copy_options::overwrite_existing);
    std::fstream f(dir / name, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(offset));
    f.put(value);
    return dir / name;
  };
  CHECK_THROWS_AS(data::load_dataset(patch("version.bin", 8, 9)), data::VersionError);
  CHECK_THROWS_AS(data::load_dataset(patch("header.bin", 12, 7)), data::ChecksumError);
  CHECK_THROWS_AS(data::load_dataset(patch("payload.bin", first_block_offset(ds) + 5, 0x55)),
                  data::ChecksumError);
  CHECK_THROWS_AS(data::load_dataset(dir / "missing.bin"), data::DataError);
}

TEST_CASE("validation split is 5% of the pool, reproducible and class balanced") {
  auto ds = synth::generate(small_spec(synth::TaskKind::ActiveHand)).dataset;
  auto a = ds, b = ds, c = ds;
  data::assign_validation_split(a, 0.05, 17);
  data::assign_validation_split(b, 0.05, 17);
  data::assign_validation_split(c, 0.05, 18);
  const auto val = a.indices(data::Split::Val);
  CHECK(val == b.indices(data::Split::Val));
  CHECK(val != c.indices(data::Split::Val));
  CHECK(val.size() == 6);  // round(0.05 * 120)
  std::map<int, int> per_class;
  for (auto i : val) per_class[a.sequences[i].label()]++;
  int lo = 1 << 20, hi = 0;
  for (int k = 0; k < 4; ++k) {
    lo = std::min(lo, per_class[k]);
    hi = std::max(hi, per_class[k]);
  }
  CHECK(hi - lo <= 1);
  // Test records are never moved.
  for (std::size_t i = 0; i < a.sequences.size(); ++i) {
    CHECK((a.sequences[i].split == data::Split::Test) == (ds.sequences[i].split == data::Split::Test));
  }
}

TEST_CASE("class priors are uniform within one sample in every split") {
  auto s = small_spec(synth::TaskKind::Combined);
  s.train_count = 203;
  s.test_count = 57;
  auto ds = synth::generate(s).dataset;
  for (auto split : {data::Split::Train, data::Split::Val, data::Split::Test}) {
    std::map<int, int> counts;
    for (auto i : ds.indices(split)) counts[ds.sequences[i].label()]++;
    int lo = 1 << 20, hi = 0;
    for (int k = 0; k < 4; ++k) {
      lo = std::min(lo, counts[k]);
      hi = std::max(hi, counts[k]);
    }
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("ids are unique and duplicates are rejected") {
  auto ds = synth::generate(small_spec(synth::TaskKind::ActiveHand)).dataset;
  std::set<std::uint32_t> ids;
  for (const auto& r : ds.sequences) ids.insert(r.id);
  CHECK(ids.size() == ds.sequences.size());
  ds.sequences[3].id = ds.sequences[2].id;
  CHECK_THROWS_AS(ds.validate(), data::DataError);
}

TEST_CASE("content hash is the git blob hash") {
  auto dir = temp_dir("hash");
  std::ofstream(dir / "hello.txt") << "hello\n";
  // git hash-object of "hello\n"
  CHECK(data::content_hash(dir / "hello.txt") == "ce013625030ba8dba906f756967f9e9ca394464a");
}
