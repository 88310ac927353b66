#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "poseattn/pose.hpp"

namespace poseattn::data {

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kSlots = pose::kHands;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public DataError {
 public:
  using DataError::DataError;
};

class TruncationError : public DataError {
 public:
  TruncationError(const std::string& what, long record_id)
      : DataError(what), record_id_(record_id) {}
  // -1 when the header itself is truncated.
  long record_id() const { return record_id_; }

 private:
  long record_id_;
};

class ChecksumError : public DataError {
 public:
  using DataError::DataError;
};

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

const char* to_string(Split s);

struct SequenceRecord {
  std::uint32_t id = 0;
  Split split = Split::Train;
  pose::PoseSequence pose;          // carries the class label
  std::vector<float> features;      // frames x 4 x feature_dim
  std::vector<std::uint8_t> hand_present;  // frames x 4
  std::vector<std::int8_t> active_slot;    // frames; -1 when no single hand is active
  std::int32_t event_start = -1;    // ground-truth event window, -1 if none
  std::uint32_t event_length = 0;
  std::uint16_t layout = 0;         // generator layout tag, 0 when unknown

  int label() const { return pose.label; }
  std::size_t length() const { return pose.length(); }
  std::uint32_t subject_count() const {
    return static_cast<std::uint32_t>(pose.subject_present[0]) +
           static_cast<std::uint32_t>(pose.subject_present[1]);
  }
};

struct Dataset {
  std::uint32_t classes = 0;
  std::uint32_t feature_dim = 0;
  std::uint32_t joints = pose::kDefaultJoints;
  std::string task;
  std::vector<SequenceRecord> sequences;

  std::vector<std::size_t> indices(Split split) const;
  // Throws DataError if any record is inconsistent with the header.
  void validate() const;
};

/// Little-endian container: versioned header with a record table and a CRC32,
/// then one CRC32-checked block per sequence (f32 poses and features).
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

nlohmann::json manifest_json(const Dataset& ds);

// git blob hash (SHA-1 over "blob <size>\0" + bytes), lowercase hex.
std::string content_hash(const std::filesystem::path& path);

/// Marks round(fraction * n) of the given pool as validation, stratified by
/// class so per-class counts differ by at most one. Deterministic in seed.
void assign_validation_split(Dataset& ds, double fraction, std::uint64_t seed);

}  // namespace poseattn::data
