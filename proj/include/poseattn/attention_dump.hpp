#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "poseattn/batching.hpp"
#include "poseattn/checkpoint.hpp"

namespace poseattn {

struct AttentionRecord {
  std::uint32_t sequence_id = 0;
  int label = 0;
  int predicted = 0;
  std::size_t window_start = 0;
  std::vector<std::array<double, 4>> p;  // empty without spatial attention
  std::vector<double> p_prime;           // empty without temporal attention
  std::vector<int> active_slot;          // ground truth per window frame, -1 if none
  std::vector<bool> in_event;            // ground-truth event window per frame
};

/// Attention of the RGB stream on the middle evaluation window of each
/// sequence, with the full-protocol prediction.
std::vector<AttentionRecord> collect_attention(const Models& models,
                                               const batching::PreparedDataset& data,
                                               std::span<const std::size_t> sequences,
                                               std::size_t batch_size = 128);

struct AttentionSummary {
  double active_hand_mass = 0.0;  // mean p on the true slot over labelled frames
  std::size_t active_frames = 0;
  double event_mass = 0.0;        // mean over sequences of sum p' inside the event
  std::size_t event_sequences = 0;
};

AttentionSummary summarize(std::span<const AttentionRecord> records);

nlohmann::json to_json(const AttentionRecord& r);
void write_jsonl(const std::filesystem::path& path, std::span<const AttentionRecord> records);

}  // namespace poseattn
