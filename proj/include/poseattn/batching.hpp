#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "poseattn/dataset.hpp"
#include "poseattn/model.hpp"
#include "poseattn/pose.hpp"

namespace poseattn::batching {

// Pose-derived inputs of one sequence, computed once per dataset.
struct PreparedSequence {
  pose::FrameMatrix pose;       // normalized, frames x pose_dim
  pose::FrameMatrix augmented;  // frames x 3 pose_dim
  pose::FrameMatrix motion;     // frames x 2
};

class PreparedDataset {
 public:
  // Throws data::DataError when a pose cannot be normalized.
  explicit PreparedDataset(const data::Dataset& ds);

  const data::Dataset& dataset() const { return *ds_; }
  const data::SequenceRecord& record(std::size_t i) const { return ds_->sequences[i]; }
  const PreparedSequence& operator[](std::size_t i) const { return prepared_[i]; }
  std::size_t size() const { return prepared_.size(); }
  std::size_t pose_dim() const { return 2 * ds_->joints * 3; }
  std::size_t aug_pose_dim() const { return 3 * pose_dim(); }

 private:
  const data::Dataset* ds_;
  std::vector<PreparedSequence> prepared_;
};

// One model input: a sequence and the frame indices of its window.
struct WindowRef {
  std::size_t sequence = 0;
  std::vector<std::size_t> frames;
};

model::RgbBatch rgb_batch(const PreparedDataset& data, std::span<const WindowRef> windows);
model::PoseBatch pose_batch(const PreparedDataset& data, std::span<const WindowRef> windows);
std::vector<int> batch_labels(const PreparedDataset& data, std::span<const WindowRef> windows);

}  // namespace poseattn::batching
