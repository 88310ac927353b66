#include "poseattn/batching.hpp"

#include "poseattn/parallel.hpp"

namespace poseattn::batching {

PreparedDataset::PreparedDataset(const data::Dataset& ds) : ds_(&ds), prepared_(ds.sequences.size()) {
  parallel_for(ds.sequences.size(), default_workers(), [&](std::size_t i) {
    const auto& r = ds.sequences[i];
    try {
      const auto norm = pose::normalize_pose(r.pose);
      prepared_[i] = {pose::pose_matrix(norm), pose::augment_pose(norm), pose::motion_stats(norm)};
    } catch (const pose::PoseError& e) {
      throw data::DataError("record " + std::to_string(r.id) + ": " + e.what());
    }
  });
}

model::RgbBatch rgb_batch(const PreparedDataset& data, std::span<const WindowRef> windows) {
  const std::size_t b = windows.size();
  const std::size_t steps = windows.empty() ? 0 : windows.front().frames.size();
  const std::size_t d = data.dataset().feature_dim, slots = data::kSlots;
  const std::size_t aug = data.aug_pose_dim();
  model::RgbBatch batch;
  batch.hands.reserve(steps);
  batch.present.reserve(steps);
  batch.aug_pose.reserve(steps);
  std::vector<double> motion(b * 2 * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<double> hands(b * slots * d), present(b * slots), pose(b * aug);
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t frame = windows[i].frames[t];
      const auto& rec = data.record(windows[i].sequence);
      const auto& prep = data[windows[i].sequence];
      const float* src = rec.features.data() + frame * slots * d;
      for (std::size_t k = 0; k < slots * d; ++k) hands[i * slots * d + k] = src[k];
      for (std::size_t k = 0; k < slots; ++k) {
        present[i * slots + k] = rec.hand_present[frame * slots + k] ? 1.0 : 0.0;
      }
      const double* row = prep.augmented.row(frame);
      std::copy(row, row + aug, pose.begin() + static_cast<std::ptrdiff_t>(i * aug));
      motion[i * 2 * steps + 2 * t] = prep.motion.at(frame, 0);
      motion[i * 2 * steps + 2 * t + 1] = prep.motion.at(frame, 1);
    }
    batch.hands.emplace_back(Shape{b, slots, d}, std::move(hands));
    batch.present.emplace_back(Shape{b, slots}, std::move(present));
    batch.aug_pose.emplace_back(Shape{b, aug}, std::move(pose));
  }
  batch.motion = Tensor({b, 2 * steps}, std::move(motion));
  return batch;
}

model::PoseBatch pose_batch(const PreparedDataset& data, std::span<const WindowRef> windows) {
  const std::size_t b = windows.size();
  const std::size_t steps = windows.empty() ? 0 : windows.front().frames.size();
  const std::size_t dim = data.pose_dim();
  model::PoseBatch batch;
  batch.poses.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<double> values(b * dim);
    for (std::size_t i = 0; i < b; ++i) {
      const double* row = data[windows[i].sequence].pose.row(windows[i].frames[t]);
      std::copy(row, row + dim, values.begin() + static_cast<std::ptrdiff_t>(i * dim));
    }
    batch.poses.emplace_back(Shape{b, dim}, std::move(values));
  }
  return batch;
}

std::vector<int> batch_labels(const PreparedDataset& data, std::span<const WindowRef> windows) {
  std::vector<int> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(data.record(w.sequence).label());
  return out;
}

}  // namespace poseattn::batching
