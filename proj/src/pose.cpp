#include "poseattn/pose.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace poseattn::pose {

void validate(const PoseSequence& seq) {
  const std::size_t dim = seq.pose_dim();
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    if (seq.frames[t].joints.size() != dim) {
      throw PoseError("frame " + std::to_string(t) + " has " +
                      std::to_string(seq.frames[t].joints.size()) + " coordinates, expected " +
                      std::to_string(dim));
    }
    for (std::size_t s = 0; s < kSubjects; ++s) {
      if (seq.subject_present[s]) continue;
      const auto* begin = seq.frames[t].joints.data() + s * seq.joints * 3;
      if (std::any_of(begin, begin + seq.joints * 3, [](double v) { return v != 0.0; })) {
        throw PoseError("frame " + std::to_string(t) + ": absent subject " +
                        std::to_string(s + 1) + " has nonzero joints");
      }
    }
  }
}

PoseSequence normalize_pose(const PoseSequence& seq, std::size_t spine_joint) {
  validate(seq);
  if (!seq.subject_present[0]) throw PoseError("normalize_pose: subject 1 is missing");
  if (spine_joint >= seq.joints) throw PoseError("normalize_pose: spine joint out of range");
  PoseSequence out = seq;
  const std::size_t per_subject = seq.joints * 3;
  for (auto& frame : out.frames) {
    const double origin[3] = {frame.joints[spine_joint * 3], frame.joints[spine_joint * 3 + 1],
                              frame.joints[spine_joint * 3 + 2]};
    for (std::size_t s = 0; s < kSubjects; ++s) {
      if (!out.subject_present[s]) continue;
      for (std::size_t j = 0; j < seq.joints; ++j) {
        for (std::size_t c = 0; c < 3; ++c) frame.joints[s * per_subject + j * 3 + c] -= origin[c];
      }
    }
  }
  return out;
}

FrameMatrix pose_matrix(const PoseSequence& seq) {
  validate(seq);
  FrameMatrix m{seq.length(), seq.pose_dim(), {}};
  m.data.reserve(m.rows * m.cols);
  for (const auto& f : seq.frames) m.data.insert(m.data.end(), f.joints.begin(), f.joints.end());
  return m;
}

namespace {

// velocity and acceleration, each T x dim
std::pair<FrameMatrix, FrameMatrix> differences(const FrameMatrix& x) {
  FrameMatrix vel{x.rows, x.cols, std::vector<double>(x.rows * x.cols, 0.0)};
  FrameMatrix acc = vel;
  for (std::size_t t = 1; t < x.rows; ++t) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      vel.data[t * x.cols + c] = x.at(t, c) - x.at(t - 1, c);
    }
  }
  for (std::size_t t = 2; t < x.rows; ++t) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      acc.data[t * x.cols + c] = vel.at(t, c) - vel.at(t - 1, c);
    }
  }
  return {std::move(vel), std::move(acc)};
}

}  // namespace

FrameMatrix augment_pose(const PoseSequence& seq) {
  if (seq.length() < 1) throw PoseError("augment_pose: empty sequence");
  const FrameMatrix x = pose_matrix(seq);
  const auto [vel, acc] = differences(x);
  FrameMatrix out{x.rows, 3 * x.cols, {}};
  out.data.reserve(out.rows * out.cols);
  for (std::size_t t = 0; t < x.rows; ++t) {
    out.data.insert(out.data.end(), x.row(t), x.row(t) + x.cols);
    out.data.insert(out.data.end(), vel.row(t), vel.row(t) + x.cols);
    out.data.insert(out.data.end(), acc.row(t), acc.row(t) + x.cols);
  }
  return out;
}

FrameMatrix motion_stats(const PoseSequence& seq) {
  if (seq.length() < 1) throw PoseError("motion_stats: empty sequence");
  const FrameMatrix x = pose_matrix(seq);
  const auto [vel, acc] = differences(x);
  FrameMatrix out{x.rows, 2, std::vector<double>(x.rows * 2, 0.0)};
  for (std::size_t t = 0; t < x.rows; ++t) {
    double sv = 0.0, sa = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) {
      sv += std::fabs(vel.at(t, c));
      sa += std::fabs(acc.at(t, c));
    }
    out.data[t * 2] = sv;
    out.data[t * 2 + 1] = sa;
  }
  return out;
}

std::vector<std::vector<std::size_t>> sample_subsequences(std::size_t length, std::size_t window,
                                                          SampleMode mode, Rng* rng) {
  if (window == 0) throw PoseError("sample_subsequences: window length must be positive");
  if (length == 0) throw PoseError("sample_subsequences: empty sequence");
  const std::size_t span = length > window ? length - window : 0;
  std::vector<std::size_t> starts;
  if (mode == SampleMode::Train) {
    if (!rng) throw std::logic_error("sample_subsequences: train mode needs an rng");
    starts.push_back(rng->index(span + 1));
  } else {
    for (std::size_t k = 0; k < kEvalWindows; ++k) {
      const double pos = static_cast<double>(k) * static_cast<double>(span) /
                         static_cast<double>(kEvalWindows - 1);
      starts.push_back(static_cast<std::size_t>(std::llround(pos)));
    }
  }
  std::vector<std::vector<std::size_t>> windows;
  for (auto s : starts) {
    std::vector<std::size_t> idx(window);
    for (std::size_t i = 0; i < window; ++i) idx[i] = std::min(s + i, length - 1);
    windows.push_back(std::move(idx));
  }
  return windows;
}

CropWindow crop_window(Pixel hand, long crop, long width, long height) {
  if (crop <= 0) throw PoseError("crop_window: crop size must be positive");
  if (crop > std::min(width, height)) {
    throw PoseError("crop_window: crop " + std::to_string(crop) + " exceeds image " +
                    std::to_string(width) + "x" + std::to_string(height));
  }
  CropWindow w;
  w.size = crop;
  w.absent = hand.u == 0.0 && hand.v == 0.0;
  const long half = crop / 2;
  w.u0 = std::clamp(std::lround(hand.u) - half, 0L, width - crop);
  w.v0 = std::clamp(std::lround(hand.v) - half, 0L, height - crop);
  return w;
}

}  // namespace poseattn::pose
