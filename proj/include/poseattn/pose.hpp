#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "poseattn/random.hpp"

namespace poseattn::pose {

inline constexpr std::size_t kSubjects = 2;
inline constexpr std::size_t kHands = 4;
inline constexpr std::size_t kDefaultJoints = 25;
// NTU RGB+D joint layout (0-based).
inline constexpr std::size_t kSpineMiddle = 1;
inline constexpr std::size_t kLeftHand = 7;
inline constexpr std::size_t kRightHand = 11;

class PoseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct Frame {
  // subjects x joints x (x, y, z), metres.
  std::vector<double> joints;
  // Slots: left1, right1, left2, right2.
  std::array<Pixel, kHands> hands{};
};

struct PoseSequence {
  std::size_t joints = kDefaultJoints;
  std::array<bool, kSubjects> subject_present{true, false};
  int label = 0;
  std::vector<Frame> frames;

  std::size_t length() const { return frames.size(); }
  std::size_t pose_dim() const { return kSubjects * joints * 3; }
};

/// Row-major frames x columns.
struct FrameMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

// Checks frame sizes against the joint count; absent subjects must be zero.
void validate(const PoseSequence& seq);

/// Translates both subjects by subject 1's spine-middle joint so that it sits
/// at the origin in every frame. Absent subjects stay all-zero.
PoseSequence normalize_pose(const PoseSequence& seq, std::size_t spine_joint = kSpineMiddle);

// Flattened joints per frame: T x pose_dim.
FrameMatrix pose_matrix(const PoseSequence& seq);

// [pose, velocity, acceleration] per frame with backward differences:
// v_t = x_t - x_{t-1} (t >= 1), a_t = v_t - v_{t-1} (t >= 2), zero otherwise.
FrameMatrix augment_pose(const PoseSequence& seq);

// m_t = (sum |v_t|, sum |a_t|) over every joint coordinate: T x 2.
FrameMatrix motion_stats(const PoseSequence& seq);

enum class SampleMode { Train, Eval };

inline constexpr std::size_t kEvalWindows = 5;

/// Train: one window with a uniformly random start. Eval: five windows with
/// starts round(k (L - T) / 4). Indices past the end repeat the last frame.
std::vector<std::vector<std::size_t>> sample_subsequences(std::size_t length, std::size_t window,
                                                          SampleMode mode, Rng* rng = nullptr);

struct CropWindow {
  long u0 = 0;
  long v0 = 0;
  long size = 0;
  bool absent = false;
};

/// Square window centred on the hand, shifted (never shrunk) to lie inside
/// the image. A hand at (0, 0) is the absent-subject convention.
CropWindow crop_window(Pixel hand, long crop, long width, long height);

}  // namespace poseattn::pose
