#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "poseattn/dataset.hpp"

namespace poseattn::synth {

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class TaskKind { ActiveHand, TemporalEvent, Combined };

const char* to_string(TaskKind k);
TaskKind parse_task(const std::string& s);

/// Sequence layouts. Spatial: one slot carries the class, its hand moves in
/// every frame, the other slots carry other classes. Temporal: every slot
/// carries the class inside a short window in which one hand moves; the
/// other classes fill equally long blocks elsewhere. SpatioTemporal: the
/// spatial layout restricted to the window, with blocks of all classes
/// elsewhere. HiddenMarker: static pose; the class slot also carries a
/// slot-specific marker visible in the feature sum.
enum class SequenceKind : std::uint16_t {
  Spatial = 1,
  Temporal = 2,
  SpatioTemporal = 3,
  HiddenMarker = 4,
};

const char* to_string(SequenceKind k);

struct Mixture {
  double spatio_temporal = 0.25;
  double spatial = 0.30;
  double temporal = 0.25;
  double hidden_marker = 0.20;
};

struct SyntheticSpec {
  TaskKind task = TaskKind::ActiveHand;
  std::uint32_t classes = 4;
  std::uint32_t window = 20;
  std::uint32_t length = 0;  // frames per sequence; 0 means `window`
  std::uint32_t feature_dim = 16;
  double noise = 0.1;                // feature noise std per component
  double distractor_strength = 1.0;  // relative to the class template
  bool distractors = true;           // false: every slot carries the class
  // Non-active slots carrying another class (1..3); the rest hold noise only.
  std::uint32_t distractor_slots = 2;
  // Blocks of other classes around a temporal event window.
  std::uint32_t distractor_blocks = 2;
  // Accepted Sum-baseline Bayes rate above chance (1/classes).
  double sum_margin = 0.1;
  double marker_strength = 0.75;
  double jitter = 0.002;      // joint noise std in metres
  double hand_motion = 0.3;    // circle radius / step size of a moving hand
  double pose_cue = 0.0;      // class-dependent head offset (metres)
  double pose_cue_noise = 0.0;
  std::uint32_t event_length = 4;
  bool pin_event_end = false;
  Mixture mixture;
  std::uint32_t train_count = 2500;  // pool later split into train / val
  std::uint32_t test_count = 500;
  double val_fraction = 0.05;
  // View-analog shift: yaw magnitudes (degrees, random sign) per split, and
  // disjoint distractor orderings (even permutations for train, odd for test).
  bool view_shift = false;
  std::array<double, 2> train_yaw_deg{10.0, 20.0};
  std::array<double, 2> test_yaw_deg{0.0, 5.0};
  std::uint64_t seed = 0;

  std::uint32_t frames() const { return length == 0 ? window : length; }
};

// Task defaults: the temporal task has no joint jitter so that motion is
// exactly zero outside the event; the combined task adds a pose class cue.
SyntheticSpec default_spec(TaskKind task);

// Throws SpecError.
void validate(const SyntheticSpec& spec);

nlohmann::json to_json(const SyntheticSpec& spec);
// Missing keys take the task's defaults; unknown keys are an error.
SyntheticSpec spec_from_json(const nlohmann::json& j);

/// Bayes accuracy of a classifier that sees only the sum of the four slot
/// templates, by enumerating every (class, active slot, distractor ordering)
/// the spatial layout can produce. Noise-free. With two distractor slots the
/// sum names three classes, one of them the label, so the rate is 1/3.
double sum_baseline_bayes_rate(std::uint32_t classes, std::uint32_t distractor_slots = 2,
                               double distractor_strength = 1.0);

struct Generated {
  data::Dataset dataset;
  std::uint32_t attempts = 1;  // regenerations needed to pass the ambiguity check
};

/// Pure function of the spec. Sequences carrying the spatial layout are
/// checked for Sum-baseline ambiguity before the dataset is returned; a
/// failing draw is regenerated with a salted seed.
Generated generate(const SyntheticSpec& spec);

}  // namespace poseattn::synth
