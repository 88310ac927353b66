#include "poseattn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "poseattn/parallel.hpp"
#include "poseattn/random.hpp"

namespace poseattn::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::size_t kJoints = pose::kDefaultJoints;
constexpr std::size_t kSlots = data::kSlots;
constexpr int kNone = -1;
constexpr std::uint32_t kMaxAttempts = 8;

// Body-centred rest pose of one subject in the NTU joint layout, metres.
constexpr std::array<std::array<double, 3>, kJoints> kRest = {{
    {0.00, 0.00, 0.00},    // 0 spine base
    {0.00, 0.30, 0.00},    // 1 spine middle
    {0.00, 0.58, 0.00},    // 2 neck
    {0.00, 0.72, 0.00},    // 3 head
    {-0.18, 0.50, 0.00},   // 4 left shoulder
    {-0.26, 0.26, -0.05},  // 5 left elbow
    {-0.24, 0.06, -0.15},  // 6 left wrist
    {-0.23, 0.00, -0.18},  // 7 left hand
    {0.18, 0.50, 0.00},    // 8 right shoulder
    {0.26, 0.26, -0.05},   // 9 right elbow
    {0.24, 0.06, -0.15},   // 10 right wrist
    {0.23, 0.00, -0.18},   // 11 right hand
    {-0.10, -0.05, 0.00},  // 12 left hip
    {-0.11, -0.45, 0.00},  // 13 left knee
    {-0.11, -0.85, 0.02},  // 14 left ankle
    {-0.11, -0.90, -0.08}, // 15 left foot
    {0.10, -0.05, 0.00},   // 16 right hip
    {0.11, -0.45, 0.00},   // 17 right knee
    {0.11, -0.85, 0.02},   // 18 right ankle
    {0.11, -0.90, -0.08},  // 19 right foot
    {0.00, 0.50, 0.00},    // 20 spine shoulder
    {-0.23, -0.06, -0.20}, // 21 left hand tip
    {-0.19, 0.01, -0.20},  // 22 left thumb
    {0.23, -0.06, -0.20},  // 23 right hand tip
    {0.19, 0.01, -0.20},   // 24 right thumb
}};

// Joints moved together with each hand slot: wrist, hand, tip, thumb.
constexpr std::array<std::array<std::size_t, 4>, 2> kHandGroup = {{{6, 7, 21, 22}, {10, 11, 23, 24}}};
constexpr std::array<std::size_t, 2> kCueJoints = {2, 3};
constexpr double kSceneDepth = 3.0;
constexpr double kSubjectSpacing = 0.5;
constexpr double kCirclePeriod = 8.0;

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

struct Templates {
  std::vector<std::vector<double>> classes;
  std::vector<std::vector<double>> markers;
};

// Orthonormal directions scaled to norm sqrt(D), so components are O(1).
std::vector<std::vector<double>> orthonormal_rows(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> rows;
  while (rows.size() < count) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    for (const auto& r : rows) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += v[i] * r[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * r[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& x : v) x /= norm;
    rows.push_back(std::move(v));
  }
  const double scale = std::sqrt(static_cast<double>(dim));
  for (auto& r : rows) {
    for (auto& x : r) x *= scale;
  }
  return rows;
}

bool needs_markers(const SyntheticSpec& s) {
  return s.task == TaskKind::Combined && s.mixture.hidden_marker > 0.0;
}

Templates make_templates(const SyntheticSpec& s) {
  Rng rng(derive_seed(s.seed, 0x7e3d));
  const std::size_t extra = needs_markers(s) ? kSlots : 0;
  auto rows = orthonormal_rows(s.classes + extra, s.feature_dim, rng);
  Templates t;
  t.classes.assign(rows.begin(), rows.begin() + s.classes);
  t.markers.assign(rows.begin() + s.classes, rows.end());
  return t;
}

bool is_even_permutation(const std::array<int, 3>& v) {
  // Empty slots sort after every class.
  auto rank = [](int x) { return x == kNone ? std::numeric_limits<int>::max() : x; };
  int inversions = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) inversions += rank(v[i]) > rank(v[j]);
  }
  return inversions % 2 == 0;
}

enum class Parity { Any, Even, Odd };

// `count` distinct classes other than `label` plus empty slots, in slot order.
std::array<int, 3> distractor_order(int label, std::uint32_t classes, std::uint32_t count,
                                    Parity parity, Rng& rng) {
  std::vector<int> others;
  for (int c = 0; c < static_cast<int>(classes); ++c) {
    if (c != label) others.push_back(c);
  }
  rng.shuffle(others);
  std::array<int, 3> d = {kNone, kNone, kNone};
  for (std::uint32_t k = 0; k < count; ++k) d[k] = others[k];
  rng.shuffle(d);
  if (parity != Parity::Any && is_even_permutation(d) != (parity == Parity::Even)) {
    // An adjacent swap of two different entries flips the parity.
    const std::size_t k = d[0] != d[1] ? 0 : 1;
    std::swap(d[k], d[k + 1]);
  }
  return d;
}

struct Layout {
  SequenceKind kind = SequenceKind::Spatial;
  std::vector<std::array<int, kSlots>> slot_class;
  std::vector<std::array<double, kSlots>> slot_strength;
  std::vector<std::int8_t> active;
  int event_start = -1;
  std::uint32_t event_length = 0;
  int moving_slot = kNone;
  bool circle = false;  // moving hand circles in every frame
  int marker_slot = kNone;
};

void fill_spatial_frame(Layout& l, std::size_t t, int label, int slot,
                        const std::array<int, 3>& distractors, const SyntheticSpec& s) {
  std::size_t d = 0;
  for (std::size_t j = 0; j < kSlots; ++j) {
    if (static_cast<int>(j) == slot || !s.distractors) {
      l.slot_class[t][j] = label;
      l.slot_strength[t][j] = 1.0;
    } else {
      l.slot_class[t][j] = distractors[d++];
      l.slot_strength[t][j] = l.slot_class[t][j] == kNone ? 0.0 : s.distractor_strength;
    }
  }
}

// Token order for block layouts: -2 is the event window, -1 a noise-only
// frame, c >= 0 a block of class c in every slot. Blocks cover every class,
// or `distractor_blocks` classes other than the label.
std::vector<int> block_tokens(const SyntheticSpec& s, int label, bool all_classes, Rng& rng) {
  const std::uint32_t w = s.event_length;
  std::vector<int> blocks;
  for (int c = 0; c < static_cast<int>(s.classes); ++c) {
    if (all_classes || c != label) blocks.push_back(c);
  }
  if (!all_classes) {
    rng.shuffle(blocks);
    blocks.resize(s.distractor_blocks);
  }
  const std::size_t used = (blocks.size() + 1) * w;
  std::vector<int> tokens = blocks;
  tokens.insert(tokens.end(), s.frames() - used, -1);
  for (;;) {
    std::vector<int> order = tokens;
    if (!s.pin_event_end) order.push_back(-2);
    rng.shuffle(order);
    if (s.pin_event_end) order.push_back(-2);
    if (order.front() != -2) return order;  // the window may not start at frame 0
  }
}

Layout make_layout(SequenceKind kind, int label, Parity parity, const SyntheticSpec& s,
                   Rng& rng) {
  const std::size_t frames = s.frames();
  Layout l;
  l.kind = kind;
  l.slot_class.assign(frames, {kNone, kNone, kNone, kNone});
  l.slot_strength.assign(frames, {0.0, 0.0, 0.0, 0.0});
  l.active.assign(frames, -1);

  if (kind == SequenceKind::Spatial || kind == SequenceKind::HiddenMarker) {
    const int slot = static_cast<int>(rng.index(kSlots));
    const auto distractors = distractor_order(label, s.classes, s.distractor_slots, parity, rng);
    for (std::size_t t = 0; t < frames; ++t) {
      fill_spatial_frame(l, t, label, slot, distractors, s);
      l.active[t] = static_cast<std::int8_t>(slot);
    }
    if (kind == SequenceKind::Spatial) {
      l.moving_slot = slot;
      l.circle = true;
    } else {
      l.marker_slot = slot;
    }
    return l;
  }

  const bool spatial_window = kind == SequenceKind::SpatioTemporal;
  const auto tokens = block_tokens(s, label, spatial_window, rng);
  const int slot = static_cast<int>(rng.index(kSlots));
  const auto distractors = distractor_order(label, s.classes, s.distractor_slots, parity, rng);
  std::size_t t = 0;
  for (int token : tokens) {
    const std::size_t span = token == -1 ? 1 : s.event_length;
    for (std::size_t k = 0; k < span; ++k, ++t) {
      if (token == -2) {
        if (spatial_window) {
          fill_spatial_frame(l, t, label, slot, distractors, s);
          l.active[t] = static_cast<std::int8_t>(slot);
        } else {
          l.slot_class[t].fill(label);
          l.slot_strength[t].fill(1.0);
        }
      } else if (token >= 0) {
        l.slot_class[t].fill(s.distractors ? token : label);
        l.slot_strength[t].fill(s.distractors ? s.distractor_strength : 1.0);
      }
    }
    if (token == -2) l.event_start = static_cast<int>(t - s.event_length);
  }
  l.event_length = s.event_length;
  l.moving_slot = slot;
  return l;
}

Vec3 rotate_yaw(Vec3 p, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double x = p.x, z = p.z - kSceneDepth;
  return {c * x + s * z, p.y, -s * x + c * z + kSceneDepth};
}

pose::Pixel project(const Vec3& p) {
  return {960.0 + 1000.0 * p.x / p.z, 540.0 - 1000.0 * p.y / p.z};
}

pose::PoseSequence make_pose(const Layout& l, int label, double yaw, const SyntheticSpec& s,
                             Rng& rng) {
  const std::size_t frames = s.frames();
  pose::PoseSequence seq;
  seq.joints = kJoints;
  seq.subject_present = {true, true};
  seq.label = label;
  seq.frames.resize(frames);

  const Vec3 offset{rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.1), rng.uniform(-0.3, 0.3)};
  std::array<Vec3, 2 * kJoints> base;
  for (std::size_t subj = 0; subj < 2; ++subj) {
    const double x0 = subj == 0 ? -kSubjectSpacing : kSubjectSpacing;
    for (std::size_t j = 0; j < kJoints; ++j) {
      base[subj * kJoints + j] = {x0 + kRest[j][0] + offset.x, kRest[j][1] + offset.y,
                                  kSceneDepth + kRest[j][2] + offset.z};
    }
  }
  if (s.pose_cue > 0.0) {
    const double angle = 2.0 * kPi * label / s.classes;
    const double dx = s.pose_cue * std::cos(angle) + s.pose_cue_noise * rng.normal();
    const double dy = s.pose_cue * std::sin(angle) + s.pose_cue_noise * rng.normal();
    for (auto j : kCueJoints) {
      base[j].x += dx;
      base[j].y += dy;
    }
  }

  Vec3 step{};
  double phase = 0.0;
  if (l.moving_slot != kNone) {
    if (l.circle) {
      phase = rng.uniform(0.0, 2.0 * kPi);
    } else {
      // Random direction, fixed step length.
      Vec3 d{rng.normal(), rng.normal(), rng.normal()};
      const double n = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
      const double len = 0.5 * s.hand_motion;
      step = {len * d.x / n, len * d.y / n, len * d.z / n};
    }
  }

  for (std::size_t t = 0; t < frames; ++t) {
    std::array<Vec3, 2 * kJoints> p = base;
    if (l.moving_slot != kNone) {
      Vec3 shift;
      if (l.circle) {
        const double a = phase + 2.0 * kPi * static_cast<double>(t) / kCirclePeriod;
        shift = {s.hand_motion * std::cos(a), s.hand_motion * std::sin(a), 0.0};
      } else {
        // Moves during the first w-1 window frames, then holds, so velocity
        // and acceleration vanish outside the window.
        const long k = std::clamp<long>(static_cast<long>(t) - l.event_start + 1, 0,
                                        static_cast<long>(l.event_length) - 1);
        shift = {step.x * k, step.y * k, step.z * k};
      }
      const std::size_t subj = static_cast<std::size_t>(l.moving_slot) / 2;
      for (auto j : kHandGroup[static_cast<std::size_t>(l.moving_slot) % 2]) {
        auto& q = p[subj * kJoints + j];
        q.x += shift.x;
        q.y += shift.y;
        q.z += shift.z;
      }
    }
    auto& f = seq.frames[t];
    f.joints.resize(2 * kJoints * 3);
    for (std::size_t i = 0; i < p.size(); ++i) {
      Vec3 q = yaw != 0.0 ? rotate_yaw(p[i], yaw) : p[i];
      if (s.jitter > 0.0) {
        q.x += s.jitter * rng.normal();
        q.y += s.jitter * rng.normal();
        q.z += s.jitter * rng.normal();
      }
      p[i] = q;
      f.joints[3 * i] = q.x;
      f.joints[3 * i + 1] = q.y;
      f.joints[3 * i + 2] = q.z;
    }
    for (std::size_t slot = 0; slot < kSlots; ++slot) {
      const std::size_t joint = slot % 2 == 0 ? pose::kLeftHand : pose::kRightHand;
      f.hands[slot] = project(p[(slot / 2) * kJoints + joint]);
    }
  }
  return seq;
}

std::vector<float> make_features(const Layout& l, const Templates& tpl, const SyntheticSpec& s,
                                 Rng& rng) {
  const std::size_t d = s.feature_dim;
  std::vector<float> out(l.slot_class.size() * kSlots * d);
  for (std::size_t t = 0; t < l.slot_class.size(); ++t) {
    for (std::size_t j = 0; j < kSlots; ++j) {
      float* v = out.data() + (t * kSlots + j) * d;
      const int c = l.slot_class[t][j];
      for (std::size_t i = 0; i < d; ++i) {
        double x = s.noise > 0.0 ? s.noise * rng.normal() : 0.0;
        if (c >= 0) x += l.slot_strength[t][j] * tpl.classes[c][i];
        if (static_cast<int>(j) == l.marker_slot) x += s.marker_strength * tpl.markers[j][i];
        v[i] = static_cast<float>(x);
      }
    }
  }
  return out;
}

std::vector<SequenceKind> kind_schedule(const SyntheticSpec& s, std::size_t n, Rng& rng) {
  if (s.task == TaskKind::ActiveHand) return std::vector<SequenceKind>(n, SequenceKind::Spatial);
  if (s.task == TaskKind::TemporalEvent) {
    return std::vector<SequenceKind>(n, SequenceKind::Temporal);
  }
  const std::array<std::pair<SequenceKind, double>, 4> parts = {{
      {SequenceKind::SpatioTemporal, s.mixture.spatio_temporal},
      {SequenceKind::Spatial, s.mixture.spatial},
      {SequenceKind::Temporal, s.mixture.temporal},
      {SequenceKind::HiddenMarker, s.mixture.hidden_marker},
  }};
  const double total = s.mixture.spatio_temporal + s.mixture.spatial + s.mixture.temporal +
                       s.mixture.hidden_marker;
  // Largest-remainder apportionment keeps the mixture exact per split.
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> rest{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double exact = parts[k].second / total * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    rest[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  while (assigned < n) {
    const auto k = static_cast<std::size_t>(std::max_element(rest.begin(), rest.end()) - rest.begin());
    ++counts[k];
    rest[k] = -1.0;
    ++assigned;
  }
  std::vector<SequenceKind> kinds;
  kinds.reserve(n);
  for (std::size_t k = 0; k < parts.size(); ++k) kinds.insert(kinds.end(), counts[k], parts[k].first);
  rng.shuffle(kinds);
  return kinds;
}

// Noise-free sum of the slot templates of a spatial frame, rounded into a key.
std::vector<long long> sum_key(const std::vector<std::vector<double>>& classes,
                               const std::array<int, kSlots>& slot_class,
                               const std::array<double, kSlots>& strength) {
  const std::size_t d = classes.front().size();
  std::vector<double> sum(d, 0.0);
  for (std::size_t j = 0; j < kSlots; ++j) {
    if (slot_class[j] < 0) continue;
    for (std::size_t i = 0; i < d; ++i) sum[i] += strength[j] * classes[slot_class[j]][i];
  }
  std::vector<long long> key(d);
  for (std::size_t i = 0; i < d; ++i) key[i] = std::llround(sum[i] * 1e6);
  return key;
}

double bayes_from_counts(const std::map<std::vector<long long>, std::vector<double>>& table) {
  double hit = 0.0, total = 0.0;
  for (const auto& [key, counts] : table) {
    hit += *std::max_element(counts.begin(), counts.end());
    total += std::accumulate(counts.begin(), counts.end(), 0.0);
  }
  return total > 0.0 ? hit / total : 0.0;
}

double enumerate_bayes(const SyntheticSpec& s, const Templates& tpl) {
  if (s.classes > 12) {
    // Orthonormal templates: the sum names the label and its distractors,
    // and the label is only hidden among them when strengths are equal.
    return s.distractor_strength == 1.0 ? 1.0 / (s.distractor_slots + 1) : 1.0;
  }
  std::map<std::vector<long long>, std::vector<double>> table;
  const int c_count = static_cast<int>(s.classes);
  for (int label = 0; label < c_count; ++label) {
    for (int slot = 0; slot < static_cast<int>(kSlots); ++slot) {
      for (int a = kNone; a < c_count; ++a) {
        for (int b = kNone; b < c_count; ++b) {
          for (int c = kNone; c < c_count; ++c) {
            const std::array<int, 3> d = {a, b, c};
            std::uint32_t used = 0;
            bool ok = true;
            for (std::size_t i = 0; i < 3; ++i) {
              if (d[i] == kNone) continue;
              ++used;
              ok = ok && d[i] != label;
              for (std::size_t k = 0; k < i; ++k) ok = ok && d[k] != d[i];
            }
            if (!ok || used != s.distractor_slots) continue;
            Layout l;
            l.slot_class.assign(1, {});
            l.slot_strength.assign(1, {});
            fill_spatial_frame(l, 0, label, slot, d, s);
            auto& counts = table[sum_key(tpl.classes, l.slot_class[0], l.slot_strength[0])];
            counts.resize(s.classes, 0.0);
            counts[label] += 1.0;
          }
        }
      }
    }
  }
  return bayes_from_counts(table);
}

struct Draw {
  std::vector<data::SequenceRecord> records;
  double empirical_bayes = 0.0;
  std::size_t spatial_count = 0;
};

Draw draw(const SyntheticSpec& s, const Templates& tpl, std::uint32_t attempt) {
  const std::size_t n_train = s.train_count, n_test = s.test_count;
  Draw out;
  out.records.resize(n_train + n_test);
  std::array<std::vector<SequenceKind>, 2> kinds;
  std::array<std::vector<int>, 2> labels;
  for (std::size_t split = 0; split < 2; ++split) {
    const std::size_t n = split == 0 ? n_train : n_test;
    Rng rng(derive_seed(s.seed, attempt, 0x5117 + split));
    labels[split].resize(n);
    for (std::size_t i = 0; i < n; ++i) labels[split][i] = static_cast<int>(i % s.classes);
    rng.shuffle(labels[split]);
    kinds[split] = kind_schedule(s, n, rng);
  }

  std::vector<std::vector<long long>> keys(out.records.size());
  parallel_for(out.records.size(), default_workers(), [&](std::size_t idx) {
    const bool test = idx >= n_train;
    const std::size_t split = test ? 1 : 0;
    const std::size_t i = test ? idx - n_train : idx;
    Rng rng(derive_seed(s.seed, attempt, 0x5e9 + split, i));
    const int label = labels[split][i];
    const SequenceKind kind = kinds[split][i];
    Parity parity = Parity::Any;
    double yaw = 0.0;
    if (s.view_shift) {
      parity = test ? Parity::Odd : Parity::Even;
      const auto& range = test ? s.test_yaw_deg : s.train_yaw_deg;
      yaw = rng.uniform(range[0], range[1]) * kPi / 180.0;
      if (rng.bernoulli(0.5)) yaw = -yaw;
    }
    Layout layout = make_layout(kind, label, parity, s, rng);
    data::SequenceRecord r;
    r.id = static_cast<std::uint32_t>(idx);
    r.split = test ? data::Split::Test : data::Split::Train;
    r.pose = make_pose(layout, label, yaw, s, rng);
    r.features = make_features(layout, tpl, s, rng);
    r.hand_present.assign(s.frames() * kSlots, 1);
    r.active_slot = layout.active;
    r.event_start = layout.event_start;
    r.event_length = layout.event_length;
    r.layout = static_cast<std::uint16_t>(kind);
    if (kind == SequenceKind::Spatial) {
      keys[idx] = sum_key(tpl.classes, layout.slot_class[0], layout.slot_strength[0]);
    }
    out.records[idx] = std::move(r);
  });

  std::map<std::vector<long long>, std::vector<double>> table;
  for (std::size_t idx = 0; idx < keys.size(); ++idx) {
    if (keys[idx].empty()) continue;
    auto& counts = table[keys[idx]];
    counts.resize(s.classes, 0.0);
    counts[out.records[idx].label()] += 1.0;
    ++out.spatial_count;
  }
  out.empirical_bayes = bayes_from_counts(table);
  return out;
}

}  // namespace

const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::ActiveHand: return "active-hand";
    case TaskKind::TemporalEvent: return "temporal-event";
    case TaskKind::Combined: return "combined";
  }
  return "?";
}

TaskKind parse_task(const std::string& s) {
  for (auto k : {TaskKind::ActiveHand, TaskKind::TemporalEvent, TaskKind::Combined}) {
    if (s == to_string(k)) return k;
  }
  throw SpecError("unknown task '" + s + "' (expected active-hand, temporal-event or combined)");
}

const char* to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::Spatial: return "spatial";
    case SequenceKind::Temporal: return "temporal";
    case SequenceKind::SpatioTemporal: return "spatio-temporal";
    case SequenceKind::HiddenMarker: return "hidden-marker";
  }
  return "?";
}

SyntheticSpec default_spec(TaskKind task) {
  SyntheticSpec s;
  s.task = task;
  switch (task) {
    case TaskKind::ActiveHand:
      // Noisy enough that blurred attention costs accuracy.
      s.noise = 1.0;
      break;
    case TaskKind::TemporalEvent:
      s.jitter = 0.0;
      break;
    case TaskKind::Combined:
      s.jitter = 0.0;
      s.noise = 0.3;
      s.pose_cue = 0.05;
      s.pose_cue_noise = 0.065;
      break;
  }
  return s;
}

void validate(const SyntheticSpec& s) {
  auto fail = [](const std::string& msg) { throw SpecError("synthetic spec: " + msg); };
  if (s.classes < 2) fail("need at least two classes");
  if (s.window == 0) fail("window must be positive");
  if (s.frames() < s.window) fail("sequence length must be at least the window");
  if (s.feature_dim < s.classes) fail("feature_dim must be at least the class count");
  if (needs_markers(s) && s.feature_dim < s.classes + kSlots) {
    fail("hidden-marker layouts need feature_dim >= classes + 4");
  }
  if (s.noise < 0.0 || s.jitter < 0.0 || s.pose_cue < 0.0 || s.pose_cue_noise < 0.0) {
    fail("noise levels must be non-negative");
  }
  if (s.distractor_strength < 0.0 || s.marker_strength < 0.0 || s.hand_motion <= 0.0) {
    fail("strengths must be non-negative and hand motion positive");
  }
  if (s.train_count < s.classes || s.test_count < s.classes) {
    fail("each split needs at least one sequence per class");
  }
  if (s.val_fraction < 0.0 || s.val_fraction >= 1.0) fail("val_fraction must lie in [0, 1)");
  const auto& m = s.mixture;
  if (m.spatio_temporal < 0 || m.spatial < 0 || m.temporal < 0 || m.hidden_marker < 0 ||
      m.spatio_temporal + m.spatial + m.temporal + m.hidden_marker <= 0) {
    fail("mixture fractions must be non-negative with a positive total");
  }
  const bool temporal = s.task == TaskKind::TemporalEvent ||
                        (s.task == TaskKind::Combined && (m.temporal > 0 || m.spatio_temporal > 0));
  if (temporal) {
    if (s.event_length < 2 || s.event_length >= s.frames()) {
      fail("event_length must satisfy 2 <= w < frames");
    }
    if (s.distractor_blocks > s.classes - 1) {
      fail("distractor_blocks must be below the class count");
    }
    const bool temporal_layout = s.task == TaskKind::TemporalEvent || m.temporal > 0;
    std::size_t blocks = temporal_layout ? s.distractor_blocks + 1 : 0;
    if (s.task == TaskKind::Combined && m.spatio_temporal > 0) {
      blocks = std::max<std::size_t>(blocks, s.classes + 1);
    }
    if (blocks * s.event_length > s.frames()) {
      fail("frames must hold the event window and every block of event_length frames");
    }
  }
  const bool spatial = s.task == TaskKind::ActiveHand ||
                       (s.task == TaskKind::Combined &&
                        (m.spatial > 0 || m.spatio_temporal > 0 || m.hidden_marker > 0));
  if (spatial && s.distractors) {
    if (s.distractor_slots < 1 || s.distractor_slots > kSlots - 1) {
      fail("distractor_slots must lie in [1, 3]");
    }
    if (s.classes < s.distractor_slots + 1) {
      fail("spatial layouts need more classes than distractor slots");
    }
    if (s.sum_margin < 0.0) fail("sum_margin must be non-negative");
    const double rate = sum_baseline_bayes_rate(s.classes, s.distractor_slots, s.distractor_strength);
    if (rate > 1.0 / s.classes + s.sum_margin + 1e-12) {
      fail("Sum-baseline Bayes rate " + std::to_string(rate) + " exceeds chance + " +
           std::to_string(s.sum_margin) + " for " + std::to_string(s.classes) + " classes");
    }
  }
}

double sum_baseline_bayes_rate(std::uint32_t classes, std::uint32_t distractor_slots,
                               double distractor_strength) {
  if (distractor_slots < 1 || distractor_slots > kSlots - 1) {
    throw SpecError("distractor_slots must lie in [1, 3]");
  }
  if (classes < distractor_slots + 1) {
    // Distractors would have to repeat, which reveals the label.
    return 1.0;
  }
  SyntheticSpec s;
  s.classes = classes;
  s.distractor_slots = distractor_slots;
  s.distractor_strength = distractor_strength;
  s.feature_dim = classes;
  s.task = TaskKind::ActiveHand;
  return enumerate_bayes(s, make_templates(s));
}

nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"task", to_string(s.task)},
          {"classes", s.classes},
          {"window", s.window},
          {"length", s.length},
          {"feature_dim", s.feature_dim},
          {"noise", s.noise},
          {"distractor_strength", s.distractor_strength},
          {"distractors", s.distractors},
          {"distractor_slots", s.distractor_slots},
          {"distractor_blocks", s.distractor_blocks},
          {"sum_margin", s.sum_margin},
          {"marker_strength", s.marker_strength},
          {"jitter", s.jitter},
          {"hand_motion", s.hand_motion},
          {"pose_cue", s.pose_cue},
          {"pose_cue_noise", s.pose_cue_noise},
          {"event_length", s.event_length},
          {"pin_event_end", s.pin_event_end},
          {"mixture",
           {{"spatio_temporal", s.mixture.spatio_temporal},
            {"spatial", s.mixture.spatial},
            {"temporal", s.mixture.temporal},
            {"hidden_marker", s.mixture.hidden_marker}}},
          {"train_count", s.train_count},
          {"test_count", s.test_count},
          {"val_fraction", s.val_fraction},
          {"view_shift", s.view_shift},
          {"train_yaw_deg", s.train_yaw_deg},
          {"test_yaw_deg", s.test_yaw_deg},
          {"seed", s.seed}};
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SpecError("synthetic spec must be a JSON object");
  SyntheticSpec s = default_spec(parse_task(j.value("task", std::string("active-hand"))));
  const nlohmann::json defaults = to_json(s);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw SpecError("synthetic spec: unknown key '" + key + "'");
    if (key == "mixture") {
      for (const auto& [mk, mv] : value.items()) {
        if (!defaults["mixture"].contains(mk)) {
          throw SpecError("synthetic spec: unknown mixture key '" + mk + "'");
        }
      }
    }
  }
  try {
    s.classes = j.value("classes", s.classes);
    s.window = j.value("window", s.window);
    s.length = j.value("length", s.length);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.noise = j.value("noise", s.noise);
    s.distractor_strength = j.value("distractor_strength", s.distractor_strength);
    s.distractors = j.value("distractors", s.distractors);
    s.distractor_slots = j.value("distractor_slots", s.distractor_slots);
    s.distractor_blocks = j.value("distractor_blocks", s.distractor_blocks);
    s.sum_margin = j.value("sum_margin", s.sum_margin);
    s.marker_strength = j.value("marker_strength", s.marker_strength);
    s.jitter = j.value("jitter", s.jitter);
    s.hand_motion = j.value("hand_motion", s.hand_motion);
    s.pose_cue = j.value("pose_cue", s.pose_cue);
    s.pose_cue_noise = j.value("pose_cue_noise", s.pose_cue_noise);
    s.event_length = j.value("event_length", s.event_length);
    s.pin_event_end = j.value("pin_event_end", s.pin_event_end);
    if (j.contains("mixture")) {
      const auto& m = j["mixture"];
      s.mixture.spatio_temporal = m.value("spatio_temporal", s.mixture.spatio_temporal);
      s.mixture.spatial = m.value("spatial", s.mixture.spatial);
      s.mixture.temporal = m.value("temporal", s.mixture.temporal);
      s.mixture.hidden_marker = m.value("hidden_marker", s.mixture.hidden_marker);
    }
    s.train_count = j.value("train_count", s.train_count);
    s.test_count = j.value("test_count", s.test_count);
    s.val_fraction = j.value("val_fraction", s.val_fraction);
    s.view_shift = j.value("view_shift", s.view_shift);
    s.train_yaw_deg = j.value("train_yaw_deg", s.train_yaw_deg);
    s.test_yaw_deg = j.value("test_yaw_deg", s.test_yaw_deg);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("synthetic spec: ") + e.what());
  }
  return s;
}

Generated generate(const SyntheticSpec& spec) {
  validate(spec);
  const Templates tpl = make_templates(spec);
  const double theory =
      spec.distractors ? sum_baseline_bayes_rate(spec.classes, spec.distractor_slots,
                                                    spec.distractor_strength) : 1.0;
  Generated g;
  for (std::uint32_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Draw d = draw(spec, tpl, attempt);
    if (d.spatial_count > 0 && spec.distractors) {
      // Allow three binomial standard errors above the construction's rate.
      const double n = static_cast<double>(d.spatial_count);
      const double limit = theory + 3.0 * std::sqrt(theory * (1.0 - theory) / n) + 1e-12;
      if (d.empirical_bayes > limit) continue;
    }
    g.attempts = attempt + 1;
    g.dataset.classes = spec.classes;
    g.dataset.feature_dim = spec.feature_dim;
    g.dataset.joints = kJoints;
    g.dataset.task = to_string(spec.task);
    g.dataset.sequences = std::move(d.records);
    data::assign_validation_split(g.dataset, spec.val_fraction, derive_seed(spec.seed, 0x7a1));
    return g;
  }
  throw SpecError("synthetic spec: no draw passed the Sum-baseline ambiguity check after " +
                  std::to_string(kMaxAttempts) + " attempts");
}

}  // namespace poseattn::synth
