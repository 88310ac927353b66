#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "poseattn/nn.hpp"
#include "poseattn/tensor.hpp"

namespace poseattn::model {

inline constexpr std::size_t kHandSlots = 4;

/// Input of the spatial attention MLP, or a fixed integration rule when no
/// attention is used.
enum class Conditioning { HiddenState, AugmentedPose, Both, SumBaseline, ConcatBaseline };

/// How the recurrent states become class scores. PerStep classifies every
/// state (logits averaged over steps for prediction); Attention pools states
/// with motion-conditioned weights; LastStep and Mean are pooling baselines.
enum class Pooling { PerStep, Attention, LastStep, Mean };

enum class EncoderKind { Precomputed, Patch };

const char* to_string(Conditioning c);
const char* to_string(Pooling p);
const char* to_string(EncoderKind e);
Conditioning parse_conditioning(const std::string& s);
Pooling parse_pooling(const std::string& s);
EncoderKind parse_encoder(const std::string& s);

inline bool uses_spatial_attention(Conditioning c) {
  return c != Conditioning::SumBaseline && c != Conditioning::ConcatBaseline;
}

struct RgbStreamConfig {
  std::size_t window = 20;
  std::size_t hand_input_dim = 2048;  // per-hand vector as stored in the dataset
  std::size_t feature_dim = 2048;     // glimpse feature size after the encoder
  std::size_t aug_pose_dim = 450;
  std::size_t hidden = 1024;
  std::size_t spatial_hidden = 256;
  std::size_t temporal_hidden = 32;
  std::size_t classes = 60;
  Conditioning conditioning = Conditioning::AugmentedPose;
  Pooling pooling = Pooling::Attention;
  EncoderKind encoder = EncoderKind::Precomputed;
  bool mask_absent_hands = false;
  double dropout = 0.5;

  std::size_t gru_input_dim() const {
    return conditioning == Conditioning::ConcatBaseline ? kHandSlots * feature_dim : feature_dim;
  }
  std::size_t spatial_input_dim() const;
};

struct RgbBatch {
  std::vector<Tensor> hands;     // per step [B, 4, hand_input_dim]
  std::vector<Tensor> present;   // per step [B, 4], 1 for a present hand
  std::vector<Tensor> aug_pose;  // per step [B, aug_pose_dim]
  Tensor motion;                 // [B, 2T], m_t pairs in time order

  std::size_t batch() const { return hands.empty() ? 0 : hands.front().dim(0); }
  std::size_t steps() const { return hands.size(); }
};

struct StreamOutput {
  Tensor logits;              // [B, C]
  Tensor step_logits;         // [B, T, C]; defined for per-step classification
  Tensor spatial_attention;   // [B, T, 4]; defined when spatial attention runs
  Tensor temporal_attention;  // [B, T]; defined with attention pooling
  Tensor hidden_states;       // [B, T, hidden]
};

// Mean per-step cross-entropy when step logits exist, otherwise
// cross-entropy of the pooled logits.
Tensor stream_loss(const StreamOutput& out, std::span<const int> targets);

/// p_t = softmax(f_p(input)) where input is the augmented pose, the previous
/// hidden state, or both concatenated. `mask_bias` ([B, 4], optional) is
/// added to the scores before the softmax.
Tensor spatial_attention(const nn::MlpParams& f_p, Conditioning cond, const Tensor& aug_pose,
                         const Tensor& h_prev, const Tensor& mask_bias = {},
                         const nn::Dropout& dropout = {});

// v~_t = V_t p_t for hands [B, 4, D] and p [B, 4] -> [B, D].
Tensor context_vector(const Tensor& hands, const Tensor& p);

// Sum: [B, D] plain sum over slots; Concat: [B, 4D].
Tensor baseline_context(Conditioning cond, const Tensor& hands);

/// p' = softmax(f'_p(M)) and h~ = H p' for H [B, T, hidden], M [B, 2T].
std::pair<Tensor, Tensor> temporal_attention_pool(const nn::MlpParams& f_tp, const Tensor& states,
                                                  const Tensor& motion,
                                                  const nn::Dropout& dropout = {});

Tensor fuse_logits(const Tensor& a, const Tensor& b);

/// Trainable glimpse encoder: tanh(W patch + b) per hand, zero for absent
/// hands.
struct PatchEncoder {
  nn::LinearParams projection;

  Tensor encode(const Tensor& patches, const Tensor& present) const;
};

class RgbStream {
 public:
  RgbStream(RgbStreamConfig config, Rng& rng);

  StreamOutput forward(const RgbBatch& batch, const nn::Dropout& dropout = {}) const;
  std::vector<NamedTensor> parameters() const;
  const RgbStreamConfig& config() const { return config_; }

 private:
  RgbStreamConfig config_;
  std::optional<PatchEncoder> encoder_;
  std::optional<nn::MlpParams> spatial_;
  std::optional<nn::MlpParams> temporal_;
  nn::GruParams gru_;
  nn::LinearParams classifier_;
};

struct PoseStreamConfig {
  std::size_t pose_dim = 150;
  std::size_t hidden = 150;
  std::size_t layers = 3;
  std::size_t classes = 60;
  double dropout = 0.5;
  bool dropout_between_layers = true;
};

struct PoseBatch {
  std::vector<Tensor> poses;  // per step [B, pose_dim]

  std::size_t batch() const { return poses.empty() ? 0 : poses.front().dim(0); }
};

/// Deep GRU pose stream with a classifier on every hidden state.
class PoseStream {
 public:
  PoseStream(PoseStreamConfig config, Rng& rng);

  StreamOutput forward(const PoseBatch& batch, const nn::Dropout& dropout = {}) const;
  std::vector<NamedTensor> parameters() const;
  const PoseStreamConfig& config() const { return config_; }

 private:
  PoseStreamConfig config_;
  nn::GruStack stack_;
  nn::LinearParams classifier_;
};

}  // namespace poseattn::model
