#include "poseattn/model.hpp"

#include <stdexcept>

#include "poseattn/ops.hpp"

namespace poseattn::model {

const char* to_string(Conditioning c) {
  switch (c) {
    case Conditioning::HiddenState: return "hidden";
    case Conditioning::AugmentedPose: return "pose";
    case Conditioning::Both: return "both";
    case Conditioning::SumBaseline: return "sum";
    case Conditioning::ConcatBaseline: return "concat";
  }
  return "?";
}

const char* to_string(Pooling p) {
  switch (p) {
    case Pooling::PerStep: return "per-step";
    case Pooling::Attention: return "attention";
    case Pooling::LastStep: return "last-step";
    case Pooling::Mean: return "mean";
  }
  return "?";
}

const char* to_string(EncoderKind e) {
  return e == EncoderKind::Patch ? "patch" : "precomputed";
}

Conditioning parse_conditioning(const std::string& s) {
  for (auto c : {Conditioning::HiddenState, Conditioning::AugmentedPose, Conditioning::Both,
                 Conditioning::SumBaseline, Conditioning::ConcatBaseline}) {
    if (s == to_string(c)) return c;
  }
  throw std::invalid_argument("unknown conditioning '" + s + "'");
}

Pooling parse_pooling(const std::string& s) {
  for (auto p : {Pooling::PerStep, Pooling::Attention, Pooling::LastStep, Pooling::Mean}) {
    if (s == to_string(p)) return p;
  }
  throw std::invalid_argument("unknown pooling '" + s + "'");
}

EncoderKind parse_encoder(const std::string& s) {
  if (s == "patch") return EncoderKind::Patch;
  if (s == "precomputed") return EncoderKind::Precomputed;
  throw std::invalid_argument("unknown encoder '" + s + "'");
}

std::size_t RgbStreamConfig::spatial_input_dim() const {
  switch (conditioning) {
    case Conditioning::HiddenState: return hidden;
    case Conditioning::AugmentedPose: return aug_pose_dim;
    case Conditioning::Both: return aug_pose_dim + hidden;
    default: return 0;
  }
}

Tensor stream_loss(const StreamOutput& out, std::span<const int> targets) {
  if (!out.step_logits.defined()) return nn::cross_entropy(out.logits, targets);
  const std::size_t b = out.step_logits.dim(0), t = out.step_logits.dim(1),
                    c = out.step_logits.dim(2);
  if (targets.size() != b) {
    throw ShapeError("stream_loss: " + std::to_string(targets.size()) + " targets for batch " +
                     std::to_string(b));
  }
  // Rows are (sample, step) pairs, so the mean over rows is the mean of the
  // per-step losses.
  std::vector<int> repeated;
  repeated.reserve(b * t);
  for (std::size_t i = 0; i < b; ++i) repeated.insert(repeated.end(), t, targets[i]);
  return nn::cross_entropy(reshape(out.step_logits, {b * t, c}), repeated);
}

Tensor spatial_attention(const nn::MlpParams& f_p, Conditioning cond, const Tensor& aug_pose,
                         const Tensor& h_prev, const Tensor& mask_bias,
                         const nn::Dropout& dropout) {
  Tensor input;
  switch (cond) {
    case Conditioning::AugmentedPose:
      input = aug_pose;
      break;
    case Conditioning::HiddenState:
      input = h_prev;
      break;
    case Conditioning::Both: {
      if (!aug_pose.defined() || !h_prev.defined()) {
        throw ShapeError("spatial_attention: 'both' conditioning needs pose and hidden state");
      }
      const Tensor parts[] = {aug_pose, h_prev};
      input = concat(parts, 1);
      break;
    }
    default:
      throw std::invalid_argument(std::string("spatial_attention: conditioning '") +
                                  to_string(cond) + "' does not use attention");
  }
  if (!input.defined() || input.rank() != 2 || input.dim(1) != f_p.in_features()) {
    throw ShapeError(std::string("spatial_attention: ") + to_string(cond) + " input " +
                     (input.defined() ? shape_str(input.shape()) : std::string("<none>")) +
                     " does not match attention input size " +
                     std::to_string(f_p.in_features()));
  }
  Tensor scores = nn::mlp_forward(f_p, input, nn::OutputActivation::Identity, dropout);
  if (mask_bias.defined()) scores = scores + mask_bias;
  return softmax(scores);
}

Tensor context_vector(const Tensor& hands, const Tensor& p) {
  if (hands.rank() != 3 || p.rank() != 2 || hands.dim(0) != p.dim(0) ||
      hands.dim(1) != p.dim(1)) {
    throw ShapeError("context_vector: hands " + shape_str(hands.shape()) +
                     " incompatible with weights " + shape_str(p.shape()));
  }
  const std::size_t b = hands.dim(0), n = hands.dim(1), d = hands.dim(2);
  return reshape(matmul(reshape(p, {b, 1, n}), hands), {b, d});
}

Tensor baseline_context(Conditioning cond, const Tensor& hands) {
  if (hands.rank() != 3) throw ShapeError("baseline_context: hands must be [B, 4, D]");
  if (cond == Conditioning::SumBaseline) return sum(hands, 1);
  if (cond == Conditioning::ConcatBaseline) {
    return reshape(hands, {hands.dim(0), hands.dim(1) * hands.dim(2)});
  }
  throw std::invalid_argument("baseline_context: not a baseline conditioning");
}

std::pair<Tensor, Tensor> temporal_attention_pool(const nn::MlpParams& f_tp, const Tensor& states,
                                                  const Tensor& motion,
                                                  const nn::Dropout& dropout) {
  if (states.rank() != 3) throw ShapeError("temporal_attention_pool: states must be [B, T, H]");
  const std::size_t b = states.dim(0), t = states.dim(1), h = states.dim(2);
  if (motion.rank() != 2 || motion.dim(0) != b || motion.dim(1) != 2 * t ||
      f_tp.in_features() != 2 * t || f_tp.out_features() != t) {
    throw ShapeError("temporal_attention_pool: motion " + shape_str(motion.shape()) +
                     " / attention sizes do not match " + std::to_string(t) + " steps");
  }
  Tensor weights = nn::mlp_forward(f_tp, motion, nn::OutputActivation::Softmax, dropout);
  Tensor pooled = reshape(matmul(reshape(weights, {b, 1, t}), states), {b, h});
  return {pooled, weights};
}

Tensor fuse_logits(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("fuse_logits: shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
  return add(a, b);
}

Tensor PatchEncoder::encode(const Tensor& patches, const Tensor& present) const {
  const std::size_t b = patches.dim(0), n = patches.dim(1), p = patches.dim(2);
  Tensor flat = reshape(patches, {b * n, p});
  Tensor feats = tanh(projection.forward(flat));
  const std::size_t d = projection.out_features();
  std::vector<double> mask(b * n * d);
  auto pv = present.values();
  for (std::size_t i = 0; i < b * n; ++i) {
    for (std::size_t k = 0; k < d; ++k) mask[i * d + k] = pv[i];
  }
  return reshape(mask_multiply(feats, std::move(mask)), {b, n, d});
}

RgbStream::RgbStream(RgbStreamConfig config, Rng& rng) : config_(std::move(config)) {
  const auto& c = config_;
  if (c.window == 0 || c.classes < 2 || c.hidden == 0 || c.feature_dim == 0) {
    throw std::invalid_argument("rgb stream: invalid dimensions");
  }
  if (c.encoder == EncoderKind::Patch) {
    encoder_ = PatchEncoder{nn::init_linear(c.hand_input_dim, c.feature_dim, rng)};
  } else if (c.hand_input_dim != c.feature_dim) {
    throw std::invalid_argument("rgb stream: precomputed features must have the feature size");
  }
  if (uses_spatial_attention(c.conditioning)) {
    const std::size_t sizes[] = {c.spatial_input_dim(), c.spatial_hidden, kHandSlots};
    spatial_ = nn::init_mlp(sizes, rng, /*zero_output=*/true);
  }
  if (c.pooling == Pooling::Attention) {
    const std::size_t sizes[] = {2 * c.window, c.temporal_hidden, c.window};
    temporal_ = nn::init_mlp(sizes, rng, /*zero_output=*/true);
  }
  gru_ = nn::init_gru(c.gru_input_dim(), c.hidden, rng);
  classifier_ = nn::init_linear(c.hidden, c.classes, rng);
}

std::vector<NamedTensor> RgbStream::parameters() const {
  std::vector<NamedTensor> out;
  if (encoder_) nn::collect(out, "rgb.encoder", encoder_->projection);
  if (spatial_) nn::collect(out, "rgb.spatial_attention", *spatial_);
  if (temporal_) nn::collect(out, "rgb.temporal_attention", *temporal_);
  nn::collect(out, "rgb.gru", gru_);
  nn::collect(out, "rgb.classifier", classifier_);
  return out;
}

StreamOutput RgbStream::forward(const RgbBatch& batch, const nn::Dropout& dropout) const {
  const auto& c = config_;
  const std::size_t steps = batch.steps();
  if (steps == 0) throw std::invalid_argument("rgb stream: empty window");
  if (steps != c.window) {
    throw ShapeError("rgb stream: got " + std::to_string(steps) + " steps, configured for " +
                     std::to_string(c.window));
  }
  const std::size_t b = batch.batch();
  const bool attend = spatial_.has_value();
  if (attend && c.conditioning != Conditioning::HiddenState && batch.aug_pose.size() != steps) {
    throw ShapeError("rgb stream: augmented pose missing for pose-conditioned attention");
  }
  const bool need_present = encoder_ || (attend && c.mask_absent_hands);
  if (need_present && batch.present.size() != steps) {
    throw ShapeError("rgb stream: hand presence masks missing");
  }

  Tensor h = Tensor::zeros({b, c.hidden});
  std::vector<Tensor> states;
  std::vector<Tensor> attention;
  states.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor& raw = batch.hands[t];
    if (raw.rank() != 3 || raw.dim(0) != b || raw.dim(1) != kHandSlots ||
        raw.dim(2) != c.hand_input_dim) {
      throw ShapeError("rgb stream: hands at step " + std::to_string(t) + " have shape " +
                       shape_str(raw.shape()));
    }
    Tensor hands = encoder_ ? encoder_->encode(raw, batch.present[t]) : raw;
    Tensor context;
    if (attend) {
      Tensor mask_bias;
      if (c.mask_absent_hands) {
        std::vector<double> bias(b * kHandSlots);
        auto pv = batch.present[t].values();
        for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = pv[i] > 0.5 ? 0.0 : -1e9;
        mask_bias = Tensor({b, kHandSlots}, std::move(bias));
      }
      Tensor pose_in = c.conditioning == Conditioning::HiddenState ? Tensor{} : batch.aug_pose[t];
      Tensor p = spatial_attention(*spatial_, c.conditioning, pose_in, h, mask_bias, dropout);
      attention.push_back(p);
      context = context_vector(hands, p);
    } else {
      context = baseline_context(c.conditioning, hands);
    }
    h = nn::gru_cell_step(gru_, h, dropout.apply(context));
    states.push_back(h);
  }

  StreamOutput out;
  out.hidden_states = stack(states, 1);
  if (attend) out.spatial_attention = stack(attention, 1);
  switch (c.pooling) {
    case Pooling::Attention: {
      if (!batch.motion.defined()) throw ShapeError("rgb stream: motion statistics missing");
      auto [pooled, weights] = temporal_attention_pool(*temporal_, out.hidden_states,
                                                       batch.motion, dropout);
      out.temporal_attention = weights;
      out.logits = classifier_.forward(pooled);
      break;
    }
    case Pooling::PerStep: {
      Tensor flat = reshape(out.hidden_states, {b * steps, c.hidden});
      out.step_logits = reshape(classifier_.forward(flat), {b, steps, c.classes});
      out.logits = mean(out.step_logits, 1);
      break;
    }
    case Pooling::LastStep:
      out.logits = classifier_.forward(states.back());
      break;
    case Pooling::Mean:
      out.logits = classifier_.forward(mean(out.hidden_states, 1));
      break;
  }
  return out;
}

PoseStream::PoseStream(PoseStreamConfig config, Rng& rng) : config_(std::move(config)) {
  if (config_.classes < 2 || config_.pose_dim == 0 || config_.hidden == 0) {
    throw std::invalid_argument("pose stream: invalid dimensions");
  }
  stack_ = nn::init_gru_stack(config_.pose_dim, config_.hidden, config_.layers, rng);
  stack_.dropout_between_layers = config_.dropout_between_layers;
  classifier_ = nn::init_linear(config_.hidden, config_.classes, rng);
}

std::vector<NamedTensor> PoseStream::parameters() const {
  std::vector<NamedTensor> out;
  nn::collect(out, "pose.stack", stack_);
  nn::collect(out, "pose.classifier", classifier_);
  return out;
}

StreamOutput PoseStream::forward(const PoseBatch& batch, const nn::Dropout& dropout) const {
  if (batch.poses.empty()) throw std::invalid_argument("pose stream: empty window");
  const std::size_t b = batch.batch(), steps = batch.poses.size();
  auto states = nn::gru_stack_forward(stack_, batch.poses, dropout);
  StreamOutput out;
  out.hidden_states = stack(states, 1);
  Tensor flat = reshape(out.hidden_states, {b * steps, config_.hidden});
  out.step_logits = reshape(classifier_.forward(flat), {b, steps, config_.classes});
  out.logits = mean(out.step_logits, 1);
  return out;
}

}  // namespace poseattn::model
