#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "poseattn/random.hpp"
#include "poseattn/tensor.hpp"

namespace poseattn::nn {

/// Dropout switch threaded through forward passes. Inverted dropout: kept
/// units are scaled by 1/(1-rate) at train time; identity at eval time.
struct Dropout {
  double rate = 0.0;
  bool train = false;
  Rng* rng = nullptr;

  bool active() const { return train && rate > 0.0; }
  Tensor apply(const Tensor& x) const;

  static Dropout eval() { return {}; }
};

struct LinearParams {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }
  Tensor forward(const Tensor& x) const;
};

// Glorot-uniform weights, zero bias; all zeros when zero_init is set.
LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng, bool zero_init = false);

enum class OutputActivation { Identity, Softmax };

/// ReLU MLP. Dropout, when active, is applied to the hidden activations.
struct MlpParams {
  std::vector<LinearParams> layers;

  std::size_t in_features() const { return layers.front().in_features(); }
  std::size_t out_features() const { return layers.back().out_features(); }
};

// sizes = {in, hidden..., out}. The output layer is zero-initialized when
// zero_output is set, which makes a softmax head start uniform.
MlpParams init_mlp(std::span<const std::size_t> sizes, Rng& rng, bool zero_output = false);

Tensor mlp_forward(const MlpParams& mlp, const Tensor& x, OutputActivation output,
                   const Dropout& dropout = {});

/// z = s(W_z x + U_z h + b_z), r = s(W_r x + U_r h + b_r),
/// c = tanh(W_c x + U_c (r . h) + b_c), h' = (1 - z) . h + z . c
struct GruParams {
  Tensor w_z, w_r, w_c;  // [hidden, in]
  Tensor u_z, u_r, u_c;  // [hidden, hidden]
  Tensor b_z, b_r, b_c;  // [hidden]

  std::size_t input_size() const { return w_z.dim(1); }
  std::size_t hidden_size() const { return w_z.dim(0); }
};

GruParams init_gru(std::size_t in, std::size_t hidden, Rng& rng);

// h_prev [B,hidden] or [hidden]; x [B,in] or [in].
Tensor gru_cell_step(const GruParams& params, const Tensor& h_prev, const Tensor& x);

struct GruStack {
  std::vector<GruParams> layers;
  // Dropout on the inputs of layers above the first.
  bool dropout_between_layers = true;
};

GruStack init_gru_stack(std::size_t in, std::size_t hidden, std::size_t layers, Rng& rng);

// Zero initial states; returns the top-layer state for every step.
std::vector<Tensor> gru_stack_forward(const GruStack& stack, std::span<const Tensor> xs,
                                      const Dropout& dropout = {});

// Mean over rows of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState init_adam(std::span<const NamedTensor> params, AdamConfig config = {});

// One bias-corrected update from the parameters' accumulated gradients
// (missing gradients count as zero). Throws NumericError on non-finite grads.
void adam_step(AdamState& state, std::span<const NamedTensor> params);

void zero_grads(std::span<const NamedTensor> params);

// Appends "<prefix>.<field>" entries.
void collect(std::vector<NamedTensor>& out, const std::string& prefix, const LinearParams& p);
void collect(std::vector<NamedTensor>& out, const std::string& prefix, const MlpParams& p);
void collect(std::vector<NamedTensor>& out, const std::string& prefix, const GruParams& p);
void collect(std::vector<NamedTensor>& out, const std::string& prefix, const GruStack& p);

}  // namespace poseattn::nn
