#include "poseattn/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "poseattn/ops.hpp"

namespace poseattn::nn {

Tensor Dropout::apply(const Tensor& x) const {
  if (!active()) return x;
  if (!rng) throw std::logic_error("train-time dropout needs an rng");
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  return mask_multiply(x, std::move(mask));
}

Tensor LinearParams::forward(const Tensor& x) const { return linear(x, weight, bias); }

LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng, bool zero_init) {
  std::vector<double> w(in * out, 0.0);
  if (!zero_init) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& v : w) v = rng.uniform(-a, a);
  }
  return {Tensor({out, in}, std::move(w), true), Tensor::zeros({out}, true)};
}

MlpParams init_mlp(std::span<const std::size_t> sizes, Rng& rng, bool zero_output) {
  if (sizes.size() < 2) throw std::invalid_argument("mlp needs at least input and output sizes");
  MlpParams mlp;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const bool last = i + 2 == sizes.size();
    mlp.layers.push_back(init_linear(sizes[i], sizes[i + 1], rng, last && zero_output));
  }
  return mlp;
}

Tensor mlp_forward(const MlpParams& mlp, const Tensor& x, OutputActivation output,
                   const Dropout& dropout) {
  if (x.rank() != 2 || x.dim(1) != mlp.in_features()) {
    throw ShapeError("mlp: input " + shape_str(x.shape()) + " does not match input size " +
                     std::to_string(mlp.in_features()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    h = mlp.layers[i].forward(h);
    if (i + 1 < mlp.layers.size()) h = dropout.apply(relu(h));
  }
  return output == OutputActivation::Softmax ? softmax(h) : h;
}

GruParams init_gru(std::size_t in, std::size_t hidden, Rng& rng) {
  auto w = [&](std::size_t cols) { return init_linear(cols, hidden, rng).weight; };
  GruParams p;
  p.w_z = w(in);
  p.w_r = w(in);
  p.w_c = w(in);
  p.u_z = w(hidden);
  p.u_r = w(hidden);
  p.u_c = w(hidden);
  p.b_z = Tensor::zeros({hidden}, true);
  p.b_r = Tensor::zeros({hidden}, true);
  p.b_c = Tensor::zeros({hidden}, true);
  return p;
}

Tensor gru_cell_step(const GruParams& p, const Tensor& h_prev, const Tensor& x) {
  const bool vector_form = h_prev.rank() == 1;
  Tensor h = vector_form ? reshape(h_prev, {1, h_prev.dim(0)}) : h_prev;
  Tensor in = x.rank() == 1 ? reshape(x, {1, x.dim(0)}) : x;
  if (h.rank() != 2 || h.dim(1) != p.hidden_size()) {
    throw ShapeError("gru: hidden state " + shape_str(h_prev.shape()) +
                     " does not match hidden size " + std::to_string(p.hidden_size()));
  }
  if (in.rank() != 2 || in.dim(1) != p.input_size() || in.dim(0) != h.dim(0)) {
    throw ShapeError("gru: input " + shape_str(x.shape()) + " does not match input size " +
                     std::to_string(p.input_size()) + " / batch " + std::to_string(h.dim(0)));
  }
  Tensor z = sigmoid(linear(in, p.w_z, p.b_z) + linear(h, p.u_z));
  Tensor r = sigmoid(linear(in, p.w_r, p.b_r) + linear(h, p.u_r));
  Tensor c = tanh(linear(in, p.w_c, p.b_c) + linear(r * h, p.u_c));
  Tensor out = h + z * (c - h);
  return vector_form ? reshape(out, {p.hidden_size()}) : out;
}

GruStack init_gru_stack(std::size_t in, std::size_t hidden, std::size_t layers, Rng& rng) {
  if (layers == 0) throw std::invalid_argument("gru stack needs at least one layer");
  GruStack stack;
  for (std::size_t l = 0; l < layers; ++l) {
    stack.layers.push_back(init_gru(l == 0 ? in : hidden, hidden, rng));
  }
  return stack;
}

std::vector<Tensor> gru_stack_forward(const GruStack& stack, std::span<const Tensor> xs,
                                      const Dropout& dropout) {
  if (xs.empty()) throw std::invalid_argument("gru stack: empty input sequence");
  if (stack.layers.empty()) throw std::invalid_argument("gru stack: no layers");
  const std::size_t batch = xs[0].rank() == 2 ? xs[0].dim(0) : 1;
  const bool vector_form = xs[0].rank() == 1;
  std::vector<Tensor> states;
  for (const auto& layer : stack.layers) {
    Shape hs = vector_form ? Shape{layer.hidden_size()} : Shape{batch, layer.hidden_size()};
    states.push_back(Tensor::zeros(hs));
  }
  std::vector<Tensor> top;
  top.reserve(xs.size());
  for (const auto& x : xs) {
    Tensor in = x;
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
      if (l > 0 && stack.dropout_between_layers) in = dropout.apply(in);
      states[l] = gru_cell_step(stack.layers[l], states[l], in);
      in = states[l];
    }
    top.push_back(in);
  }
  return top;
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  if (logits.rank() != 2) {
    throw ShapeError("cross_entropy: logits must be [batch, classes], got " +
                     shape_str(logits.shape()));
  }
  const std::size_t rows = logits.dim(0), classes = logits.dim(1);
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  std::vector<double> pick(rows * classes, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const int t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(t) +
                              " outside [0, " + std::to_string(classes) + ")");
    }
    pick[r * classes + static_cast<std::size_t>(t)] = -1.0 / static_cast<double>(rows);
  }
  return sum_all(log_softmax(logits) * Tensor({rows, classes}, std::move(pick)));
}

AdamState init_adam(std::span<const NamedTensor> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), 0.0);
    s.v.emplace_back(p.tensor.numel(), 0.0);
  }
  return s;
}

void adam_step(AdamState& state, std::span<const NamedTensor> params) {
  if (params.size() != state.m.size()) {
    throw std::invalid_argument("adam: parameter count changed between steps");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].tensor.numel() != state.m[k].size()) {
      throw ShapeError("adam: moment buffer does not match parameter " + params[k].name);
    }
    if (params[k].tensor.has_grad()) {
      for (double g : params[k].tensor.grad()) {
        if (!std::isfinite(g)) {
          throw NumericError("adam: non-finite gradient for " + params[k].name);
        }
      }
    }
  }
  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params[k].tensor;
    auto values = p.mutable_values();
    const bool has = p.has_grad();
    auto grad = has ? p.grad() : std::span<const double>{};
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has ? grad[i] : 0.0;
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      values[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void zero_grads(std::span<const NamedTensor> params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

void collect(std::vector<NamedTensor>& out, const std::string& prefix, const LinearParams& p) {
  out.push_back({prefix + ".weight", p.weight});
  out.push_back({prefix + ".bias", p.bias});
}

void collect(std::vector<NamedTensor>& out, const std::string& prefix, const MlpParams& p) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    collect(out, prefix + ".layer" + std::to_string(i), p.layers[i]);
  }
}

void collect(std::vector<NamedTensor>& out, const std::string& prefix, const GruParams& p) {
  out.push_back({prefix + ".w_z", p.w_z});
  out.push_back({prefix + ".w_r", p.w_r});
  out.push_back({prefix + ".w_c", p.w_c});
  out.push_back({prefix + ".u_z", p.u_z});
  out.push_back({prefix + ".u_r", p.u_r});
  out.push_back({prefix + ".u_c", p.u_c});
  out.push_back({prefix + ".b_z", p.b_z});
  out.push_back({prefix + ".b_r", p.b_r});
  out.push_back({prefix + ".b_c", p.b_c});
}

void collect(std::vector<NamedTensor>& out, const std::string& prefix, const GruStack& p) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    collect(out, prefix + ".gru" + std::to_string(i), p.layers[i]);
  }
}

}  // namespace poseattn::nn
