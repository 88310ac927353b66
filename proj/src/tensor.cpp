#include "poseattn/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <utility>

#include "poseattn/binary_io.hpp"

namespace poseattn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::MatMul: return "matmul";
    case OpKind::Linear: return "linear";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::SumAll: return "sum_all";
    case OpKind::Concat: return "concat";
    case OpKind::Slice: return "slice";
    case OpKind::Stack: return "stack";
    case OpKind::Reshape: return "reshape";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Relu: return "relu";
    case OpKind::Abs: return "abs";
    case OpKind::Softmax: return "softmax";
    case OpKind::LogSoftmax: return "log_softmax";
    case OpKind::Log: return "log";
    case OpKind::MaskMultiply: return "mask_multiply";
    case OpKind::Custom: return "custom";
  }
  return "unknown";
}

namespace {

void check_extents(const Shape& shape) {
  for (auto extent : shape) {
    if (extent == 0) {
      throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
    }
  }
}

void check_finite(const std::vector<double>& values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + what);
    }
  }
}

thread_local Graph* g_active_graph = nullptr;
std::atomic<std::uint64_t> g_next_graph_id{1};

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_extents(shape);
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  check_finite(values, "tensor construction");
  data_ = std::make_shared<detail::TensorData>();
  data_->shape = std::move(shape);
  data_->value = std::move(values);
  data_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::wrap(detail::DataPtr data) {
  Tensor t;
  t.data_ = std::move(data);
  return t;
}

const Shape& Tensor::shape() const {
  if (!data_) throw GraphError("use of an undefined tensor");
  return data_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const double> Tensor::values() const {
  shape();
  return data_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!is_leaf()) throw GraphError("recorded tensors are read-only");
  return data_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() requires a single-element tensor, got " + shape_str(shape()));
  }
  return data_->value[0];
}

bool Tensor::requires_grad() const { return data_ && data_->requires_grad; }
bool Tensor::is_leaf() const { return data_ && data_->graph_id == 0; }
bool Tensor::has_grad() const { return data_ && !data_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw GraphError("tensor has no gradient");
  return data_->grad;
}

void Tensor::zero_grad() {
  if (data_) data_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(shape(), data_->value, false); }

Graph::Graph() : id_(g_next_graph_id.fetch_add(1)) {}

Graph::Scope::Scope(Graph& graph) : previous_(g_active_graph) { g_active_graph = &graph; }
Graph::Scope::~Scope() { g_active_graph = previous_; }

Graph* Graph::active() { return g_active_graph; }

std::vector<OpKind> Graph::ops() const {
  std::vector<OpKind> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) out.push_back(n.op);
  return out;
}

void Graph::record(OpKind op, std::vector<detail::DataPtr> inputs, detail::DataPtr output,
                   Adjoint adjoint) {
  if (consumed_) throw GraphError("cannot record on a graph that was already consumed");
  output->requires_grad = true;
  output->graph_id = id_;
  nodes_.push_back(Node{op, std::move(inputs), std::move(output), std::move(adjoint)});
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined()) throw GraphError("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (consumed_) {
    throw GraphError("backward already ran on this graph; record a new forward pass");
  }
  auto& root = *loss.data();
  if (root.graph_id != id_) {
    throw GraphError("loss is detached from the active graph");
  }
  root.grad.assign(1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->adjoint(*it->output);
  }
  consumed_ = true;
  nodes_.clear();
}

void backward(const Tensor& loss) {
  auto* graph = Graph::active();
  if (!graph) throw GraphError("backward called with no active graph");
  graph->backward(loss);
}

namespace detail {

double* grad_buffer(TensorData& t) {
  if (!t.requires_grad) return nullptr;
  if (t.grad.empty()) t.grad.assign(t.value.size(), 0.0);
  return t.grad.data();
}

Tensor record(OpKind op, Shape shape, std::vector<double> values, std::vector<DataPtr> inputs,
              Graph::Adjoint adjoint) {
  check_finite(values, op_name(op));
  auto out = std::make_shared<TensorData>();
  out->shape = std::move(shape);
  out->value = std::move(values);
  auto* graph = Graph::active();
  if (graph) {
    bool any = false;
    for (const auto& in : inputs) any = any || in->requires_grad;
    if (any) graph->record(op, std::move(inputs), out, std::move(adjoint));
  }
  return Tensor::wrap(std::move(out));
}

}  // namespace detail

void write_tensor(std::ostream& out, const Tensor& t) {
  io::write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto extent : t.shape()) io::write_u64(out, extent);
  for (double v : t.values()) io::write_f64(out, v);
}

Tensor read_tensor(std::istream& in) {
  auto rank = io::read_u32(in);
  if (rank > 16) throw ShapeError("implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& extent : shape) extent = io::read_u64(in);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = io::read_f64(in);
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace poseattn
