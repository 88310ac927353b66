#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace poseattn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised whenever a NaN or infinity is produced or consumed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class OpKind : std::uint8_t {
  MatMul,
  Linear,
  Add,
  Sub,
  Mul,
  Scale,
  Sum,
  Mean,
  SumAll,
  Concat,
  Slice,
  Stack,
  Reshape,
  Sigmoid,
  Tanh,
  Relu,
  Abs,
  Softmax,
  LogSoftmax,
  Log,
  MaskMultiply,
  Custom,
};

const char* op_name(OpKind op);

namespace detail {

struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  // 0 for leaves; otherwise the id of the graph that recorded this tensor.
  std::uint64_t graph_id = 0;
};

using DataPtr = std::shared_ptr<TensorData>;

}  // namespace detail

/// Dense row-major f64 tensor. Values are immutable once created, apart from
/// leaf parameters that an optimizer updates through mutable_values().
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(data_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Only valid on leaves; recorded outputs are read-only.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Copy of the values with no gradient tracking.
  Tensor detach() const;

  const detail::DataPtr& data() const { return data_; }
  static Tensor wrap(detail::DataPtr data);

 private:
  detail::DataPtr data_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Append-only tape of primitive applications. A graph is activated on the
/// current thread with Graph::Scope; primitives applied while no graph is
/// active run forward only.
class Graph {
 public:
  // Receives the output tensor; its grad field holds the incoming adjoint.
  using Adjoint = std::function<void(const detail::TensorData& output)>;

  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  class Scope {
   public:
    explicit Scope(Graph& graph);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Graph* previous_;
  };

  static Graph* active();

  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  std::uint64_t id() const { return id_; }
  // Op kinds in recording order.
  std::vector<OpKind> ops() const;

  void record(OpKind op, std::vector<detail::DataPtr> inputs,
              detail::DataPtr output, Adjoint adjoint);

 private:
  struct Node {
    OpKind op;
    std::vector<detail::DataPtr> inputs;
    detail::DataPtr output;
    Adjoint adjoint;
  };

  std::uint64_t id_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Backward sweep on the graph active on this thread.
void backward(const Tensor& loss);

namespace detail {

// Gradient buffer of `t`, zero-filled on first use; nullptr when `t` does not
// take gradients.
double* grad_buffer(TensorData& t);

/// Creates the output of a primitive. Checks the values for NaN/Inf, and
/// records a node on the active graph when any input requires gradients.
/// Exposed so that callers can define additional primitives.
Tensor record(OpKind op, Shape shape, std::vector<double> values,
              std::vector<DataPtr> inputs, Graph::Adjoint adjoint);

}  // namespace detail

// Little-endian tensor blob: u32 rank, u64 extents, f64 payload.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

}  // namespace poseattn
