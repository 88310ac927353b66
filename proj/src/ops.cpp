#include "poseattn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace poseattn {

namespace {

using detail::DataPtr;
using detail::grad_buffer;
using detail::TensorData;

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) shape_fail(op, "undefined operand");
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Returns true when b broadcasts over a's leading axis, false when the shapes
// are equal; throws otherwise.
bool binary_broadcast(const char* op, const Tensor& a, const Tensor& b) {
  require_defined(op, a);
  require_defined(op, b);
  if (a.shape() == b.shape()) return false;
  if (a.rank() == b.rank() + 1 && std::equal(b.shape().begin(), b.shape().end(),
                                              a.shape().begin() + 1)) {
    return true;
  }
  shape_fail(op, "incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
}

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  // Blocks of 8 columns stay in registers across the whole p loop; each
  // output still accumulates its terms in p order.
  constexpr std::size_t kBlock = 8;
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    std::size_t j0 = 0;
    for (; j0 + kBlock <= n; j0 += kBlock) {
      double acc[kBlock];
      for (std::size_t j = 0; j < kBlock; ++j) acc[j] = crow[j0 + j];
      for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        if (av == 0.0) continue;
        const double* brow = b + p * n + j0;
        for (std::size_t j = 0; j < kBlock; ++j) acc[j] += av * brow[j];
      }
      for (std::size_t j = 0; j < kBlock; ++j) crow[j0 + j] = acc[j];
    }
    if (j0 < n) {
      for (std::size_t p = 0; p < k; ++p) {
        const double av = arow[p];
        if (av == 0.0) continue;
        const double* brow = b + p * n;
        for (std::size_t j = j0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

// C[m,k] += A[m,n] B[k,n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  // 2x4 output tiles with independent accumulators. Each dot product is
  // still summed in index order, so results match the plain loop bitwise.
  std::size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double* a0 = a + i * n;
    const double* a1 = a0 + n;
    std::size_t p = 0;
    for (; p + 4 <= k; p += 4) {
      const double* b0 = b + p * n;
      const double* b1 = b0 + n;
      const double* b2 = b1 + n;
      const double* b3 = b2 + n;
      double s00 = 0, s01 = 0, s02 = 0, s03 = 0, s10 = 0, s11 = 0, s12 = 0, s13 = 0;
      for (std::size_t j = 0; j < n; ++j) {
        const double x0 = a0[j], x1 = a1[j];
        s00 += x0 * b0[j];
        s01 += x0 * b1[j];
        s02 += x0 * b2[j];
        s03 += x0 * b3[j];
        s10 += x1 * b0[j];
        s11 += x1 * b1[j];
        s12 += x1 * b2[j];
        s13 += x1 * b3[j];
      }
      double* c0 = c + i * k + p;
      double* c1 = c0 + k;
      c0[0] += s00, c0[1] += s01, c0[2] += s02, c0[3] += s03;
      c1[0] += s10, c1[1] += s11, c1[2] += s12, c1[3] += s13;
    }
    for (; p < k; ++p) {
      const double* brow = b + p * n;
      double s0 = 0.0, s1 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s0 += a0[j] * brow[j];
        s1 += a1[j] * brow[j];
      }
      c[i * k + p] += s0;
      c[(i + 1) * k + p] += s1;
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T B[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(OpKind op, const Tensor& a, Fwd fwd, Deriv deriv) {
  require_defined(op_name(op), a);
  auto in = a.data();
  std::vector<double> out(in->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in->value[i]);
  return detail::record(op, a.shape(), std::move(out), {in},
                        [in, deriv](const TensorData& o) {
                          double* g = grad_buffer(*in);
                          if (!g) return;
                          for (std::size_t i = 0; i < o.grad.size(); ++i) {
                            g[i] += o.grad[i] * deriv(in->value[i], o.value[i]);
                          }
                        });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined("matmul", a);
  require_defined("matmul", b);
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  std::size_t batch = 1, m = 0, k = 0, n = 0;
  bool broadcast_b = false;
  if (sa.size() == 2 && sb.size() == 2) {
    m = sa[0], k = sa[1], n = sb[1];
    if (sb[0] != k) shape_fail("matmul", "inner dims differ: " + shape_str(sa) + " x " + shape_str(sb));
  } else if (sa.size() == 3 && sb.size() == 3) {
    batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
    if (sb[0] != batch || sb[1] != k) {
      shape_fail("matmul", "batched dims differ: " + shape_str(sa) + " x " + shape_str(sb));
    }
  } else if (sa.size() == 3 && sb.size() == 2) {
    batch = sa[0], m = sa[1], k = sa[2], n = sb[1];
    broadcast_b = true;
    if (sb[0] != k) shape_fail("matmul", "inner dims differ: " + shape_str(sa) + " x " + shape_str(sb));
  } else {
    shape_fail("matmul", "unsupported ranks " + shape_str(sa) + " x " + shape_str(sb));
  }
  auto da = a.data();
  auto db = b.data();
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    gemm_nn(da->value.data() + bi * m * k, db->value.data() + (broadcast_b ? 0 : bi * k * n),
            out.data() + bi * m * n, m, k, n);
  }
  Shape shape = batch == 1 && sa.size() == 2 ? Shape{m, n} : Shape{batch, m, n};
  return detail::record(
      OpKind::MatMul, std::move(shape), std::move(out), {da, db},
      [da, db, batch, m, k, n, broadcast_b](const TensorData& o) {
        double* ga = grad_buffer(*da);
        double* gb = grad_buffer(*db);
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const double* go = o.grad.data() + bi * m * n;
          const std::size_t b_off = broadcast_b ? 0 : bi * k * n;
          if (ga) gemm_nt(go, db->value.data() + b_off, ga + bi * m * k, m, n, k);
          if (gb) gemm_tn(da->value.data() + bi * m * k, go, gb + b_off, m, k, n);
        }
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_defined("linear", x);
  require_defined("linear", weight);
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
    shape_fail("linear", "input " + shape_str(x.shape()) + " does not match weight " +
                             shape_str(weight.shape()));
  }
  const std::size_t rows = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  const bool has_bias = bias.defined();
  if (has_bias && (bias.rank() != 1 || bias.dim(0) != out_dim)) {
    shape_fail("linear", "bias " + shape_str(bias.shape()) + " does not match weight " +
                             shape_str(weight.shape()));
  }
  auto dx = x.data();
  auto dw = weight.data();
  std::vector<double> out(rows * out_dim, 0.0);
  gemm_nt(dx->value.data(), dw->value.data(), out.data(), rows, in, out_dim);
  std::vector<DataPtr> inputs{dx, dw};
  DataPtr dbias;
  if (has_bias) {
    dbias = bias.data();
    inputs.push_back(dbias);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < out_dim; ++o) out[r * out_dim + o] += dbias->value[o];
    }
  }
  return detail::record(
      OpKind::Linear, {rows, out_dim}, std::move(out), std::move(inputs),
      [dx, dw, dbias, rows, in, out_dim](const TensorData& o) {
        double* gx = grad_buffer(*dx);
        double* gw = grad_buffer(*dw);
        double* gbias = dbias ? grad_buffer(*dbias) : nullptr;
        // dx = dy W ; dW = dy^T x
        if (gx) gemm_nn(o.grad.data(), dw->value.data(), gx, rows, out_dim, in);
        if (gw) gemm_tn(o.grad.data(), dx->value.data(), gw, rows, out_dim, in);
        if (gbias) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < out_dim; ++c) gbias[c] += o.grad[r * out_dim + c];
          }
        }
      });
}

namespace {

enum class BinaryKind { Add, Sub, Mul };

Tensor binary(BinaryKind kind, const Tensor& a, const Tensor& b) {
  const OpKind op = kind == BinaryKind::Add   ? OpKind::Add
                    : kind == BinaryKind::Sub ? OpKind::Sub
                                              : OpKind::Mul;
  const bool bc = binary_broadcast(op_name(op), a, b);
  auto da = a.data();
  auto db = b.data();
  const std::size_t n = da->value.size();
  const std::size_t bn = db->value.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = da->value[i];
    const double y = db->value[bc ? i % bn : i];
    out[i] = kind == BinaryKind::Add ? x + y : kind == BinaryKind::Sub ? x - y : x * y;
  }
  return detail::record(op, a.shape(), std::move(out), {da, db},
                        [da, db, bc, kind](const TensorData& o) {
                          double* ga = grad_buffer(*da);
                          double* gb = grad_buffer(*db);
                          const std::size_t bn = db->value.size();
                          for (std::size_t i = 0; i < o.grad.size(); ++i) {
                            const std::size_t j = bc ? i % bn : i;
                            const double g = o.grad[i];
                            switch (kind) {
                              case BinaryKind::Add:
                                if (ga) ga[i] += g;
                                if (gb) gb[j] += g;
                                break;
                              case BinaryKind::Sub:
                                if (ga) ga[i] += g;
                                if (gb) gb[j] -= g;
                                break;
                              case BinaryKind::Mul:
                                if (ga) ga[i] += g * db->value[j];
                                if (gb) gb[j] += g * da->value[i];
                                break;
                            }
                          }
                        });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(BinaryKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(BinaryKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(BinaryKind::Mul, a, b); }

Tensor scale(const Tensor& a, double factor) {
  require_defined("scale", a);
  auto da = a.data();
  std::vector<double> out(da->value.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da->value[i] * factor;
  return detail::record(OpKind::Scale, a.shape(), std::move(out), {da},
                        [da, factor](const TensorData& o) {
                          double* g = grad_buffer(*da);
                          if (!g) return;
                          for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * factor;
                        });
}

namespace {

Tensor reduce_axis(OpKind op, const Tensor& a, std::size_t axis) {
  require_defined(op_name(op), a);
  if (axis >= a.rank()) {
    shape_fail(op_name(op), "axis " + std::to_string(axis) + " out of range for " +
                                shape_str(a.shape()));
  }
  const auto s = split_at(a.shape(), axis);
  const double w = op == OpKind::Mean ? 1.0 / static_cast<double>(s.extent) : 1.0;
  auto da = a.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = da->value.data() + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  if (w != 1.0) {
    for (auto& v : out) v *= w;
  }
  Shape shape = a.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  return detail::record(op, std::move(shape), std::move(out), {da},
                        [da, s, w](const TensorData& o) {
                          double* g = grad_buffer(*da);
                          if (!g) return;
                          for (std::size_t oi = 0; oi < s.outer; ++oi) {
                            for (std::size_t e = 0; e < s.extent; ++e) {
                              double* dst = g + (oi * s.extent + e) * s.inner;
                              const double* src = o.grad.data() + oi * s.inner;
                              for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * w;
                            }
                          }
                        });
}

}  // namespace

Tensor sum(const Tensor& a, std::size_t axis) { return reduce_axis(OpKind::Sum, a, axis); }
Tensor mean(const Tensor& a, std::size_t axis) { return reduce_axis(OpKind::Mean, a, axis); }

Tensor sum_all(const Tensor& a) {
  require_defined("sum_all", a);
  auto da = a.data();
  double total = 0.0;
  for (double v : da->value) total += v;
  return detail::record(OpKind::SumAll, {}, {total}, {da}, [da](const TensorData& o) {
    double* g = grad_buffer(*da);
    if (!g) return;
    for (std::size_t i = 0; i < da->value.size(); ++i) g[i] += o.grad[0];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no operands");
  for (const auto& p : parts) require_defined("concat", p);
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) shape_fail("concat", "axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) shape_fail("concat", "mismatched operand " + shape_str(s) + " vs " + shape_str(first));
    out_shape[axis] += s[axis];
  }
  const auto so = split_at(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<DataPtr> inputs;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    auto d = p.data();
    const std::size_t chunk = p.shape()[axis] * so.inner;
    for (std::size_t o = 0; o < so.outer; ++o) {
      std::copy_n(d->value.data() + o * chunk, chunk,
                  out.data() + o * so.extent * so.inner + offset * so.inner);
    }
    inputs.push_back(d);
    offsets.push_back(offset);
    offset += p.shape()[axis];
  }
  return detail::record(OpKind::Concat, std::move(out_shape), std::move(out), inputs,
                        [inputs, offsets, so, axis](const TensorData& o) {
                          for (std::size_t k = 0; k < inputs.size(); ++k) {
                            double* g = grad_buffer(*inputs[k]);
                            if (!g) continue;
                            const std::size_t chunk = inputs[k]->shape[axis] * so.inner;
                            for (std::size_t oi = 0; oi < so.outer; ++oi) {
                              const double* src = o.grad.data() + oi * so.extent * so.inner +
                                                  offsets[k] * so.inner;
                              double* dst = g + oi * chunk;
                              for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require_defined("slice", a);
  if (axis >= a.rank() || begin >= end || end > a.dim(axis)) {
    shape_fail("slice", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") on axis " + std::to_string(axis) + " invalid for " +
                            shape_str(a.shape()));
  }
  const auto s = split_at(a.shape(), axis);
  const std::size_t len = end - begin;
  auto da = a.data();
  std::vector<double> out(s.outer * len * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(da->value.data() + (o * s.extent + begin) * s.inner, len * s.inner,
                out.data() + o * len * s.inner);
  }
  Shape shape = a.shape();
  shape[axis] = len;
  return detail::record(OpKind::Slice, std::move(shape), std::move(out), {da},
                        [da, s, begin, len](const TensorData& o) {
                          double* g = grad_buffer(*da);
                          if (!g) return;
                          for (std::size_t oi = 0; oi < s.outer; ++oi) {
                            double* dst = g + (oi * s.extent + begin) * s.inner;
                            const double* src = o.grad.data() + oi * len * s.inner;
                            for (std::size_t i = 0; i < len * s.inner; ++i) dst[i] += src[i];
                          }
                        });
}

Tensor stack(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) shape_fail("stack", "no operands");
  for (const auto& p : parts) require_defined("stack", p);
  const Shape& first = parts[0].shape();
  if (axis > first.size()) shape_fail("stack", "axis out of range for " + shape_str(first));
  for (const auto& p : parts) {
    if (p.shape() != first) {
      shape_fail("stack", "mismatched operand " + shape_str(p.shape()) + " vs " + shape_str(first));
    }
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis; i < first.size(); ++i) inner *= first[i];
  const std::size_t count = parts.size();
  Shape out_shape = first;
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), count);
  std::vector<double> out(outer * count * inner);
  std::vector<DataPtr> inputs;
  for (std::size_t k = 0; k < count; ++k) {
    auto d = parts[k].data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(d->value.data() + o * inner, inner, out.data() + (o * count + k) * inner);
    }
    inputs.push_back(d);
  }
  return detail::record(OpKind::Stack, std::move(out_shape), std::move(out), inputs,
                        [inputs, outer, inner](const TensorData& o) {
                          const std::size_t count = inputs.size();
                          for (std::size_t k = 0; k < count; ++k) {
                            double* g = grad_buffer(*inputs[k]);
                            if (!g) continue;
                            for (std::size_t oi = 0; oi < outer; ++oi) {
                              const double* src = o.grad.data() + (oi * count + k) * inner;
                              double* dst = g + oi * inner;
                              for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined("reshape", a);
  for (auto e : shape) {
    if (e == 0) shape_fail("reshape", "zero extent in " + shape_str(shape));
  }
  if (shape_numel(shape) != a.numel()) {
    shape_fail("reshape", "cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  auto da = a.data();
  return detail::record(OpKind::Reshape, std::move(shape), da->value, {da},
                        [da](const TensorData& o) {
                          double* g = grad_buffer(*da);
                          if (!g) return;
                          for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
                        });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      OpKind::Sigmoid, a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(
      OpKind::Tanh, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(
      OpKind::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor abs(const Tensor& a) {
  return unary(
      OpKind::Abs, a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor log(const Tensor& a) {
  return unary(
      OpKind::Log, a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

namespace {

Tensor softmax_impl(OpKind op, const Tensor& a) {
  require_defined(op_name(op), a);
  if (a.rank() == 0) shape_fail(op_name(op), "needs at least one axis");
  const std::size_t cols = a.shape().back();
  const std::size_t rows = a.numel() / cols;
  auto da = a.data();
  std::vector<double> out(da->value.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = da->value.data() + r * cols;
    double* y = out.data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      total += y[c];
    }
    if (op == OpKind::Softmax) {
      for (std::size_t c = 0; c < cols; ++c) y[c] /= total;
    } else {
      const double lse = mx + std::log(total);
      for (std::size_t c = 0; c < cols; ++c) y[c] = x[c] - lse;
    }
  }
  return detail::record(op, a.shape(), std::move(out), {da},
                        [da, rows, cols, op](const TensorData& o) {
                          double* g = grad_buffer(*da);
                          if (!g) return;
                          for (std::size_t r = 0; r < rows; ++r) {
                            const double* y = o.value.data() + r * cols;
                            const double* gy = o.grad.data() + r * cols;
                            double* gx = g + r * cols;
                            if (op == OpKind::Softmax) {
                              double dot = 0.0;
                              for (std::size_t c = 0; c < cols; ++c) dot += gy[c] * y[c];
                              for (std::size_t c = 0; c < cols; ++c) gx[c] += y[c] * (gy[c] - dot);
                            } else {
                              double total = 0.0;
                              for (std::size_t c = 0; c < cols; ++c) total += gy[c];
                              for (std::size_t c = 0; c < cols; ++c) {
                                gx[c] += gy[c] - std::exp(y[c]) * total;
                              }
                            }
                          }
                        });
}

}  // namespace

Tensor softmax(const Tensor& a) { return softmax_impl(OpKind::Softmax, a); }
Tensor log_softmax(const Tensor& a) { return softmax_impl(OpKind::LogSoftmax, a); }

Tensor mask_multiply(const Tensor& a, std::vector<double> mask) {
  require_defined("mask_multiply", a);
  if (mask.size() != a.numel()) {
    shape_fail("mask_multiply", "mask of " + std::to_string(mask.size()) +
                                    " entries for tensor " + shape_str(a.shape()));
  }
  auto da = a.data();
  std::vector<double> out(mask.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da->value[i] * mask[i];
  return detail::record(OpKind::MaskMultiply, a.shape(), std::move(out), {da},
                        [da, mask = std::move(mask)](const TensorData& o) {
                          double* g = grad_buffer(*da);
                          if (!g) return;
                          for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * mask[i];
                        });
}

}  // namespace poseattn
