#pragma once

#include <span>
#include <vector>

#include "poseattn/tensor.hpp"

// Differentiable primitives. Elementwise binary ops accept either equal
// shapes or a right operand whose shape equals the left shape with the
// leading (batch) axis dropped.
namespace poseattn {

// [m,k]x[k,n], [B,m,k]x[B,k,n], or [B,m,k]x[k,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// x [N,in], weight [out,in], optional bias [out] -> x weight^T + bias.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);
Tensor sum_all(const Tensor& a);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor stack(std::span<const Tensor> parts, std::size_t axis);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor log(const Tensor& a);
// Over the last axis, max-subtracted.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

// a * mask with a constant mask of the same shape (dropout).
Tensor mask_multiply(const Tensor& a, std::vector<double> mask);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace poseattn
