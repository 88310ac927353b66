#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "poseattn/tensor.hpp"

namespace poseattn {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = true;
  std::vector<GradCheckEntry> entries;  // one per checked tensor

  const GradCheckEntry* worst() const;
};

// |a - n| / max(1, |a|, |n|)
double gradient_rel_error(double analytic, double numeric);

/// Compares reverse-mode gradients of a scalar loss against central
/// differences (f(x+eps e_i) - f(x-eps e_i)) / 2eps for every coordinate of
/// every listed tensor. The listed tensors must be leaves; they are perturbed
/// in place and restored. `loss` must be deterministic.
GradCheckReport grad_check_params(const std::function<Tensor()>& loss,
                                  std::span<const NamedTensor> params, double eps = 1e-5,
                                  double tol = 1e-5);

// Single-input form: f(x) must be scalar.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double eps = 1e-5, double tol = 1e-5);

}  // namespace poseattn
