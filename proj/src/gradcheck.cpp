#include "poseattn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace poseattn {

const GradCheckEntry* GradCheckReport::worst() const {
  if (entries.empty()) return nullptr;
  return &*std::max_element(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.max_rel_error < b.max_rel_error;
  });
}

double gradient_rel_error(double analytic, double numeric) {
  const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) / denom;
}

namespace {

double eval_scalar(const std::function<Tensor()>& loss) {
  Tensor y = loss();
  if (y.numel() != 1) {
    throw ShapeError("gradient check needs a scalar function, got shape " + shape_str(y.shape()));
  }
  return y.item();
}

}  // namespace

GradCheckReport grad_check_params(const std::function<Tensor()>& loss,
                                  std::span<const NamedTensor> params, double eps, double tol) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw std::invalid_argument("gradient check eps must lie in [1e-7, 1e-3]");
  }
  std::vector<Tensor> handles;
  for (const auto& p : params) {
    if (!p.tensor.is_leaf() || !p.tensor.requires_grad()) {
      throw GraphError("gradient check parameter '" + p.name + "' is not a trainable leaf");
    }
    handles.push_back(p.tensor);
    handles.back().zero_grad();
  }

  {
    Graph graph;
    Graph::Scope scope(graph);
    Tensor y = loss();
    if (y.numel() != 1) {
      throw ShapeError("gradient check needs a scalar function, got shape " +
                       shape_str(y.shape()));
    }
    graph.backward(y);
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < handles.size(); ++k) {
    Tensor& t = handles[k];
    std::vector<double> analytic =
        t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                     : std::vector<double>(t.numel(), 0.0);
    GradCheckEntry entry;
    entry.name = params[k].name;
    auto values = t.mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = eval_scalar(loss);
      values[i] = saved - eps;
      const double down = eval_scalar(loss);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = gradient_rel_error(analytic[i], numeric);
      if (i == 0 || err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic = analytic[i];
        entry.numeric = numeric;
      }
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
    t.zero_grad();
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double eps, double tol) {
  Tensor leaf(x.shape(), std::vector<double>(x.values().begin(), x.values().end()), true);
  std::vector<NamedTensor> params{{"x", leaf}};
  return grad_check_params([&] { return f(leaf); }, params, eps, tol);
}

}  // namespace poseattn
