#include <doctest.h>

#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <thread>
#include <vector>

#include "poseattn/gradcheck.hpp"
#include "poseattn/nn.hpp"
#include "poseattn/ops.hpp"
#include "poseattn/random.hpp"

using namespace poseattn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Scalar probe: sum(f(x) * w) for fixed random weights w.
Tensor weighted_sum(const Tensor& y, const Tensor& w) { return sum_all(mul(y, w)); }

}  // namespace

TEST_CASE("softmax examples") {
  auto p = softmax(Tensor({2}, {0.0, 0.0}));
  CHECK(p.at(0) == 0.5);
  CHECK(p.at(1) == 0.5);

  auto q = softmax(Tensor({2}, {1000.0, 0.0}));
  CHECK(std::abs(q.at(0) - 1.0) < 1e-12);
  CHECK(std::abs(q.at(1)) < 1e-12);
}

TEST_CASE("softmax rows are on the simplex for arbitrary finite input") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double spread = std::pow(10.0, rng.uniform(-2.0, 3.0));
    auto p = softmax(random_tensor({5, 7}, rng, -spread, spread));
    for (std::size_t r = 0; r < 5; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        CHECK(p.at(r * 7 + c) >= 0.0);
        s += p.at(r * 7 + c);
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("matmul with a one-hot vector selects a column") {
  Rng rng(1);
  const std::size_t d = 2048;
  auto v = random_tensor({d, 4}, rng);
  auto y = matmul(v, Tensor({4, 1}, {1.0, 0.0, 0.0, 0.0}));
  REQUIRE(y.shape() == Shape{d, 1});
  for (std::size_t i = 0; i < d; ++i) CHECK(y.at(i) == v.at(i * 4));
}

TEST_CASE("matmul matches a naive triple loop") {
  Rng rng(2);
  for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {3, 5, 2}, {7, 9, 13}, {16, 3, 17}}) {
    auto a = random_tensor({m, k}, rng);
    auto b = random_tensor({k, n}, rng);
    auto c = matmul(a, b);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0.0;
        for (std::size_t p = 0; p < k; ++p) ref += a.at(i * k + p) * b.at(p * n + j);
        CHECK(c.at(i * n + j) == doctest::Approx(ref).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("backward of sum(x*x) at 3 is 6") {
  Tensor x({1}, {3.0}, true);
  Graph g;
  Graph::Scope scope(g);
  auto loss = sum_all(mul(x, x));
  g.backward(loss);
  CHECK(x.grad()[0] == 6.0);
}

TEST_CASE("cross-entropy gradient rows sum to zero") {
  Rng rng(4);
  Tensor logits = random_tensor({6, 5}, rng, -3.0, 3.0, true);
  std::vector<int> targets;
  for (std::size_t r = 0; r < 6; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 5; ++c) {
      if (logits.at(r * 5 + c) > logits.at(r * 5 + best)) best = c;
    }
    targets.push_back(static_cast<int>(best));
  }
  Graph g;
  Graph::Scope scope(g);
  g.backward(nn::cross_entropy(logits, targets));
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += logits.grad()[r * 5 + c];
    CHECK(std::abs(s) < 1e-15);
  }
}

TEST_CASE("concat then slice at the same boundaries is the identity") {
  Rng rng(5);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    Shape sa = {2, 3, 4}, sb = {2, 3, 4};
    sb[axis] = 5;
    auto a = random_tensor(sa, rng);
    auto b = random_tensor(sb, rng);
    const Tensor parts[] = {a, b};
    auto c = concat(parts, axis);
    auto a2 = slice(c, axis, 0, sa[axis]);
    auto b2 = slice(c, axis, sa[axis], sa[axis] + sb[axis]);
    CHECK(a2.shape() == a.shape());
    CHECK(b2.shape() == b.shape());
    CHECK(std::vector<double>(a2.values().begin(), a2.values().end()) ==
          std::vector<double>(a.values().begin(), a.values().end()));
    CHECK(std::vector<double>(b2.values().begin(), b2.values().end()) ==
          std::vector<double>(b.values().begin(), b.values().end()));
  }
}

TEST_CASE("backward twice on the same graph is an error") {
  Tensor x({2}, {1.0, 2.0}, true);
  Graph g;
  Graph::Scope scope(g);
  auto loss = sum_all(mul(x, x));
  g.backward(loss);
  CHECK(g.consumed());
  CHECK_THROWS_AS(g.backward(loss), GraphError);
}

TEST_CASE("backward rejects non-scalar and detached losses") {
  Tensor x({2}, {1.0, 2.0}, true);
  Graph g;
  Graph::Scope scope(g);
  auto y = mul(x, x);
  CHECK_THROWS_AS(g.backward(y), ShapeError);
  Graph other;
  CHECK_THROWS_AS(other.backward(sum_all(y)), GraphError);
}

TEST_CASE("each node is visited once in the backward sweep") {
  Tensor x({1}, {2.0}, true);
  Graph g;
  Graph::Scope scope(g);
  // y = x + x + ... (8 times) through a chain reusing the same input.
  Tensor y = x;
  for (int i = 0; i < 7; ++i) y = add(y, x);
  auto loss = sum_all(y);
  CHECK(g.size() == 8);
  g.backward(loss);
  CHECK(x.grad()[0] == 8.0);
}

TEST_CASE("shape errors name the op and the shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4, 5});
  try {
    matmul(a, b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 5]") != std::string::npos);
  }
  // Broadcasting is limited to the leading batch axis.
  CHECK_NOTHROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3})));
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
}

TEST_CASE("non-finite outputs raise a numeric error") {
  CHECK_THROWS_AS(log(Tensor({1}, {0.0})), NumericError);
  CHECK_THROWS_AS(scale(Tensor({1}, {1e300}), 1e300), NumericError);
  CHECK_THROWS_AS(Tensor({1}, {std::nan("")}), NumericError);
}

TEST_CASE("primitive adjoints match central differences at random points") {
  Rng rng(11);
  using Fn = std::function<Tensor(const Tensor&, Rng&)>;
  struct Case {
    const char* name;
    Shape shape;
    double lo, hi;
    Fn f;
  };
  const std::vector<Case> cases = {
      {"matmul", {3, 4}, -1, 1, [](const Tensor& x, Rng& r) { return matmul(x, random_tensor({4, 2}, r)); }},
      {"matmul-rhs", {4, 2}, -1, 1, [](const Tensor& x, Rng& r) { return matmul(random_tensor({3, 4}, r), x); }},
      {"batched-matmul", {2, 3, 4}, -1, 1,
       [](const Tensor& x, Rng& r) { return matmul(x, random_tensor({2, 4, 2}, r)); }},
      {"linear", {3, 4}, -1, 1,
       [](const Tensor& x, Rng& r) { return linear(x, random_tensor({5, 4}, r), random_tensor({5}, r)); }},
      {"add-broadcast", {3}, -1, 1, [](const Tensor& x, Rng& r) { return add(random_tensor({2, 3}, r), x); }},
      {"sub", {2, 3}, -1, 1, [](const Tensor& x, Rng& r) { return sub(random_tensor({2, 3}, r), x); }},
      {"mul", {2, 3}, -1, 1, [](const Tensor& x, Rng& r) { return mul(x, random_tensor({2, 3}, r)); }},
      {"scale", {4}, -1, 1, [](const Tensor& x, Rng&) { return scale(x, -2.5); }},
      {"sum-axis", {2, 3, 4}, -1, 1, [](const Tensor& x, Rng&) { return sum(x, 1); }},
      {"mean-axis", {2, 3, 4}, -1, 1, [](const Tensor& x, Rng&) { return mean(x, 2); }},
      {"concat", {2, 3}, -1, 1,
       [](const Tensor& x, Rng& r) {
         const Tensor parts[] = {x, random_tensor({2, 2}, r), x};
         return concat(parts, 1);
       }},
      {"slice", {4, 5}, -1, 1, [](const Tensor& x, Rng&) { return slice(x, 1, 1, 4); }},
      {"stack", {2, 3}, -1, 1,
       [](const Tensor& x, Rng&) {
         const Tensor parts[] = {x, scale(x, 2.0)};
         return stack(parts, 1);
       }},
      {"reshape", {2, 6}, -1, 1, [](const Tensor& x, Rng&) { return reshape(x, {3, 4}); }},
      {"sigmoid", {5}, -3, 3, [](const Tensor& x, Rng&) { return sigmoid(x); }},
      {"tanh", {5}, -3, 3, [](const Tensor& x, Rng&) { return tanh(x); }},
      // Kept away from the kinks so the central difference is valid.
      {"relu", {5}, 0.1, 2, [](const Tensor& x, Rng&) { return relu(sub(x, Tensor::full({5}, 1.05))); }},
      {"abs", {5}, 0.1, 2, [](const Tensor& x, Rng&) { return abs(sub(x, Tensor::full({5}, 1.05))); }},
      {"softmax", {3, 4}, -2, 2, [](const Tensor& x, Rng&) { return softmax(x); }},
      {"log-softmax", {3, 4}, -2, 2, [](const Tensor& x, Rng&) { return log_softmax(x); }},
      {"log", {4}, 0.2, 3, [](const Tensor& x, Rng&) { return log(x); }},
      {"mask-multiply", {6}, -1, 1,
       [](const Tensor& x, Rng&) { return mask_multiply(x, {2.0, 0.0, 2.0, 2.0, 0.0, 2.0}); }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    double worst = 0.0;
    for (int point = 0; point < 100; ++point) {
      const std::uint64_t seed = rng.next_u64();
      auto x = random_tensor(c.shape, rng, c.lo, c.hi);
      auto f = [&](const Tensor& xi) {
        Rng local(seed);
        Tensor y = c.f(xi, local);
        return weighted_sum(y, random_tensor(y.shape(), local));
      };
      worst = std::max(worst, grad_check(f, x, 1e-5, 1e-5).max_rel_error);
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("grad_check on x^2 at 3") {
  auto report = grad_check([](const Tensor& x) { return sum_all(mul(x, x)); },
                           Tensor({1}, {3.0}), 1e-5, 1e-5);
  CHECK(report.passed);
  REQUIRE(report.entries.size() == 1);
  CHECK(report.entries[0].analytic == 6.0);
  CHECK(std::abs(report.entries[0].numeric - 6.0) < 1e-6);
}

TEST_CASE("grad_check rejects non-scalar functions and bad eps") {
  CHECK_THROWS(grad_check([](const Tensor& x) { return mul(x, x); }, Tensor({2}, {1.0, 2.0})));
  CHECK_THROWS(grad_check([](const Tensor& x) { return sum_all(x); }, Tensor({1}, {1.0}), 1.0));
}

TEST_CASE("gradient_rel_error uses max(1, |a|, |n|)") {
  CHECK(gradient_rel_error(0.5, 0.25) == 0.25);
  CHECK(gradient_rel_error(100.0, 99.0) == doctest::Approx(0.01));
}

TEST_CASE("tensor serialization round-trips bitwise") {
  Rng rng(8);
  auto t = random_tensor({3, 1, 5}, rng, -1e10, 1e10);
  std::stringstream ss;
  write_tensor(ss, t);
  auto u = read_tensor(ss);
  CHECK(u.shape() == t.shape());
  CHECK(std::vector<double>(u.values().begin(), u.values().end()) ==
        std::vector<double>(t.values().begin(), t.values().end()));
}

TEST_CASE("independent graphs on separate threads do not interfere") {
  std::vector<double> results(4, 0.0);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([i, &results] {
      Tensor x({1}, {static_cast<double>(i + 1)}, true);
      Graph g;
      Graph::Scope scope(g);
      for (int k = 0; k < 200; ++k) {
        Graph inner;
        Graph::Scope s(inner);
        inner.backward(sum_all(mul(x, x)));
      }
      g.backward(sum_all(mul(x, x)));
      results[static_cast<std::size_t>(i)] = x.grad()[0];
    });
  }
  for (auto& t : threads) t.join();
  // Gradients accumulate: 200 inner sweeps plus the outer one.
  for (int i = 0; i < 4; ++i) CHECK(results[static_cast<std::size_t>(i)] == 201.0 * 2.0 * (i + 1));
}
