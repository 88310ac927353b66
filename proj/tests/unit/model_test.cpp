#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "poseattn/model.hpp"
#include "poseattn/ops.hpp"

using namespace poseattn;
using model::Conditioning;
using model::Pooling;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

model::RgbStreamConfig tiny_config(Conditioning cond, Pooling pool) {
  model::RgbStreamConfig c;
  c.window = 5;
  c.hand_input_dim = c.feature_dim = 6;
  c.aug_pose_dim = 9;
  c.hidden = 7;
  c.spatial_hidden = 8;
  c.temporal_hidden = 4;
  c.classes = 3;
  c.conditioning = cond;
  c.pooling = pool;
  return c;
}

model::RgbBatch random_batch(const model::RgbStreamConfig& c, std::size_t b, Rng& rng) {
  model::RgbBatch batch;
  for (std::size_t t = 0; t < c.window; ++t) {
    batch.hands.push_back(random_tensor({b, 4, c.hand_input_dim}, rng));
    batch.present.push_back(Tensor::full({b, 4}, 1.0));
    batch.aug_pose.push_back(random_tensor({b, c.aug_pose_dim}, rng));
  }
  batch.motion = random_tensor({b, 2 * c.window}, rng, 0.0, 2.0);
  return batch;
}

void randomize(const std::vector<NamedTensor>& params, Rng& rng, double scale = 0.5) {
  for (auto p : params) {
    for (auto& v : p.tensor.mutable_values()) v = scale * rng.normal();
  }
}

// Copies every parameter of `from` whose name and shape also exist in `to`.
void copy_shared(const std::vector<NamedTensor>& from, const std::vector<NamedTensor>& to) {
  std::map<std::string, Tensor> by_name;
  for (const auto& p : from) by_name[p.name] = p.tensor;
  for (auto p : to) {
    auto it = by_name.find(p.name);
    if (it == by_name.end() || it->second.shape() != p.tensor.shape()) continue;
    auto dst = p.tensor.mutable_values();
    auto src = it->second.values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

const Conditioning kAttending[] = {Conditioning::HiddenState, Conditioning::AugmentedPose,
                                   Conditioning::Both};

}  // namespace

TEST_CASE("published sizes produce the expected output shapes") {
  Rng rng(1);
  model::RgbStreamConfig c;  // defaults: T=20, D=2048, hidden 1024, C=60
  model::RgbStream stream(c, rng);
  auto out = stream.forward(random_batch(c, 1, rng));
  CHECK(out.logits.shape() == Shape{1, 60});
  CHECK(out.spatial_attention.shape() == Shape{1, 20, 4});
  CHECK(out.temporal_attention.shape() == Shape{1, 20});
  CHECK(out.hidden_states.shape() == Shape{1, 20, 1024});

  model::PoseStreamConfig pc;
  model::PoseStream pose(pc, rng);
  model::PoseBatch pb;
  for (int t = 0; t < 20; ++t) pb.poses.push_back(random_tensor({1, 150}, rng));
  auto po = pose.forward(pb);
  CHECK(po.step_logits.shape() == Shape{1, 20, 60});
  CHECK(po.logits.shape() == Shape{1, 60});
}

TEST_CASE("attention starts equal for every hand and every step") {
  Rng rng(2);
  for (auto cond : kAttending) {
    auto c = tiny_config(cond, Pooling::Attention);
    c.window = 20;
    model::RgbStream stream(c, rng);
    auto out = stream.forward(random_batch(c, 3, rng));
    for (double p : out.spatial_attention.values()) CHECK(p == 0.25);
    for (double p : out.temporal_attention.values()) CHECK(p == 0.05);
  }
}

TEST_CASE("pose-conditioned attention ignores hand features and the hidden state") {
  Rng rng(3);
  auto c = tiny_config(Conditioning::AugmentedPose, Pooling::Attention);
  model::RgbStream stream(c, rng);
  randomize(stream.parameters(), rng);
  auto batch = random_batch(c, 4, rng);
  auto base = stream.forward(batch);

  // New hand features change every hidden state but no attention weight.
  auto perturbed = batch;
  for (auto& h : perturbed.hands) h = random_tensor(h.shape(), rng, -5.0, 5.0);
  auto out = stream.forward(perturbed);
  CHECK(to_vec(out.spatial_attention) == to_vec(base.spatial_attention));
  CHECK(to_vec(out.hidden_states) != to_vec(base.hidden_states));

  // Direct check against an arbitrary previous state.
  nn::MlpParams f_p = nn::init_mlp(std::vector<std::size_t>{9, 8, 4}, rng);
  auto pose = random_tensor({2, 9}, rng);
  auto a = model::spatial_attention(f_p, Conditioning::AugmentedPose, pose, random_tensor({2, 7}, rng));
  auto b = model::spatial_attention(f_p, Conditioning::AugmentedPose, pose, random_tensor({2, 7}, rng));
  CHECK(to_vec(a) == to_vec(b));
}

TEST_CASE("hidden-conditioned attention does react to the hand features") {
  Rng rng(4);
  auto c = tiny_config(Conditioning::HiddenState, Pooling::PerStep);
  model::RgbStream stream(c, rng);
  randomize(stream.parameters(), rng);
  auto batch = random_batch(c, 2, rng);
  auto base = stream.forward(batch);
  auto perturbed = batch;
  for (auto& h : perturbed.hands) h = random_tensor(h.shape(), rng);
  CHECK(to_vec(stream.forward(perturbed).spatial_attention) != to_vec(base.spatial_attention));
}

TEST_CASE("attention weights stay on the simplex for trained-like parameters") {
  Rng rng(5);
  for (auto cond : kAttending) {
    auto c = tiny_config(cond, Pooling::Attention);
    model::RgbStream stream(c, rng);
    randomize(stream.parameters(), rng, 2.0);
    auto out = stream.forward(random_batch(c, 8, rng));
    auto sa = out.spatial_attention.values();
    for (std::size_t r = 0; r < sa.size() / 4; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(sa[r * 4 + k] >= 0.0);
        CHECK(sa[r * 4 + k] <= 1.0);
        s += sa[r * 4 + k];
      }
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
    auto ta = out.temporal_attention.values();
    for (std::size_t r = 0; r < 8; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < c.window; ++k) s += ta[r * c.window + k];
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("context vectors") {
  Rng rng(6);
  auto hands = random_tensor({1, 4, 5}, rng);
  auto one_hot = model::context_vector(hands, Tensor({1, 4}, {1.0, 0.0, 0.0, 0.0}));
  for (std::size_t i = 0; i < 5; ++i) CHECK(one_hot.at(i) == hands.at(i));

  auto uniform = model::context_vector(hands, Tensor::full({1, 4}, 0.25));
  auto summed = model::baseline_context(Conditioning::SumBaseline, hands);
  auto concat = model::baseline_context(Conditioning::ConcatBaseline, hands);
  CHECK(concat.shape() == Shape{1, 20});
  CHECK(to_vec(concat) == to_vec(hands));
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) s += hands.at(k * 5 + i);
    CHECK(summed.at(i) == doctest::Approx(s).epsilon(1e-14));
    CHECK(uniform.at(i) == doctest::Approx(s / 4.0).epsilon(1e-14));
  }

  // An absent hand carries the zero vector and contributes nothing.
  std::vector<double> v(20);
  for (std::size_t i = 0; i < 20; ++i) v[i] = i / 5 == 2 ? 0.0 : hands.at(i);
  Tensor with_absent({1, 4, 5}, v);
  auto p = Tensor({1, 4}, {0.1, 0.2, 0.6, 0.1});
  auto ctx = model::context_vector(with_absent, p);
  for (std::size_t i = 0; i < 5; ++i) {
    const double ref = 0.1 * v[i] + 0.2 * v[5 + i] + 0.1 * v[15 + i];
    CHECK(ctx.at(i) == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("one-hot temporal attention selects a hidden state") {
  Rng rng(7);
  const std::size_t T = 6, H = 3;
  auto f_tp = nn::init_mlp(std::vector<std::size_t>{2 * T, 4, T}, rng, true);
  auto bias = f_tp.layers.back().bias.mutable_values();
  bias[4] = 1000.0;
  auto states = random_tensor({2, T, H}, rng);
  auto [pooled, weights] = model::temporal_attention_pool(f_tp, states, random_tensor({2, 2 * T}, rng));
  for (std::size_t b = 0; b < 2; ++b) {
    CHECK(weights.at(b * T + 4) == 1.0);
    for (std::size_t h = 0; h < H; ++h) {
      CHECK(pooled.at(b * H + h) == doctest::Approx(states.at((b * T + 4) * H + h)).epsilon(1e-12));
    }
  }
}

TEST_CASE("identical hands make the attention variants agree") {
  Rng rng(8);
  auto ref_cfg = tiny_config(Conditioning::HiddenState, Pooling::Attention);
  model::RgbStream reference(ref_cfg, rng);
  randomize(reference.parameters(), rng);
  auto batch = random_batch(ref_cfg, 3, rng);
  for (auto& h : batch.hands) {
    std::vector<double> v(h.values().begin(), h.values().end());
    const std::size_t d = ref_cfg.feature_dim;
    for (std::size_t b = 0; b < 3; ++b) {
      for (std::size_t k = 1; k < 4; ++k) {
        for (std::size_t i = 0; i < d; ++i) v[(b * 4 + k) * d + i] = v[(b * 4) * d + i];
      }
    }
    h = Tensor(h.shape(), std::move(v));
  }
  const auto expected = to_vec(reference.forward(batch).logits);
  for (auto cond : kAttending) {
    model::RgbStream other(tiny_config(cond, Pooling::Attention), rng);
    randomize(other.parameters(), rng);
    copy_shared(reference.parameters(), other.parameters());
    const auto got = to_vec(other.forward(batch).logits);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradients are finite and vanish exactly where no signal flows") {
  Rng rng(9);
  auto c = tiny_config(Conditioning::AugmentedPose, Pooling::Attention);
  model::RgbStream rgb(c, rng);
  model::PoseStreamConfig pc;
  pc.pose_dim = 6;
  pc.hidden = 4;
  pc.layers = 2;
  pc.classes = 3;
  model::PoseStream pose(pc, rng);
  auto batch = random_batch(c, 3, rng);
  const std::vector<int> targets = {0, 2, 1};

  Graph g;
  Graph::Scope scope(g);
  g.backward(model::stream_loss(rgb.forward(batch), targets));
  for (const auto& p : rgb.parameters()) {
    REQUIRE(p.tensor.has_grad());
    for (double v : p.tensor.grad()) CHECK(std::isfinite(v));
    // At equal initialization the attention output layers are zero, so no
    // gradient reaches the hidden layers of the attention MLPs.
    if (p.name.find("attention.layer0.") != std::string::npos) {
      for (double v : p.tensor.grad()) CHECK(v == 0.0);
    }
  }
  // The pose stream is a separate branch: the RGB loss leaves it untouched.
  for (const auto& p : pose.parameters()) {
    if (!p.tensor.has_grad()) continue;
    for (double v : p.tensor.grad()) CHECK(v == 0.0);
  }
}

TEST_CASE("pose stream with zero input and zero parameters is uniform") {
  Rng rng(10);
  model::PoseStreamConfig pc;
  pc.pose_dim = 150;
  pc.hidden = 16;
  pc.classes = 60;
  model::PoseStream pose(pc, rng);
  for (auto p : pose.parameters()) {
    for (auto& v : p.tensor.mutable_values()) v = 0.0;
  }
  model::PoseBatch pb;
  for (int t = 0; t < 20; ++t) pb.poses.push_back(Tensor::zeros({2, 150}));
  auto out = pose.forward(pb);
  for (double v : out.logits.values()) CHECK(v == 0.0);
  CHECK(model::stream_loss(out, std::vector<int>{3, 59}).item() ==
        doctest::Approx(std::log(60.0)).epsilon(1e-14));
}

TEST_CASE("logit fusion") {
  Rng rng(11);
  auto a = random_tensor({2, 5}, rng);
  CHECK(to_vec(model::fuse_logits(a, Tensor::zeros({2, 5}))) == to_vec(a));
  auto f = model::fuse_logits(a, a);
  for (std::size_t r = 0; r < 2; ++r) {
    std::size_t ia = 0, ifu = 0;
    for (std::size_t k = 1; k < 5; ++k) {
      if (a.at(r * 5 + k) > a.at(r * 5 + ia)) ia = k;
      if (f.at(r * 5 + k) > f.at(r * 5 + ifu)) ifu = k;
    }
    CHECK(ia == ifu);
  }
  CHECK_THROWS_AS(model::fuse_logits(a, Tensor::zeros({2, 4})), ShapeError);
}

TEST_CASE("forward passes are deterministic") {
  for (auto cond : {Conditioning::Both, Conditioning::ConcatBaseline}) {
    Rng r1(12), r2(12);
    auto c = tiny_config(cond, Pooling::Attention);
    model::RgbStream s1(c, r1), s2(c, r2);
    Rng b1(13), b2(13);
    auto o1 = s1.forward(random_batch(c, 2, b1));
    auto o2 = s2.forward(random_batch(c, 2, b2));
    CHECK(to_vec(o1.logits) == to_vec(o2.logits));
    CHECK(to_vec(o1.hidden_states) == to_vec(o2.hidden_states));
  }
}

TEST_CASE("mismatched inputs are rejected") {
  Rng rng(14);
  auto c = tiny_config(Conditioning::AugmentedPose, Pooling::Attention);
  model::RgbStream stream(c, rng);
  auto batch = random_batch(c, 2, rng);
  auto short_batch = batch;
  short_batch.hands.pop_back();
  CHECK_THROWS(stream.forward(short_batch));
  auto no_pose = batch;
  no_pose.aug_pose.clear();
  CHECK_THROWS_AS(stream.forward(no_pose), ShapeError);
  CHECK_THROWS(model::spatial_attention(nn::init_mlp(std::vector<std::size_t>{9, 4, 4}, rng),
                                        Conditioning::SumBaseline, batch.aug_pose[0], Tensor{}));
}
