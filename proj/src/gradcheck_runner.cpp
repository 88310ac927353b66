#include "poseattn/gradcheck_runner.hpp"

#include <chrono>
#include <memory>

#include "poseattn/model.hpp"
#include "poseattn/random.hpp"

namespace poseattn {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

void randomize(std::vector<NamedTensor>& params, Rng& rng) {
  for (auto& p : params) {
    for (auto& x : p.tensor.mutable_values()) x = 0.6 * rng.normal();
  }
}

model::RgbBatch random_rgb_batch(const TinyDims& d, std::size_t aug_dim, Rng& rng) {
  model::RgbBatch b;
  for (std::size_t t = 0; t < d.window; ++t) {
    b.hands.push_back(random_tensor({d.batch, 4, d.feature_dim}, rng, -1.0, 1.0));
    b.present.push_back(Tensor::full({d.batch, 4}, 1.0));
    b.aug_pose.push_back(random_tensor({d.batch, aug_dim}, rng, -1.0, 1.0));
  }
  b.motion = random_tensor({d.batch, 2 * d.window}, rng, 0.0, 1.0);
  return b;
}

std::vector<int> random_targets(const TinyDims& d, Rng& rng) {
  std::vector<int> t(d.batch);
  for (auto& x : t) x = static_cast<int>(rng.index(d.classes));
  return t;
}

}  // namespace

std::vector<GradCheckCell> default_gradcheck_cells(const TinyDims& d) {
  std::vector<GradCheckCell> cells;
  Rng rng(d.seed);
  const std::size_t pose_dim = 2 * d.joints * 3;
  const model::Conditioning conds[] = {
      model::Conditioning::HiddenState, model::Conditioning::AugmentedPose,
      model::Conditioning::Both, model::Conditioning::SumBaseline,
      model::Conditioning::ConcatBaseline};
  for (auto cond : conds) {
    for (bool ta : {false, true}) {
      model::RgbStreamConfig c;
      c.window = d.window;
      c.hand_input_dim = c.feature_dim = d.feature_dim;
      c.aug_pose_dim = 3 * pose_dim;
      c.hidden = d.hidden;
      c.spatial_hidden = d.spatial_hidden;
      c.temporal_hidden = d.temporal_hidden;
      c.classes = d.classes;
      c.conditioning = cond;
      c.pooling = ta ? model::Pooling::Attention : model::Pooling::PerStep;
      auto stream = std::make_shared<model::RgbStream>(c, rng);
      auto params = stream->parameters();
      randomize(params, rng);
      auto batch = std::make_shared<model::RgbBatch>(random_rgb_batch(d, c.aug_pose_dim, rng));
      auto targets = random_targets(d, rng);
      cells.push_back({std::string("rgb/") + model::to_string(cond) + (ta ? "/ta" : "/no-ta"),
                       [stream, batch, targets] {
                         return model::stream_loss(stream->forward(*batch), targets);
                       },
                       params});
    }
  }

  model::PoseStreamConfig pc;
  pc.pose_dim = pose_dim;
  pc.hidden = d.pose_hidden;
  pc.layers = d.pose_layers;
  pc.classes = d.classes;
  auto pose = std::make_shared<model::PoseStream>(pc, rng);
  auto params = pose->parameters();
  randomize(params, rng);
  auto batch = std::make_shared<model::PoseBatch>();
  for (std::size_t t = 0; t < d.window; ++t) {
    batch->poses.push_back(random_tensor({d.batch, pose_dim}, rng, -1.0, 1.0));
  }
  auto targets = random_targets(d, rng);
  cells.push_back({"pose-stream",
                   [pose, batch, targets] {
                     return model::stream_loss(pose->forward(*batch), targets);
                   },
                   params});
  return cells;
}

GradCheckRun run_gradcheck(const std::vector<GradCheckCell>& cells, double eps, double tol) {
  GradCheckRun run;
  for (const auto& cell : cells) {
    const auto t0 = std::chrono::steady_clock::now();
    CellReport r;
    r.name = cell.name;
    r.report = grad_check_params(cell.loss, cell.params, eps, tol);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.passed = run.passed && r.report.passed;
    run.max_rel_error = std::max(run.max_rel_error, r.report.max_rel_error);
    run.cells.push_back(std::move(r));
  }
  return run;
}

nlohmann::json to_json(const GradCheckRun& run) {
  nlohmann::json j;
  j["passed"] = run.passed;
  j["max_rel_error"] = run.max_rel_error;
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& c : run.cells) {
    nlohmann::json cj = {{"name", c.name},
                         {"passed", c.report.passed},
                         {"max_rel_error", c.report.max_rel_error}};
    auto& entries = cj["parameters"] = nlohmann::json::array();
    for (const auto& e : c.report.entries) {
      entries.push_back({{"name", e.name},
                         {"max_rel_error", e.max_rel_error},
                         {"worst_index", e.worst_index},
                         {"analytic", e.analytic},
                         {"numeric", e.numeric}});
    }
    cells.push_back(std::move(cj));
  }
  return j;
}

}  // namespace poseattn
