// Acceptance checks. Each criterion prints one "PASS criterion N: ..." or
// "FAIL criterion N: ..." line; the exit status is nonzero if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "poseattn/ablation.hpp"
#include "poseattn/attention_dump.hpp"
#include "poseattn/batching.hpp"
#include "poseattn/checkpoint.hpp"
#include "poseattn/config.hpp"
#include "poseattn/dataset.hpp"
#include "poseattn/evaluate.hpp"
#include "poseattn/gradcheck_runner.hpp"
#include "poseattn/synth.hpp"
#include "poseattn/train.hpp"

using namespace poseattn;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Pinned tolerances and thresholds.
constexpr double kGradTol = 1e-5;
constexpr double kGradEps = 1e-5;
constexpr double kGradBudgetSeconds = 120.0;
constexpr std::size_t kSimplexInputs = 1000;
constexpr double kSimplexTol = 1e-6;
constexpr double kSpatialAccuracy = 0.95;
constexpr double kSumCeiling = 0.40;
constexpr double kMassFloor = 0.5;
constexpr double kSpatialBudgetSeconds = 600.0;
constexpr double kTemporalGap = 0.05;
constexpr double kOrderingGap = 0.01;
constexpr double kFusionSlack = 0.005;
constexpr double kProtocolTol = 1e-12;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

std::string num(double v, const char* fmt = "%.3g") {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

config::RunConfig synthetic_config() {
  return config::load_config(fs::path(POSEATTN_CONFIG_DIR) / "synthetic.json");
}

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

model::RgbBatch random_batch(const model::RgbStreamConfig& c, std::size_t b, Rng& rng) {
  model::RgbBatch batch;
  for (std::size_t t = 0; t < c.window; ++t) {
    batch.hands.push_back(random_tensor({b, 4, c.hand_input_dim}, rng, -3.0, 3.0));
    batch.present.push_back(Tensor::full({b, 4}, 1.0));
    batch.aug_pose.push_back(random_tensor({b, c.aug_pose_dim}, rng, -3.0, 3.0));
  }
  batch.motion = random_tensor({b, 2 * c.window}, rng, 0.0, 5.0);
  return batch;
}

model::RgbStreamConfig variant_config(model::Conditioning cond, model::Pooling pool) {
  model::RgbStreamConfig c;
  c.window = 20;
  c.hand_input_dim = c.feature_dim = 16;
  c.aug_pose_dim = 450;
  c.hidden = 16;
  c.spatial_hidden = 32;
  c.temporal_hidden = 32;
  c.classes = 4;
  c.conditioning = cond;
  c.pooling = pool;
  return c;
}

void randomize(const std::vector<NamedTensor>& params, Rng& rng, double scale) {
  for (auto p : params) {
    for (auto& v : p.tensor.mutable_values()) v = scale * rng.normal();
  }
}

const model::Conditioning kAllConditionings[] = {
    model::Conditioning::HiddenState, model::Conditioning::AugmentedPose,
    model::Conditioning::Both, model::Conditioning::SumBaseline,
    model::Conditioning::ConcatBaseline};

// ---------------------------------------------------------------------------

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  auto cells = default_gradcheck_cells();
  auto run = run_gradcheck(cells, kGradEps, kGradTol);
  const double secs = seconds_since(t0);
  std::string worst_cell;
  double worst = 0.0;
  for (const auto& c : run.cells) {
    if (c.report.max_rel_error >= worst) {
      worst = c.report.max_rel_error;
      worst_cell = c.name;
    }
    if (!c.report.passed) {
      const auto* w = c.report.worst();
      std::cout << "  cell " << c.name << " failed at " << (w ? w->name : "?") << "\n";
    }
  }
  const bool pass = run.passed && cells.size() == 11 && run.max_rel_error < kGradTol &&
                    secs < kGradBudgetSeconds;
  return {pass, std::to_string(cells.size()) + " cells, max rel error " + num(run.max_rel_error) +
                    " (" + worst_cell + ") < " + num(kGradTol) + ", " + num(secs, "%.1f") +
                    " s < " + num(kGradBudgetSeconds, "%.0f") + " s"};
}

Outcome criterion2() {
  Rng rng(2024);
  double worst_sum = 0.0, min_p = 1.0;
  bool equal_init = true;
  std::size_t variants = 0;
  for (auto cond : kAllConditionings) {
    for (auto pool : {model::Pooling::Attention, model::Pooling::PerStep}) {
      const auto c = variant_config(cond, pool);
      const bool spatial = model::uses_spatial_attention(cond);
      const bool temporal = pool == model::Pooling::Attention;
      if (!spatial && !temporal) continue;
      ++variants;
      {
        model::RgbStream fresh(c, rng);
        auto out = fresh.forward(random_batch(c, 16, rng));
        if (spatial) {
          for (double p : out.spatial_attention.values()) equal_init &= (p == 0.25);
        }
        if (temporal) {
          for (double p : out.temporal_attention.values()) equal_init &= (p == 1.0 / 20.0);
        }
      }
      // Ten parameter draws of growing scale, 100 inputs each.
      for (std::size_t draw = 0; draw < 10; ++draw) {
        model::RgbStream stream(c, rng);
        randomize(stream.parameters(), rng, 0.2 * static_cast<double>(draw + 1));
        auto out = stream.forward(random_batch(c, kSimplexInputs / 10, rng));
        auto check_rows = [&](const Tensor& t, std::size_t width) {
          auto v = t.values();
          for (std::size_t r = 0; r < v.size() / width; ++r) {
            double s = 0.0;
            for (std::size_t k = 0; k < width; ++k) {
              min_p = std::min(min_p, v[r * width + k]);
              s += v[r * width + k];
            }
            worst_sum = std::max(worst_sum, std::abs(s - 1.0));
          }
        };
        if (spatial) check_rows(out.spatial_attention, 4);
        if (temporal) check_rows(out.temporal_attention, 20);
      }
    }
  }
  const bool pass = min_p >= 0.0 && worst_sum <= kSimplexTol && equal_init && variants == 8;
  return {pass, std::to_string(variants) + " attention variants x " +
                    std::to_string(kSimplexInputs) + " inputs: min weight " + num(min_p) +
                    ", max |sum - 1| " + num(worst_sum) + " <= " + num(kSimplexTol) +
                    ", equal init exact: " + (equal_init ? "yes" : "no")};
}

Outcome criterion3() {
  Rng rng(31);
  std::size_t compared = 0, differing = 0, hidden_changed = 0;
  for (auto pool : {model::Pooling::Attention, model::Pooling::PerStep}) {
    const auto c = variant_config(model::Conditioning::AugmentedPose, pool);
    for (std::size_t draw = 0; draw < 10; ++draw) {
      model::RgbStream stream(c, rng);
      randomize(stream.parameters(), rng, 0.5);
      auto batch = random_batch(c, 100, rng);
      auto base = stream.forward(batch);
      auto perturbed = batch;
      for (auto& h : perturbed.hands) h = random_tensor(h.shape(), rng, -3.0, 3.0);
      auto out = stream.forward(perturbed);
      auto a = base.spatial_attention.values();
      auto b = out.spatial_attention.values();
      for (std::size_t i = 0; i < a.size(); ++i) {
        ++compared;
        // Bitwise comparison, not a tolerance.
        if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) ++differing;
      }
      auto ha = base.hidden_states.values();
      auto hb = out.hidden_states.values();
      for (std::size_t i = 0; i < ha.size(); ++i) hidden_changed += ha[i] != hb[i];
    }
  }
  // The perturbation must reach the hidden states, or the check is vacuous.
  const bool pass = differing == 0 && hidden_changed > 0;
  return {pass, std::to_string(compared) + " attention weights compared after perturbing hand "
                    "features, " + std::to_string(differing) + " differ bitwise; " +
                    std::to_string(hidden_changed) + " hidden-state entries changed"};
}

struct TrainedRun {
  double test_accuracy = 0.0;
  AttentionSummary attention;
  double seconds = 0.0;
};

TrainedRun train_and_probe(const config::RunConfig& cfg, const batching::PreparedDataset& data,
                           const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  auto result = run_train(cfg, data, out);
  TrainedRun r;
  r.seconds = seconds_since(t0);
  r.test_accuracy = result.test->accuracy;
  const auto test = data.dataset().indices(data::Split::Test);
  auto records = collect_attention(result.models, data, test);
  r.attention = summarize(records);
  if (!out.empty()) write_jsonl(out / "attention.jsonl", records);
  return r;
}

Outcome criterion4(const fs::path& work) {
  auto spec = synth::default_spec(synth::TaskKind::ActiveHand);
  spec.val_fraction = 0.2;  // 2500 pool -> 2000 train / 500 val, plus 500 test
  spec.seed = 0;
  const auto ds = synth::generate(spec).dataset;
  const auto n_train = ds.indices(data::Split::Train).size();
  const auto n_val = ds.indices(data::Split::Val).size();
  const auto n_test = ds.indices(data::Split::Test).size();
  batching::PreparedDataset data(ds);

  auto cfg = synthetic_config();
  cfg.rgb.conditioning = model::Conditioning::AugmentedPose;
  auto sa = train_and_probe(cfg, data, work / "c4_sa_pose");
  cfg.rgb.conditioning = model::Conditioning::SumBaseline;
  auto sum = train_and_probe(cfg, data, work / "c4_sum");

  const bool split_ok = n_train == 2000 && n_val == 500 && n_test == 500;
  const bool pass = split_ok && sa.test_accuracy >= kSpatialAccuracy &&
                    sa.attention.active_hand_mass > kMassFloor && sum.test_accuracy <= kSumCeiling &&
                    sa.seconds < kSpatialBudgetSeconds;
  return {pass, "split " + std::to_string(n_train) + "/" + std::to_string(n_val) + "/" +
                    std::to_string(n_test) + "; SA-pose " + pct(sa.test_accuracy) +
                    " (>= " + pct(kSpatialAccuracy) + ") in " + num(sa.seconds, "%.0f") +
                    " s, active-hand mass " + num(sa.attention.active_hand_mass) + " (> " +
                    num(kMassFloor) + "); Sum " + pct(sum.test_accuracy) + " (<= " +
                    pct(kSumCeiling) + ")"};
}

Outcome criterion5(const fs::path& work) {
  const auto ds = synth::generate(synth::default_spec(synth::TaskKind::TemporalEvent)).dataset;
  batching::PreparedDataset data(ds);
  auto cfg = synthetic_config();
  cfg.rgb.conditioning = model::Conditioning::SumBaseline;
  std::map<model::Pooling, TrainedRun> runs;
  for (auto pool : {model::Pooling::Attention, model::Pooling::LastStep, model::Pooling::Mean}) {
    cfg.rgb.pooling = pool;
    runs[pool] = train_and_probe(cfg, data, work / (std::string("c5_") + model::to_string(pool)));
  }
  const double ta = runs[model::Pooling::Attention].test_accuracy;
  const double last = runs[model::Pooling::LastStep].test_accuracy;
  const double mean = runs[model::Pooling::Mean].test_accuracy;
  const double mass = runs[model::Pooling::Attention].attention.event_mass;
  const bool pass = ta - last >= kTemporalGap && ta - mean >= kTemporalGap && mass > kMassFloor;
  return {pass, "TA " + pct(ta) + ", last-step " + pct(last) + ", mean " + pct(mean) +
                    " (gap >= " + num(100 * kTemporalGap, "%.0f") + " points); event mass " +
                    num(mass) + " (> " + num(kMassFloor) + ")"};
}

// Fused ablation grid shared by criteria 6 and 7, cached in the work dir.
struct GridCell {
  std::string row, protocol;
  std::uint64_t seed = 0;
  bool ok = false;
  double accuracy = 0.0, rgb = -1.0, pose = -1.0;
};

const std::vector<std::string> kGridRows = {"sum", "sa-hidden", "sa-pose", "ta", "sta-pose"};
const std::vector<std::uint64_t> kGridSeeds = {0, 1, 2};

data::Dataset combined_dataset(std::uint64_t seed, bool view_shift) {
  auto spec = synth::default_spec(synth::TaskKind::Combined);
  spec.seed = seed;
  spec.view_shift = view_shift;
  return synth::generate(spec).dataset;
}

std::vector<GridCell> fused_grid(const fs::path& work) {
  const auto dir = work / "fused";
  fs::create_directories(dir);
  const auto cs = combined_dataset(11, false);
  const auto cv = combined_dataset(12, true);
  data::save_dataset(cs, dir / "cs.bin");
  data::save_dataset(cv, dir / "cv.bin");

  AblationConfig cfg;
  cfg.base = synthetic_config();
  cfg.fused = true;
  cfg.rows = kGridRows;
  cfg.seeds = kGridSeeds;
  cfg.dumps = false;
  const json key = {{"config", config::to_json(cfg.base)},
                    {"rows", cfg.rows},
                    {"seeds", cfg.seeds},
                    {"cs", data::content_hash(dir / "cs.bin")},
                    {"cv", data::content_hash(dir / "cv.bin")}};

  const auto cache = dir / "grid.json";
  if (fs::exists(cache)) {
    const auto j = json::parse(slurp(cache));
    if (j.value("key", json()) == key) {
      std::vector<GridCell> cells;
      for (const auto& c : j["cells"]) {
        cells.push_back({c["row"], c["protocol"], c["seed"], c["ok"], c["accuracy"], c["rgb"],
                         c["pose"]});
      }
      std::cout << "  reusing cached grid " << cache.string() << "\n";
      return cells;
    }
  }

  batching::PreparedDataset cs_data(cs), cv_data(cv);
  std::vector<Protocol> protocols = {{"CS", &cs_data, key["cs"]}, {"CV", &cv_data, key["cv"]}};
  auto result = run_ablation(cfg, protocols, dir / "grid");
  std::cout << format_table(result);
  json out = {{"key", key}, {"cells", json::array()}};
  std::vector<GridCell> cells;
  for (const auto& c : result.cells) {
    cells.push_back({c.row, c.protocol, c.seed, c.ok, c.accuracy, c.rgb_accuracy, c.pose_accuracy});
    out["cells"].push_back({{"row", c.row},
                            {"protocol", c.protocol},
                            {"seed", c.seed},
                            {"ok", c.ok},
                            {"accuracy", c.accuracy},
                            {"rgb", c.rgb_accuracy},
                            {"pose", c.pose_accuracy}});
  }
  std::ofstream(cache) << out.dump(2) << "\n";
  return cells;
}

// Mean over protocols and seeds of one field for one row; NaN when a cell
// is missing or failed.
double grid_mean(const std::vector<GridCell>& cells, const std::string& row,
                 double GridCell::*field) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells) {
    if (c.row != row) continue;
    if (!c.ok) return std::nan("");
    s += c.*field;
    ++n;
  }
  return n == 2 * kGridSeeds.size() ? s / static_cast<double>(n) : std::nan("");
}

Outcome criterion6(const fs::path& work) {
  const auto cells = fused_grid(work);
  std::map<std::string, double> m;
  for (const auto& r : kGridRows) m[r] = grid_mean(cells, r, &GridCell::rgb);
  auto gap_ok = [&](const std::string& hi, const std::string& lo) {
    return m[hi] - m[lo] >= kOrderingGap;  // false for NaN
  };
  const bool pass = gap_ok("sta-pose", "sa-pose") && gap_ok("sa-pose", "sa-hidden") &&
                    gap_ok("sa-hidden", "sum") && gap_ok("sta-pose", "ta") && gap_ok("ta", "sum");
  return {pass, "RGB mean over CS/CV x 3 seeds: STA-pose " + pct(m["sta-pose"]) + " > SA-pose " +
                    pct(m["sa-pose"]) + " > SA-hidden " + pct(m["sa-hidden"]) + " > Sum " +
                    pct(m["sum"]) + "; STA-pose > TA " + pct(m["ta"]) + " > Sum (gaps >= " +
                    num(100 * kOrderingGap, "%.0f") + " point)"};
}

Outcome criterion7(const fs::path& work) {
  const auto cells = fused_grid(work);
  const double fused = grid_mean(cells, "sta-pose", &GridCell::accuracy);
  const double rgb = grid_mean(cells, "sta-pose", &GridCell::rgb);
  const double sum_fused = grid_mean(cells, "sum", &GridCell::accuracy);
  double pose = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells) {
    if (c.row == "pose" && c.ok) {
      pose += c.pose;
      ++n;
    }
  }
  pose = n == 2 * kGridSeeds.size() ? pose / static_cast<double>(n) : std::nan("");
  const bool pass = fused >= rgb - kFusionSlack && fused >= pose - kFusionSlack && fused > sum_fused;
  return {pass, "STA-pose + pose " + pct(fused) + " vs STA-pose alone " + pct(rgb) +
                    " and pose alone " + pct(pose) + " (slack " +
                    num(100 * kFusionSlack, "%.1f") + " points); Sum + pose " + pct(sum_fused)};
}

Outcome criterion8() {
  auto spec = synth::default_spec(synth::TaskKind::Combined);
  spec.window = 10;
  spec.length = 37;
  spec.train_count = 40;
  spec.test_count = 20;
  const auto ds = synth::generate(spec).dataset;
  batching::PreparedDataset data(ds);
  auto cfg = synthetic_config();
  cfg.model = config::ModelVariant::TwoStream;
  cfg.window = 10;
  auto models = build_models(cfg, config::dims_from_dataset(ds));
  Rng rng(8);
  randomize(models.parameters(), rng, 0.3);
  const auto test = ds.indices(data::Split::Test);
  auto result = evaluate(models, data, test);

  const std::size_t L = 37, T = 10, C = ds.classes;
  std::size_t checked = 0;
  bool starts_ok = true;
  double worst = 0.0;
  for (std::size_t n = 0; n < test.size(); ++n) {
    const auto& pred = result.predictions[n];
    starts_ok &= pred.window_starts.size() == 5 && pred.rgb_window_logits.size() == 5 &&
                 pred.pose_window_logits.size() == 5;
    if (!starts_ok) break;
    std::vector<batching::WindowRef> windows;
    for (std::size_t k = 0; k < 5; ++k) {
      const auto start =
          static_cast<std::size_t>(std::lround(static_cast<double>(k * (L - T)) / 4.0));
      starts_ok &= pred.window_starts[k] == start;
      batching::WindowRef w{test[n], {}};
      for (std::size_t i = 0; i < T; ++i) w.frames.push_back(start + i);
      windows.push_back(std::move(w));
    }
    const Tensor rgb_t = models.rgb->forward(batching::rgb_batch(data, windows)).logits;
    const Tensor pose_t = models.pose->forward(batching::pose_batch(data, windows)).logits;
    auto rgb = rgb_t.values();
    auto pose = pose_t.values();
    for (std::size_t c = 0; c < C; ++c) {
      double mr = 0.0, mp = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        worst = std::max(worst, std::abs(pred.rgb_window_logits[k][c] - rgb[k * C + c]));
        worst = std::max(worst, std::abs(pred.pose_window_logits[k][c] - pose[k * C + c]));
        mr += rgb[k * C + c] / 5.0;
        mp += pose[k * C + c] / 5.0;
      }
      worst = std::max(worst, std::abs(pred.rgb_logits[c] - mr));
      worst = std::max(worst, std::abs(pred.pose_logits[c] - mp));
      worst = std::max(worst, std::abs(pred.logits[c] - (mr + mp)));
    }
    starts_ok &= pred.predicted == argmax(pred.logits);
    ++checked;
  }
  const bool pass = starts_ok && checked == test.size() && worst <= kProtocolTol;
  return {pass, std::to_string(checked) + " sequences of " + std::to_string(L) +
                    " frames: window starts round(k(L-T)/4) " + (starts_ok ? "match" : "MISMATCH") +
                    ", max deviation from averaged direct forwards " + num(worst)};
}

Outcome criterion9(const fs::path& work) {
  auto spec = synth::default_spec(synth::TaskKind::Combined);
  spec.train_count = 160;
  spec.test_count = 40;
  const auto ds = synth::generate(spec).dataset;
  batching::PreparedDataset data(ds);
  auto cfg = synthetic_config();
  cfg.model = config::ModelVariant::TwoStream;
  cfg.train.max_epochs = 2;
  const auto dir = work / "determinism";
  fs::remove_all(dir);

  std::vector<std::string> failures;
  run_train(cfg, data, dir / "train_a");
  run_train(cfg, data, dir / "train_b");
  for (const char* f : {"metrics.csv", "checkpoint/params.bin"}) {
    if (slurp(dir / "train_a" / f) != slurp(dir / "train_b" / f)) failures.push_back(f);
  }

  const auto test = ds.indices(data::Split::Test);
  auto eval_once = [&] {
    auto models = load_checkpoint(dir / "train_a" / "checkpoint");
    std::ostringstream os;
    for (const auto& p : evaluate(models, data, test).predictions) {
      for (double v : p.logits) os << format_double(v) << ",";
      os << p.predicted << "\n";
    }
    return os.str();
  };
  if (eval_once() != eval_once()) failures.push_back("eval predictions");

  AblationConfig ab;
  ab.base = cfg;
  ab.base.train.max_epochs = 1;
  ab.fused = true;
  ab.rows = {"sum", "sta-pose"};
  ab.seeds = {0, 1};
  std::vector<Protocol> protocols = {{"CS", &data, ""}};
  run_ablation(ab, protocols, dir / "ablate_a");
  ab.workers = 2;  // scheduling must not change the numbers
  run_ablation(ab, protocols, dir / "ablate_b");
  for (const char* f : {"cells.csv", "table.csv"}) {
    if (slurp(dir / "ablate_a" / f) != slurp(dir / "ablate_b" / f)) failures.push_back(f);
  }

  std::string detail = "train (metrics.csv, params.bin), eval (logits) and ablate (cells.csv, "
                       "table.csv; 1 vs 2 workers) repeated: ";
  if (failures.empty()) return {true, detail + "bitwise identical"};
  for (const auto& f : failures) detail += f + " ";
  return {false, detail + "differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> criteria;
  std::string work;
  app.add_option("-c,--criterion", criteria, "Criterion number (1-9); repeatable, default all")
      ->check(CLI::Range(1, 9));
  app.add_option("-w,--work", work, "Scratch directory for datasets, runs and caches");
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty()) criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  if (work.empty()) {
    const char* root = std::getenv("POSEATTN_OUTPUT_ROOT");
    work = (fs::path(root && *root ? root : ".") / "acceptance").string();
  }
  fs::create_directories(work);

  const std::map<int, std::function<Outcome()>> table = {
      {1, [] { return criterion1(); }},
      {2, [] { return criterion2(); }},
      {3, [] { return criterion3(); }},
      {4, [&] { return criterion4(work); }},
      {5, [&] { return criterion5(work); }},
      {6, [&] { return criterion6(work); }},
      {7, [&] { return criterion7(work); }},
      {8, [] { return criterion8(); }},
      {9, [&] { return criterion9(work); }},
  };
  int failed = 0;
  for (int n : criteria) {
    Outcome o;
    try {
      o = table.at(n)();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
