// poseattn command-line harness.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric failure (non-finite values, failed gradient check).

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "poseattn/ablation.hpp"
#include "poseattn/attention_dump.hpp"
#include "poseattn/batching.hpp"
#include "poseattn/checkpoint.hpp"
#include "poseattn/config.hpp"
#include "poseattn/dataset.hpp"
#include "poseattn/evaluate.hpp"
#include "poseattn/gradcheck_runner.hpp"
#include "poseattn/parallel.hpp"
#include "poseattn/synth.hpp"
#include "poseattn/train.hpp"

namespace fs = std::filesystem;
using namespace poseattn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr const char* kOutputRootEnv = "POSEATTN_OUTPUT_ROOT";

// Relative output paths are placed under $POSEATTN_OUTPUT_ROOT when set.
fs::path output_path(const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / p;
  return p;
}

data::Split parse_split(const std::string& s) {
  if (s == "train") return data::Split::Train;
  if (s == "val") return data::Split::Val;
  if (s == "test") return data::Split::Test;
  throw config::ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

std::string pct(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << 100.0 * v << "%";
  return os.str();
}

struct SynthArgs {
  std::string task = "active-hand";
  std::string spec_file;
  std::vector<std::string> overrides;
  std::string out = "data";
  std::string name = "dataset";
};

struct RunArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string dataset;
  std::string out;
};

config::RunConfig resolve_config(const RunArgs& a) {
  config::RunConfig c = a.config_file.empty() ? config::RunConfig{} : config::load_config(a.config_file);
  for (const auto& o : a.overrides) config::apply_override(c, o);
  if (!a.dataset.empty()) c.dataset = a.dataset;
  if (!a.out.empty()) c.output_dir = a.out;
  return c;
}

int cmd_synth(const SynthArgs& a) {
  nlohmann::json j;
  if (!a.spec_file.empty()) {
    std::ifstream in(a.spec_file);
    if (!in) throw config::ConfigError("cannot open spec " + a.spec_file);
    j = nlohmann::json::parse(in);
  } else {
    j = synth::to_json(synth::default_spec(synth::parse_task(a.task)));
  }
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw config::ConfigError("override '" + o + "' must look like key=value");
    const std::string key = o.substr(0, eq), text = o.substr(eq + 1);
    auto value = nlohmann::json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    nlohmann::json* node = &j;
    std::stringstream ks(key);
    std::string part;
    while (std::getline(ks, part, '.')) node = &(*node)[part];
    *node = value;
  }
  const auto spec = synth::spec_from_json(j);
  const auto generated = synth::generate(spec);
  const fs::path dir = output_path(a.out);
  fs::create_directories(dir);
  const fs::path file = dir / (a.name + ".bin");
  data::save_dataset(generated.dataset, file);
  auto manifest = data::manifest_json(generated.dataset);
  manifest["spec"] = synth::to_json(spec);
  manifest["attempts"] = generated.attempts;
  manifest["content_hash"] = data::content_hash(file);
  std::ofstream(dir / (a.name + ".manifest.json")) << manifest.dump(2) << "\n";
  const auto& ds = generated.dataset;
  std::cout << "wrote " << file.string() << ": " << ds.indices(data::Split::Train).size() << " train, "
            << ds.indices(data::Split::Val).size() << " val, " << ds.indices(data::Split::Test).size()
            << " test sequences; hash " << manifest["content_hash"].get<std::string>() << "\n";
  return 0;
}

int cmd_train(const RunArgs& a) {
  auto cfg = resolve_config(a);
  if (cfg.dataset.empty()) throw config::ConfigError("train: no dataset (use --dataset or the config)");
  if (cfg.output_dir.empty()) cfg.output_dir = "runs/train";
  const auto ds = data::load_dataset(cfg.dataset);
  const batching::PreparedDataset prepared(ds);
  const fs::path out = output_path(cfg.output_dir);
  TrainOptions opts;
  opts.on_epoch = [](const EpochRecord& e) {
    std::cout << e.stream << " epoch " << e.epoch << ": loss " << e.train_loss << ", val "
              << pct(e.val_accuracy) << (e.improved ? " *" : "") << std::endl;
  };
  const auto r = run_train(cfg, prepared, out, data::content_hash(cfg.dataset), opts);
  if (r.test) {
    std::cout << "test accuracy " << pct(r.test->accuracy);
    if (r.test->rgb_accuracy >= 0 && r.test->pose_accuracy >= 0) {
      std::cout << " (rgb " << pct(r.test->rgb_accuracy) << ", pose " << pct(r.test->pose_accuracy) << ")";
    }
    std::cout << "\n";
  }
  std::cout << "outputs in " << out.string() << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  std::string out;
};

int cmd_eval(const EvalArgs& a) {
  const auto models = load_checkpoint(a.checkpoint);
  const auto ds = data::load_dataset(a.dataset);
  const batching::PreparedDataset prepared(ds);
  const auto idx = ds.indices(parse_split(a.split));
  const auto r = evaluate(models, prepared, idx, models.config.train.eval_batch);
  nlohmann::json j = {{"split", a.split},
                      {"sequences", idx.size()},
                      {"accuracy", r.accuracy},
                      {"dataset_hash", data::content_hash(a.dataset)}};
  if (r.rgb_accuracy >= 0) j["rgb_accuracy"] = r.rgb_accuracy;
  if (r.pose_accuracy >= 0) j["pose_accuracy"] = r.pose_accuracy;
  if (!a.out.empty()) {
    const fs::path out = output_path(a.out);
    fs::create_directories(out);
    std::ofstream(out / "eval.json") << j.dump(2) << "\n";
    std::ofstream preds(out / "predictions.csv");
    preds << "sequence_id,label,predicted\n";
    for (const auto& p : r.predictions) preds << p.id << ',' << p.label << ',' << p.predicted << '\n';
  }
  std::cout << a.split << " accuracy " << pct(r.accuracy) << " on " << idx.size() << " sequences\n";
  return 0;
}

struct AblateArgs {
  RunArgs run;
  std::string cs;
  std::string cv;
  std::string table = "rgb";
  std::vector<std::string> rows;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::size_t workers = 0;
  bool no_dumps = false;
};

int cmd_ablate(const AblateArgs& a) {
  AblationConfig cfg;
  cfg.base = resolve_config(a.run);
  if (a.table != "rgb" && a.table != "fused") throw config::ConfigError("--table must be rgb or fused");
  cfg.fused = a.table == "fused";
  cfg.rows = a.rows;
  cfg.seeds = a.seeds;
  cfg.workers = a.workers == 0 ? default_workers() : a.workers;
  cfg.dumps = !a.no_dumps;
  if (a.cs.empty() || a.cv.empty()) throw config::ConfigError("ablate: --cs and --cv datasets are required");
  const auto cs = data::load_dataset(a.cs);
  const auto cv = data::load_dataset(a.cv);
  const batching::PreparedDataset cs_prep(cs), cv_prep(cv);
  const std::vector<Protocol> protocols = {{"CS", &cs_prep, data::content_hash(a.cs)},
                                           {"CV", &cv_prep, data::content_hash(a.cv)}};
  const fs::path out = output_path(cfg.base.output_dir.empty() ? "runs/ablate" : cfg.base.output_dir);
  fs::create_directories(out);
  std::ofstream(out / "config.json") << nlohmann::json{{"config", config::to_json(cfg.base)},
                                                        {"table", a.table},
                                                        {"seeds", cfg.seeds},
                                                        {"cs_hash", protocols[0].dataset_hash},
                                                        {"cv_hash", protocols[1].dataset_hash}}
                                              .dump(2)
                                       << "\n";
  const auto r = run_ablation(cfg, protocols, out);
  std::cout << format_table(r);
  std::size_t failed = 0;
  for (const auto& c : r.cells) failed += !c.ok;
  if (failed) std::cout << failed << " cell(s) failed; see " << (out / "cells.csv").string() << "\n";
  return 0;
}

struct GradcheckArgs {
  double eps = 1e-5;
  double tol = 1e-5;
  std::uint64_t seed = 7;
  std::string out;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  TinyDims dims;
  dims.seed = a.seed;
  const auto run = run_gradcheck(default_gradcheck_cells(dims), a.eps, a.tol);
  for (const auto& c : run.cells) {
    const auto* worst = c.report.worst();
    std::cout << (c.report.passed ? "PASS " : "FAIL ") << c.name << "  max rel error "
              << c.report.max_rel_error;
    if (worst && !c.report.passed) std::cout << " at " << worst->name << "[" << worst->worst_index << "]";
    std::cout << "\n";
  }
  std::cout << (run.passed ? "all cells passed" : "gradient check FAILED") << " (max rel error "
            << run.max_rel_error << ", tolerance " << a.tol << ")\n";
  if (!a.out.empty()) {
    const fs::path out = output_path(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream(out) << to_json(run).dump(2) << "\n";
  }
  return run.passed ? 0 : kExitNumeric;
}

struct DumpArgs {
  std::string checkpoint;
  std::string dataset;
  std::string split = "test";
  std::string out = "attention.jsonl";
};

int cmd_dump(const DumpArgs& a) {
  const auto models = load_checkpoint(a.checkpoint);
  const auto ds = data::load_dataset(a.dataset);
  const batching::PreparedDataset prepared(ds);
  const auto idx = ds.indices(parse_split(a.split));
  const auto records = collect_attention(models, prepared, idx, models.config.train.eval_batch);
  const fs::path out = output_path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_jsonl(out, records);
  const auto s = summarize(records);
  std::cout << "wrote " << records.size() << " records to " << out.string() << "\n";
  if (s.active_frames) std::cout << "mean attention on the active hand " << s.active_hand_mass << "\n";
  if (s.event_sequences) std::cout << "mean temporal attention inside the event " << s.event_mass << "\n";
  return 0;
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("-c,--config", a.config_file, "Run config (JSON, versioned)");
  cmd->add_option("-s,--set", a.overrides, "Override a config value, e.g. train.lr=0.001")->allow_extra_args(false);
  cmd->add_option("-d,--dataset", a.dataset, "Dataset file");
  cmd->add_option("-o,--out", a.out, "Output directory (relative paths go under $" + std::string(kOutputRootEnv) + ")");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stream pose/RGB attention models: synthesis, training and evaluation"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("-t,--task", synth_args.task, "active-hand, temporal-event or combined");
  synth_cmd->add_option("--spec", synth_args.spec_file, "Synthetic spec (JSON)");
  synth_cmd->add_option("-s,--set", synth_args.overrides, "Override a spec value, e.g. seed=3")->allow_extra_args(false);
  synth_cmd->add_option("-o,--out", synth_args.out, "Output directory");
  synth_cmd->add_option("-n,--name", synth_args.name, "Dataset file stem");

  RunArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_run_options(train_cmd, train_args);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint (5 windows per sequence)");
  eval_cmd->add_option("-k,--checkpoint", eval_args.checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("-d,--dataset", eval_args.dataset, "Dataset file")->required();
  eval_cmd->add_option("--split", eval_args.split, "train, val or test");
  eval_cmd->add_option("-o,--out", eval_args.out, "Directory for eval.json and predictions.csv");

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run the conditioning ablation grid");
  add_run_options(ablate_cmd, ablate_args.run);
  ablate_cmd->add_option("--cs", ablate_args.cs, "Dataset for the first protocol")->required();
  ablate_cmd->add_option("--cv", ablate_args.cv, "Dataset for the second protocol")->required();
  ablate_cmd->add_option("--table", ablate_args.table, "rgb (RGB stream only) or fused (with pose stream)");
  ablate_cmd->add_option("--rows", ablate_args.rows, "Subset of rows, e.g. sum sta-pose")->delimiter(',');
  ablate_cmd->add_option("--seeds", ablate_args.seeds, "Seeds per cell")->delimiter(',');
  ablate_cmd->add_option("-j,--workers", ablate_args.workers, "Concurrent cells (0: all cores)");
  ablate_cmd->add_flag("--no-dumps", ablate_args.no_dumps, "Skip per-cell attention dumps");

  GradcheckArgs gc_args;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every model variant");
  gc_cmd->add_option("--eps", gc_args.eps, "Central-difference step")->check(CLI::Range(1e-7, 1e-3));
  gc_cmd->add_option("--tol", gc_args.tol, "Maximum relative error");
  gc_cmd->add_option("--seed", gc_args.seed, "Seed for parameters and inputs");
  gc_cmd->add_option("-o,--out", gc_args.out, "JSON report path");

  DumpArgs dump_args;
  auto* dump_cmd = app.add_subcommand("dump-attention", "Write per-sequence attention as JSON lines");
  dump_cmd->add_option("-k,--checkpoint", dump_args.checkpoint, "Checkpoint directory")->required();
  dump_cmd->add_option("-d,--dataset", dump_args.dataset, "Dataset file")->required();
  dump_cmd->add_option("--split", dump_args.split, "train, val or test");
  dump_cmd->add_option("-o,--out", dump_args.out, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth_args);
    if (*train_cmd) return cmd_train(train_args);
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*ablate_cmd) return cmd_ablate(ablate_args);
    if (*gc_cmd) return cmd_gradcheck(gc_args);
    if (*dump_cmd) return cmd_dump(dump_args);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const data::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
