#include "poseattn/train.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "poseattn/parallel.hpp"
#include "poseattn/pose.hpp"

namespace poseattn {

namespace {

using batching::WindowRef;

struct StreamState {
  StreamKind kind;
  std::string name;
  std::vector<NamedTensor> params;
  nn::AdamState* adam;
  double best = -1.0;
  double best_loss = 0.0;
  std::vector<std::vector<double>> best_params;
  std::optional<nn::AdamState> best_adam;
};

void save_best(const std::filesystem::path& out_dir, const Models& models, StreamState& s,
               const std::string& dataset_hash) {
  if (out_dir.empty()) return;
  // Swap the best values in, save, and swap the live values back.
  auto live = snapshot(s.params);
  nn::AdamState live_adam = *s.adam;
  restore(s.params, s.best_params);
  *s.adam = *s.best_adam;
  save_checkpoint(out_dir / "checkpoint", models, {{"dataset_hash", dataset_hash}});
  restore(s.params, live);
  *s.adam = std::move(live_adam);
}

void train_stream(Models& models, StreamState& s, const batching::PreparedDataset& data,
                  const std::vector<std::size_t>& train_idx, const std::vector<std::size_t>& val_idx,
                  const config::RunConfig& cfg, const std::filesystem::path& out_dir,
                  const std::string& dataset_hash, TrainResult& result,
                  const TrainOptions& options) {
  const std::uint64_t salt = s.kind == StreamKind::Rgb ? 0x1 : 0x2;
  Rng order_rng(derive_seed(cfg.train.seed, 0x0dd, salt));
  Rng dropout_rng(derive_seed(cfg.train.seed, 0xd0, salt));
  const nn::Dropout dropout{cfg.train.dropout, true, &dropout_rng};
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.train.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = train_idx;
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.train.batch) {
        const std::size_t end = std::min(order.size(), start + cfg.train.batch);
        std::vector<WindowRef> windows;
        windows.reserve(end - start);
        for (std::size_t i = start; i < end; ++i) {
          auto frames = pose::sample_subsequences(data.record(order[i]).length(), cfg.window,
                                                  pose::SampleMode::Train, &order_rng);
          windows.push_back({order[i], std::move(frames.front())});
        }
        const auto labels = batching::batch_labels(data, windows);
        Graph graph;
        Graph::Scope scope(graph);
        const model::StreamOutput out =
            s.kind == StreamKind::Rgb
                ? models.rgb->forward(batching::rgb_batch(data, windows), dropout)
                : models.pose->forward(batching::pose_batch(data, windows), dropout);
        Tensor loss = model::stream_loss(out, labels);
        graph.backward(loss);
        nn::adam_step(*s.adam, s.params);
        nn::zero_grads(s.params);
        loss_sum += loss.item() * static_cast<double>(windows.size());
      }
    } catch (const NumericError&) {
      if (s.best_adam) {
        restore(s.params, s.best_params);
        *s.adam = *s.best_adam;
      }
      if (!out_dir.empty()) {
        save_checkpoint(out_dir / "checkpoint", models,
                        {{"dataset_hash", dataset_hash}, {"aborted", "non-finite loss"}});
      }
      throw;
    }

    EpochRecord rec;
    rec.stream = s.name;
    rec.epoch = epoch;
    rec.train_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());
    if (!val_idx.empty()) {
      const auto score = stream_score(models, s.kind, data, val_idx, cfg.train.eval_batch);
      rec.val_accuracy = score.accuracy;
      rec.val_loss = score.loss;
    }
    // Accuracy ties go to the lower validation loss. Without a validation
    // split the latest epoch is kept.
    rec.improved = val_idx.empty() || rec.val_accuracy > s.best ||
                   (rec.val_accuracy == s.best && rec.val_loss < s.best_loss);
    if (rec.improved) {
      s.best = rec.val_accuracy;
      s.best_loss = rec.val_loss;
      s.best_params = snapshot(s.params);
      s.best_adam = *s.adam;
      since_best = 0;
      save_best(out_dir, models, s, dataset_hash);
    } else {
      ++since_best;
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
    if (since_best >= cfg.train.patience) break;
  }
  if (s.best_adam) {
    restore(s.params, s.best_params);
    *s.adam = *s.best_adam;
  }
}

void write_timing(const std::filesystem::path& path, const TrainResult& r) {
  std::ofstream out(path);
  out << "stream,epoch,seconds\n";
  for (const auto& e : r.epochs) out << e.stream << ',' << e.epoch << ',' << e.seconds << '\n';
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_metrics_csv(const std::filesystem::path& path, const TrainResult& r) {
  std::ofstream out(path);
  if (!out) throw data::DataError("cannot write " + path.string());
  out << "kind,stream,epoch,train_loss,val_loss,val_accuracy,test_accuracy\n";
  for (const auto& e : r.epochs) {
    out << "epoch," << e.stream << ',' << e.epoch << ',' << format_double(e.train_loss) << ','
        << format_double(e.val_loss) << ',' << format_double(e.val_accuracy) << ",\n";
  }
  auto final_row = [&](const char* stream, double val, double test) {
    out << "final," << stream << ",,,," << (val >= 0 ? format_double(val) : "") << ','
        << (test >= 0 ? format_double(test) : "") << '\n';
  };
  const auto& v = r.validation;
  const auto& t = r.test;
  if (r.models.rgb) {
    final_row("rgb", v ? v->rgb_accuracy : -1.0, t ? t->rgb_accuracy : -1.0);
  }
  if (r.models.pose) {
    final_row("pose", v ? v->pose_accuracy : -1.0, t ? t->pose_accuracy : -1.0);
  }
  final_row("fused", v ? v->accuracy : -1.0, t ? t->accuracy : -1.0);
}

TrainResult run_train(const config::RunConfig& cfg, const batching::PreparedDataset& data,
                      const std::filesystem::path& out_dir, const std::string& dataset_hash,
                      const TrainOptions& options) {
  config::validate(cfg);
  const auto& ds = data.dataset();
  const auto train_idx = ds.indices(data::Split::Train);
  const auto val_idx = ds.indices(data::Split::Val);
  const auto test_idx = ds.indices(data::Split::Test);
  if (train_idx.empty()) throw data::DataError("dataset has no training sequences");

  TrainResult result;
  result.models = build_models(cfg, config::dims_from_dataset(ds));
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json run = {{"config", config::to_json(cfg)},
                          {"dims", config::to_json(result.models.dims)},
                          {"dataset_hash", dataset_hash}};
    std::ofstream(out_dir / "config.json") << run.dump(2) << "\n";
  }

  std::vector<StreamState> streams;
  if (result.models.rgb) {
    streams.push_back({StreamKind::Rgb, "rgb", result.models.rgb->parameters(),
                       &*result.models.rgb_adam, -1.0, 0.0, {}, std::nullopt});
  }
  if (result.models.pose) {
    streams.push_back({StreamKind::Pose, "pose", result.models.pose->parameters(),
                       &*result.models.pose_adam, -1.0, 0.0, {}, std::nullopt});
  }
  try {
    for (auto& s : streams) {
      train_stream(result.models, s, data, train_idx, val_idx, cfg, out_dir, dataset_hash, result,
                   options);
      (s.kind == StreamKind::Rgb ? result.best_val_rgb : result.best_val_pose) = s.best;
    }
  } catch (const NumericError&) {
    if (!out_dir.empty()) {
      write_metrics_csv(out_dir / "metrics.csv", result);
      write_timing(out_dir / "timing.csv", result);
    }
    throw;
  }

  if (!val_idx.empty()) result.validation = evaluate(result.models, data, val_idx, cfg.train.eval_batch);
  if (options.evaluate_test && !test_idx.empty()) {
    result.test = evaluate(result.models, data, test_idx, cfg.train.eval_batch);
  }
  if (!out_dir.empty()) {
    nlohmann::json extra = {{"dataset_hash", dataset_hash}};
    if (result.validation) extra["val_accuracy"] = result.validation->accuracy;
    if (result.test) extra["test_accuracy"] = result.test->accuracy;
    save_checkpoint(out_dir / "checkpoint", result.models, extra);
    write_metrics_csv(out_dir / "metrics.csv", result);
    write_timing(out_dir / "timing.csv", result);
  }
  return result;
}

}  // namespace poseattn
