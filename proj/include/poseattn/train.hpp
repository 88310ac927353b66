#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "poseattn/batching.hpp"
#include "poseattn/checkpoint.hpp"
#include "poseattn/config.hpp"
#include "poseattn/evaluate.hpp"

namespace poseattn {

struct EpochRecord {
  std::string stream;  // "rgb" or "pose"
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_loss = 0.0;
  bool improved = false;
  double seconds = 0.0;  // wall clock; kept out of metrics.csv
};

struct TrainOptions {
  std::function<void(const EpochRecord&)> on_epoch;
  bool evaluate_test = true;
};

struct TrainResult {
  Models models;  // best-validation parameters
  std::vector<EpochRecord> epochs;
  double best_val_rgb = -1.0;
  double best_val_pose = -1.0;
  std::optional<EvalResult> validation;
  std::optional<EvalResult> test;
};

/// Trains every stream of the config separately with Adam, one random
/// window per training sequence per epoch, and keeps the parameters with
/// the best validation accuracy (early stopping after `patience` epochs
/// without improvement). When `out_dir` is non-empty it receives
/// config.json, metrics.csv, timing.csv and checkpoint/. A non-finite loss
/// restores and saves the last good state, then rethrows NumericError.
TrainResult run_train(const config::RunConfig& cfg, const batching::PreparedDataset& data,
                      const std::filesystem::path& out_dir, const std::string& dataset_hash = "",
                      const TrainOptions& options = {});

// Writes the deterministic per-epoch and final metrics.
void write_metrics_csv(const std::filesystem::path& path, const TrainResult& result);

// %.17g, so that equal doubles print identically and round-trip.
std::string format_double(double v);

}  // namespace poseattn
