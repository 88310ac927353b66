#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "poseattn/batching.hpp"
#include "poseattn/checkpoint.hpp"

namespace poseattn {

struct SequencePrediction {
  std::uint32_t id = 0;
  int label = 0;
  int predicted = 0;
  std::vector<std::size_t> window_starts;
  // Per stream: one logit row per window, and their average.
  std::vector<std::vector<double>> rgb_window_logits;
  std::vector<std::vector<double>> pose_window_logits;
  std::vector<double> rgb_logits;
  std::vector<double> pose_logits;
  std::vector<double> logits;  // fused when both streams exist
};

struct EvalResult {
  double accuracy = 0.0;
  double rgb_accuracy = -1.0;   // -1 when the stream is absent
  double pose_accuracy = -1.0;
  std::vector<SequencePrediction> predictions;
};

// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> v);

/// Five evenly spaced windows per sequence; per-stream logits are averaged
/// over the windows, then summed across streams, then argmaxed.
EvalResult evaluate(const Models& models, const batching::PreparedDataset& data,
                    std::span<const std::size_t> sequences, std::size_t batch_size = 128);

// Same protocol restricted to one stream; used for early stopping.
enum class StreamKind { Rgb, Pose };
struct StreamScore {
  double accuracy = 0.0;
  double loss = 0.0;  // mean cross-entropy of the window-averaged logits
};
StreamScore stream_score(const Models& models, StreamKind stream,
                         const batching::PreparedDataset& data,
                         std::span<const std::size_t> sequences, std::size_t batch_size = 128);
double stream_accuracy(const Models& models, StreamKind stream,
                       const batching::PreparedDataset& data,
                       std::span<const std::size_t> sequences, std::size_t batch_size = 128);

}  // namespace poseattn
