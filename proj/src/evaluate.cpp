#include "poseattn/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "poseattn/pose.hpp"

namespace poseattn {

namespace {

using batching::WindowRef;

struct WindowPlan {
  std::vector<WindowRef> windows;  // sequence-major, kEvalWindows per sequence
};

WindowPlan plan_windows(const batching::PreparedDataset& data,
                        std::span<const std::size_t> sequences, std::size_t window) {
  WindowPlan plan;
  plan.windows.reserve(sequences.size() * pose::kEvalWindows);
  for (auto s : sequences) {
    auto frames =
        pose::sample_subsequences(data.record(s).length(), window, pose::SampleMode::Eval);
    for (auto& f : frames) plan.windows.push_back({s, std::move(f)});
  }
  return plan;
}

// Logits [windows, C] for one stream, computed in batches without a graph.
std::vector<std::vector<double>> window_logits(const Models& m, StreamKind stream,
                                               const batching::PreparedDataset& data,
                                               const std::vector<WindowRef>& windows,
                                               std::size_t batch_size) {
  std::vector<std::vector<double>> out;
  out.reserve(windows.size());
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const std::size_t end = std::min(windows.size(), start + batch_size);
    std::span<const WindowRef> chunk(windows.data() + start, end - start);
    Tensor logits = stream == StreamKind::Rgb
                        ? m.rgb->forward(batching::rgb_batch(data, chunk)).logits
                        : m.pose->forward(batching::pose_batch(data, chunk)).logits;
    const std::size_t c = logits.dim(1);
    auto v = logits.values();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(i * c),
                       v.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
    }
  }
  return out;
}

std::vector<double> average(std::span<const std::vector<double>> rows) {
  std::vector<double> mean(rows.front().size(), 0.0);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < r.size(); ++k) mean[k] += r[k];
  }
  for (auto& x : mean) x /= static_cast<double>(rows.size());
  return mean;
}

}  // namespace

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

EvalResult evaluate(const Models& models, const batching::PreparedDataset& data,
                    std::span<const std::size_t> sequences, std::size_t batch_size) {
  if (!models.rgb && !models.pose) throw std::invalid_argument("evaluate: no stream to evaluate");
  if (models.dims.classes != data.dataset().classes ||
      models.dims.hand_input_dim != data.dataset().feature_dim ||
      models.dims.pose_dim != data.pose_dim()) {
    throw data::DataError("evaluate: model dimensions do not match the dataset");
  }
  const auto plan = plan_windows(data, sequences, models.config.window);
  std::vector<std::vector<double>> rgb, pose;
  if (models.rgb) rgb = window_logits(models, StreamKind::Rgb, data, plan.windows, batch_size);
  if (models.pose) pose = window_logits(models, StreamKind::Pose, data, plan.windows, batch_size);

  EvalResult result;
  std::size_t correct = 0, rgb_correct = 0, pose_correct = 0;
  const std::size_t k = pose::kEvalWindows;
  result.predictions.reserve(sequences.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& rec = data.record(sequences[i]);
    SequencePrediction p;
    p.id = rec.id;
    p.label = rec.label();
    for (std::size_t w = 0; w < k; ++w) p.window_starts.push_back(plan.windows[i * k + w].frames.front());
    if (models.rgb) {
      p.rgb_window_logits.assign(rgb.begin() + static_cast<std::ptrdiff_t>(i * k),
                                 rgb.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
      p.rgb_logits = average(p.rgb_window_logits);
      rgb_correct += argmax(p.rgb_logits) == p.label;
    }
    if (models.pose) {
      p.pose_window_logits.assign(pose.begin() + static_cast<std::ptrdiff_t>(i * k),
                                  pose.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
      p.pose_logits = average(p.pose_window_logits);
      pose_correct += argmax(p.pose_logits) == p.label;
    }
    if (models.rgb && models.pose) {
      // Logit-level fusion by summation.
      p.logits.resize(p.rgb_logits.size());
      for (std::size_t c = 0; c < p.logits.size(); ++c) p.logits[c] = p.rgb_logits[c] + p.pose_logits[c];
    } else {
      p.logits = models.rgb ? p.rgb_logits : p.pose_logits;
    }
    p.predicted = argmax(p.logits);
    correct += p.predicted == p.label;
    result.predictions.push_back(std::move(p));
  }
  const double n = static_cast<double>(std::max<std::size_t>(sequences.size(), 1));
  result.accuracy = static_cast<double>(correct) / n;
  if (models.rgb) result.rgb_accuracy = static_cast<double>(rgb_correct) / n;
  if (models.pose) result.pose_accuracy = static_cast<double>(pose_correct) / n;
  return result;
}

StreamScore stream_score(const Models& models, StreamKind stream,
                         const batching::PreparedDataset& data,
                         std::span<const std::size_t> sequences, std::size_t batch_size) {
  StreamScore score;
  if (sequences.empty()) return score;
  const auto plan = plan_windows(data, sequences, models.config.window);
  const auto logits = window_logits(models, stream, data, plan.windows, batch_size);
  const std::size_t k = pose::kEvalWindows;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto mean = average(std::span(logits).subspan(i * k, k));
    const int label = data.record(sequences[i]).label();
    correct += argmax(mean) == label;
    const double top = *std::max_element(mean.begin(), mean.end());
    double z = 0.0;
    for (double v : mean) z += std::exp(v - top);
    loss += top + std::log(z) - mean[static_cast<std::size_t>(label)];
  }
  const double n = static_cast<double>(sequences.size());
  score.accuracy = static_cast<double>(correct) / n;
  score.loss = loss / n;
  return score;
}

double stream_accuracy(const Models& models, StreamKind stream,
                       const batching::PreparedDataset& data,
                       std::span<const std::size_t> sequences, std::size_t batch_size) {
  return stream_score(models, stream, data, sequences, batch_size).accuracy;
}

}  // namespace poseattn
