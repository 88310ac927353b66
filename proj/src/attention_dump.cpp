#include "poseattn/attention_dump.hpp"

#include <fstream>

#include "poseattn/evaluate.hpp"
#include "poseattn/pose.hpp"

namespace poseattn {

std::vector<AttentionRecord> collect_attention(const Models& models,
                                               const batching::PreparedDataset& data,
                                               std::span<const std::size_t> sequences,
                                               std::size_t batch_size) {
  if (!models.rgb) throw std::invalid_argument("attention dump needs an RGB stream");
  const auto eval = evaluate(models, data, sequences, batch_size);
  const std::size_t window = models.config.window;
  const std::size_t middle = pose::kEvalWindows / 2;

  std::vector<AttentionRecord> out(sequences.size());
  std::vector<batching::WindowRef> windows(sequences.size());
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const auto& rec = data.record(sequences[i]);
    auto frames = pose::sample_subsequences(rec.length(), window, pose::SampleMode::Eval);
    windows[i] = {sequences[i], std::move(frames[middle])};
    auto& r = out[i];
    r.sequence_id = rec.id;
    r.label = rec.label();
    r.predicted = eval.predictions[i].predicted;
    r.window_start = windows[i].frames.front();
    for (auto f : windows[i].frames) {
      r.active_slot.push_back(rec.active_slot[f]);
      r.in_event.push_back(rec.event_start >= 0 && static_cast<long>(f) >= rec.event_start &&
                           static_cast<long>(f) < rec.event_start + static_cast<long>(rec.event_length));
    }
  }
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const std::size_t end = std::min(windows.size(), start + batch_size);
    std::span<const batching::WindowRef> chunk(windows.data() + start, end - start);
    const auto o = models.rgb->forward(batching::rgb_batch(data, chunk));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      auto& r = out[start + i];
      if (o.spatial_attention.defined()) {
        auto v = o.spatial_attention.values();
        r.p.resize(window);
        for (std::size_t t = 0; t < window; ++t) {
          for (std::size_t k = 0; k < 4; ++k) r.p[t][k] = v[(i * window + t) * 4 + k];
        }
      }
      if (o.temporal_attention.defined()) {
        auto v = o.temporal_attention.values();
        r.p_prime.assign(v.begin() + static_cast<std::ptrdiff_t>(i * window),
                         v.begin() + static_cast<std::ptrdiff_t>((i + 1) * window));
      }
    }
  }
  return out;
}

AttentionSummary summarize(std::span<const AttentionRecord> records) {
  AttentionSummary s;
  double hand = 0.0, event = 0.0;
  for (const auto& r : records) {
    if (!r.p.empty()) {
      for (std::size_t t = 0; t < r.active_slot.size(); ++t) {
        if (r.active_slot[t] < 0) continue;
        hand += r.p[t][static_cast<std::size_t>(r.active_slot[t])];
        ++s.active_frames;
      }
    }
    bool has_event = false;
    double mass = 0.0;
    for (std::size_t t = 0; t < r.in_event.size(); ++t) {
      if (!r.in_event[t]) continue;
      has_event = true;
      if (!r.p_prime.empty()) mass += r.p_prime[t];
    }
    if (has_event && !r.p_prime.empty()) {
      event += mass;
      ++s.event_sequences;
    }
  }
  if (s.active_frames) s.active_hand_mass = hand / static_cast<double>(s.active_frames);
  if (s.event_sequences) s.event_mass = event / static_cast<double>(s.event_sequences);
  return s;
}

nlohmann::json to_json(const AttentionRecord& r) {
  nlohmann::json j;
  j["sequence_id"] = r.sequence_id;
  j["true"] = r.label;
  j["predicted"] = r.predicted;
  j["window_start"] = r.window_start;
  j["p"] = r.p;
  j["p_prime"] = r.p_prime;
  j["active_slot"] = r.active_slot;
  std::vector<int> event;
  for (bool b : r.in_event) event.push_back(b ? 1 : 0);
  j["event"] = event;
  return j;
}

void write_jsonl(const std::filesystem::path& path, std::span<const AttentionRecord> records) {
  std::ofstream out(path);
  if (!out) throw data::DataError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

}  // namespace poseattn
