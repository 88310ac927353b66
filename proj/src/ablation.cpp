#include "poseattn/ablation.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "poseattn/attention_dump.hpp"
#include "poseattn/parallel.hpp"
#include "poseattn/train.hpp"

namespace poseattn {

namespace {

using model::Conditioning;
using model::Pooling;

std::string cell_name(const std::string& row, const std::string& protocol, std::uint64_t seed) {
  return row + "-" + protocol + "-s" + std::to_string(seed);
}

config::RunConfig cell_config(const AblationConfig& cfg, const AblationRow& row,
                              std::uint64_t seed) {
  config::RunConfig c = cfg.base;
  c.model = config::ModelVariant::RgbOnly;
  c.rgb.conditioning = row.conditioning;
  c.rgb.pooling = row.pooling;
  c.train.seed = seed;
  return c;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::vector<AblationRow> rgb_ablation_rows() {
  return {
      {"sum", "Sum", Conditioning::SumBaseline, Pooling::PerStep},
      {"concat", "Concat", Conditioning::ConcatBaseline, Pooling::PerStep},
      {"sa-hidden", "SA-Hands (hidden)", Conditioning::HiddenState, Pooling::PerStep},
      {"sa-pose", "SA-Hands (pose)", Conditioning::AugmentedPose, Pooling::PerStep},
      {"sa-both", "SA-Hands (both)", Conditioning::Both, Pooling::PerStep},
      {"ta", "TA-Hands", Conditioning::SumBaseline, Pooling::Attention},
      {"sta-hidden", "STA-Hands (hidden)", Conditioning::HiddenState, Pooling::Attention},
      {"sta-pose", "STA-Hands (pose)", Conditioning::AugmentedPose, Pooling::Attention},
      {"sta-both", "STA-Hands (both)", Conditioning::Both, Pooling::Attention},
  };
}

std::vector<AblationRow> fused_ablation_rows() {
  auto rows = rgb_ablation_rows();
  rows.erase(rows.begin() + 1);  // Concat
  rows.front().label = "Sum-Hands";
  return rows;
}

const AblationRow& find_row(const std::string& key) {
  static const auto rows = rgb_ablation_rows();
  for (const auto& r : rows) {
    if (r.key == key) return r;
  }
  throw std::invalid_argument("unknown ablation row '" + key + "'");
}

AblationResult run_ablation(const AblationConfig& cfg, const std::vector<Protocol>& protocols,
                            const std::filesystem::path& out_dir) {
  if (protocols.empty()) throw std::invalid_argument("ablation needs at least one protocol");
  if (cfg.seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  const auto table = cfg.fused ? fused_ablation_rows() : rgb_ablation_rows();
  std::vector<AblationRow> rows;
  if (cfg.rows.empty()) {
    rows = table;
  } else {
    for (const auto& key : cfg.rows) {
      bool found = false;
      for (const auto& r : table) {
        if (r.key == key) {
          rows.push_back(r);
          found = true;
        }
      }
      if (!found) throw std::invalid_argument("row '" + key + "' is not part of this table");
    }
  }

  AblationResult result;
  for (const auto& p : protocols) result.protocols.push_back(p.name);
  const std::filesystem::path cell_root = out_dir.empty() ? out_dir : out_dir / "cells";

  // The pose stream is shared by every row of the fused table, so it is
  // trained once per (protocol, seed).
  const std::size_t n_seeds = cfg.seeds.size();
  std::vector<std::optional<Models>> pose_models(protocols.size() * n_seeds);
  std::vector<CellResult> pose_cells(pose_models.size());
  if (cfg.fused) {
    parallel_for(pose_models.size(), cfg.workers, [&](std::size_t job) {
      const auto& proto = protocols[job / n_seeds];
      const auto seed = cfg.seeds[job % n_seeds];
      CellResult& cell = pose_cells[job];
      cell.row = "pose";
      cell.protocol = proto.name;
      cell.seed = seed;
      try {
        config::RunConfig c = cfg.base;
        c.model = config::ModelVariant::PoseOnly;
        c.train.seed = seed;
        const auto dir = cell_root.empty() ? cell_root : cell_root / cell_name("pose", proto.name, seed);
        auto r = run_train(c, *proto.data, dir, proto.dataset_hash);
        cell.ok = true;
        cell.accuracy = cell.pose_accuracy = r.test ? r.test->accuracy : 0.0;
        pose_models[job] = std::move(r.models);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    });
  }

  const std::size_t per_row = protocols.size() * n_seeds;
  result.cells.resize(rows.size() * per_row);
  parallel_for(result.cells.size(), cfg.workers, [&](std::size_t job) {
    const auto& row = rows[job / per_row];
    const std::size_t pj = job % per_row;
    const auto& proto = protocols[pj / n_seeds];
    const auto seed = cfg.seeds[pj % n_seeds];
    CellResult& cell = result.cells[job];
    cell.row = row.key;
    cell.protocol = proto.name;
    cell.seed = seed;
    try {
      const auto dir = cell_root.empty() ? cell_root : cell_root / cell_name(row.key, proto.name, seed);
      auto r = run_train(cell_config(cfg, row, seed), *proto.data, dir, proto.dataset_hash);
      cell.rgb_accuracy = r.test ? r.test->accuracy : 0.0;
      cell.accuracy = cell.rgb_accuracy;
      Models eval_models = r.models;
      if (cfg.fused) {
        const auto& pose = pose_models[pj];
        if (!pose) throw std::runtime_error("pose stream cell failed: " + pose_cells[pj].error);
        eval_models.pose = pose->pose;
        eval_models.config.model = config::ModelVariant::TwoStream;
        const auto test_idx = proto.data->dataset().indices(data::Split::Test);
        const auto fused = evaluate(eval_models, *proto.data, test_idx, cfg.base.train.eval_batch);
        cell.accuracy = fused.accuracy;
        cell.pose_accuracy = fused.pose_accuracy;
        if (!dir.empty()) {
          std::ofstream(dir / "fused.json")
              << nlohmann::json{{"fused_accuracy", fused.accuracy},
                                {"rgb_accuracy", fused.rgb_accuracy},
                                {"pose_accuracy", fused.pose_accuracy}}
                     .dump(2)
              << "\n";
        }
      }
      if (cfg.dumps && !dir.empty()) {
        const auto test_idx = proto.data->dataset().indices(data::Split::Test);
        write_jsonl(dir / "attention.jsonl",
                    collect_attention(eval_models, *proto.data, test_idx, cfg.base.train.eval_batch));
      }
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });

  for (const auto& row : rows) {
    RowSummary s;
    s.key = row.key;
    s.label = row.label;
    double total = 0.0;
    for (const auto& proto : protocols) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& c : result.cells) {
        if (c.row != row.key || c.protocol != proto.name) continue;
        if (c.ok) {
          sum += c.accuracy;
          ++n;
        } else {
          s.complete = false;
        }
      }
      const double mean = n ? sum / static_cast<double>(n) : 0.0;
      s.protocol_means.push_back(mean);
      total += mean;
    }
    s.average = total / static_cast<double>(protocols.size());
    result.rows.push_back(std::move(s));
  }
  if (cfg.fused) {
    for (std::size_t p = 0; p < protocols.size(); ++p) {
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t k = 0; k < n_seeds; ++k) {
        const auto& c = pose_cells[p * n_seeds + k];
        if (c.ok) {
          sum += c.accuracy;
          ++n;
        }
      }
      result.pose_means.push_back(n ? sum / static_cast<double>(n) : 0.0);
    }
    result.cells.insert(result.cells.begin(), pose_cells.begin(), pose_cells.end());
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    {
      std::ofstream out(out_dir / "cells.csv");
      out << "row,protocol,seed,status,accuracy,rgb_accuracy,pose_accuracy,error\n";
      for (const auto& c : result.cells) {
        std::string err = c.error;
        for (auto& ch : err) {
          if (ch == ',' || ch == '\n') ch = ';';
        }
        out << c.row << ',' << c.protocol << ',' << c.seed << ',' << (c.ok ? "ok" : "failed") << ','
            << format_double(c.accuracy) << ',' << format_double(c.rgb_accuracy) << ','
            << format_double(c.pose_accuracy) << ',' << err << '\n';
      }
    }
    {
      std::ofstream out(out_dir / "table.csv");
      out << "row,label";
      for (const auto& p : result.protocols) out << ',' << p;
      out << ",avg,complete\n";
      for (const auto& r : result.rows) {
        out << r.key << ',' << r.label;
        for (double m : r.protocol_means) out << ',' << format_double(m);
        out << ',' << format_double(r.average) << ',' << (r.complete ? "yes" : "no") << '\n';
      }
    }
    std::ofstream(out_dir / "table.txt") << format_table(result);
  }
  return result;
}

std::string format_table(const AblationResult& r) {
  std::ostringstream os;
  os << pad("method", 22);
  for (const auto& p : r.protocols) os << pad(p, 9);
  os << "Avg\n";
  auto line = [&](const std::string& label, const std::vector<double>& means, double avg,
                  bool complete) {
    os << pad(label, 22);
    for (double m : means) os << pad(percent(m), 9);
    os << percent(avg) << (complete ? "" : "  (FAILED cells)") << '\n';
  };
  for (const auto& row : r.rows) line(row.label, row.protocol_means, row.average, row.complete);
  if (!r.pose_means.empty()) {
    double avg = 0.0;
    for (double m : r.pose_means) avg += m;
    avg /= static_cast<double>(r.pose_means.size());
    line("(pose stream alone)", r.pose_means, avg, true);
  }
  return os.str();
}

}  // namespace poseattn
