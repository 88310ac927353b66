#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "poseattn/batching.hpp"
#include "poseattn/config.hpp"

namespace poseattn {

struct AblationRow {
  std::string key;    // e.g. "sta-pose"
  std::string label;  // e.g. "STA-Hands (pose)"
  model::Conditioning conditioning;
  model::Pooling pooling;
};

// Sum, Concat, SA x3, TA, STA x3 (RGB stream only).
std::vector<AblationRow> rgb_ablation_rows();
// Same rows without Concat; each is fused with a shared pose stream.
std::vector<AblationRow> fused_ablation_rows();
const AblationRow& find_row(const std::string& key);

struct Protocol {
  std::string name;  // "CS" or "CV"
  const batching::PreparedDataset* data = nullptr;
  std::string dataset_hash;
};

struct AblationConfig {
  config::RunConfig base;  // model variant and conditioning are set per cell
  bool fused = false;      // two-stream table: RGB rows plus the pose stream
  std::vector<std::string> rows;  // empty: every row of the table
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::size_t workers = 1;
  bool dumps = true;  // per-cell attention dumps on the test split
};

struct CellResult {
  std::string row;
  std::string protocol;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double accuracy = 0.0;  // fused accuracy in the two-stream table
  double rgb_accuracy = -1.0;
  double pose_accuracy = -1.0;
};

struct RowSummary {
  std::string key;
  std::string label;
  std::vector<double> protocol_means;  // per protocol, over seeds
  double average = 0.0;
  bool complete = true;
};

struct AblationResult {
  std::vector<std::string> protocols;
  std::vector<CellResult> cells;
  std::vector<RowSummary> rows;
  // Pose-only reference per protocol in the fused table.
  std::vector<double> pose_means;
};

/// Trains every (row, protocol, seed) cell with identical budgets on a pool
/// of workers. A failing cell is recorded and the grid continues. Writes
/// cells.csv, table.csv and table.txt plus one directory per cell when
/// out_dir is non-empty.
AblationResult run_ablation(const AblationConfig& cfg, const std::vector<Protocol>& protocols,
                            const std::filesystem::path& out_dir);

std::string format_table(const AblationResult& r);

}  // namespace poseattn
