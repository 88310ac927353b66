#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "poseattn/gradcheck.hpp"

namespace poseattn {

// A named scalar loss over named parameters. The loss closure owns whatever
// model state it needs.
struct GradCheckCell {
  std::string name;
  std::function<Tensor()> loss;
  std::vector<NamedTensor> params;
};

struct TinyDims {
  std::size_t window = 3;
  std::size_t feature_dim = 4;
  std::size_t hidden = 5;
  std::size_t classes = 2;
  std::size_t batch = 2;
  std::size_t joints = 1;  // pose_dim = 6, augmented pose 18
  std::size_t spatial_hidden = 3;
  std::size_t temporal_hidden = 3;
  std::size_t pose_hidden = 4;
  std::size_t pose_layers = 2;
  std::uint64_t seed = 7;
};

/// Every conditioning variant with and without temporal attention, plus the
/// pose stream: 11 cells. Parameters are randomized (including the
/// zero-initialized attention heads) so that no gradient is trivially zero.
std::vector<GradCheckCell> default_gradcheck_cells(const TinyDims& dims = {});

struct CellReport {
  std::string name;
  GradCheckReport report;
  double seconds = 0.0;
};

struct GradCheckRun {
  std::vector<CellReport> cells;
  bool passed = true;
  double max_rel_error = 0.0;
};

GradCheckRun run_gradcheck(const std::vector<GradCheckCell>& cells, double eps = 1e-5,
                           double tol = 1e-5);

nlohmann::json to_json(const GradCheckRun& run);

}  // namespace poseattn
