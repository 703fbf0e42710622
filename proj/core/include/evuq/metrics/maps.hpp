// Grid uncertainty maps, FGSM sweeps and heatmap files.
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evuq/data/dataset.hpp"
#include "evuq/models/networks.hpp"

namespace evuq::metrics {

/// Values over a grid in gen_grid scan order.
struct Heatmap {
  data::GridSpec grid;
  std::vector<double> values;
};

struct UncertaintyMaps {
  Heatmap entropy;
  /// Absent for softmax heads.
  std::optional<Heatmap> vacuity;
  std::optional<Heatmap> dissonance;
};

/// Worker count: EVUQ_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
unsigned worker_count();

/// Evaluates the classifier once per grid point. Inference chunks of the grid
/// are split across `threads` workers (0 = worker_count()); the result does
/// not depend on the split.
UncertaintyMaps uncertainty_maps(const models::Classifier& f,
                                 const data::GridSpec& grid, unsigned threads = 0);

struct SweepRow {
  double epsilon = 0.0;
  double accuracy = 0.0;
  double mean_entropy = 0.0;
};

/// One row per epsilon. Epsilons must lie in [0, 0.5] and not decrease.
std::vector<SweepRow> fgsm_sweep(const models::Classifier& f,
                                 const data::Dataset& test,
                                 std::span<const double> epsilons);
/// Header epsilon,accuracy,mean_entropy.
void write_sweep_csv(const std::vector<SweepRow>& rows,
                     const std::filesystem::path& path);

class HeatmapFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// CSV text: a "# grid ..." line, the header x,y,value, then one row per
/// point in scan order.
std::string heatmap_csv(const Heatmap& map);
Heatmap parse_heatmap_csv(const std::string& text);
Heatmap load_heatmap_csv(const std::filesystem::path& path);

/// Plain P2 greymap, row 0 at y_max. Values are clamped to [0, 1] and
/// mapped with floor(255 v + 0.5).
std::string heatmap_pgm(const Heatmap& map);

/// Writes both files. Throws std::runtime_error when a path is unwritable.
void export_heatmap(const Heatmap& map, const std::filesystem::path& csv_path,
                    const std::filesystem::path& pgm_path);

}  // namespace evuq::metrics
