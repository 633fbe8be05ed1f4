#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hjbpod/analysis.hpp"
#include "hjbpod/config.hpp"

namespace hjbpod {

struct RunOptions {
  /// Overrides config.output.directory when nonempty.
  std::string out_dir;
  /// Directories for value grid files value_l<ell>_K<K>.bin.
  std::string value_in;
  std::string value_out;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  /// Progress messages; null silences them.
  std::ostream* log = nullptr;
};

/// Closed-loop outcome of one noisy run.
struct NoiseRun {
  int ell = 0;
  double mesh_size = 0.0;
  double amplitude = 0.0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double final_l2 = 0.0;
  double cost = 0.0;
  bool controls_in_bounds = true;
};

/// Value-iteration record of one cell (empty history for loaded grids).
struct CellDiagnostics {
  int ell = 0;
  double mesh_size = 0.0;
  double h = 0.0;
  double lambda = 0.0;
  std::vector<double> residual_history;
  double cost_bound = 0.0;
  double min_value = 0.0;
  double max_value = 0.0;
  std::size_t out_of_box_targets = 0;
  /// Wall time of the whole cell (value iteration, closed loop, noise runs).
  double seconds = 0.0;
};

struct ExperimentResult {
  ErrorReport report;
  std::vector<CellDiagnostics> cells;
  std::vector<NoiseRun> noise_runs;
  /// Snapshot spectrum.
  Vector eigenvalues;
  double uncontrolled_cost = 0.0;
  double uncontrolled_final_l2 = 0.0;
  bool has_lqr = false;
  double lqr_cost = 0.0;
  double lqr_clipped_cost = 0.0;
  /// Frobenius CARE residual relative to ||Q||_F.
  double care_residual = 0.0;
  EstimateConstants constants;
  std::size_t failed_cells = 0;

  bool ok() const { return failed_cells == 0; }
};

/// Snapshots, POD, reduced box and grid, value iteration, closed loop and
/// metrics for every (ell, K) pair. A failing cell is recorded with its
/// error message in the status column and the others still run. Writes
/// report.csv, summary.txt, spectrum.csv, trajectories, noise.csv and
/// plots.py into the output directory.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

enum class StudyAxis { kEll, kMeshSize, kTimeStep };

StudyAxis parse_study_axis(const std::string& name);

struct StudyRow {
  double axis_value = 0.0;
  ErrorRow row;
};

struct StudyTable {
  StudyAxis axis = StudyAxis::kEll;
  std::vector<StudyRow> rows;
  bool cost_nonincreasing = false;
  bool gap_nonincreasing = false;
  bool proj_sup_nonincreasing = false;
};

/// Varies one of ell, K or h (through h_ratio) and fixes the others at the
/// largest ell and the first K and h_ratio of the config. Needs at least two
/// values on the chosen axis; throws ConfigError otherwise.
StudyTable convergence_study(const ExperimentConfig& config, StudyAxis axis,
                             const RunOptions& options = {});

void write_study_csv(std::ostream& out, const StudyTable& table);

}  // namespace hjbpod
