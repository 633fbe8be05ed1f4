#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hjbpod/dynamics.hpp"
#include "hjbpod/feedback.hpp"
#include "hjbpod/hjb.hpp"
#include "hjbpod/rom.hpp"

namespace hjbpod {

struct SnapshotConfig {
  std::vector<double> controls;
  double dt = 0.05;
  WeightMode weights = WeightMode::kUniform;
  bool derivatives = false;
};

struct HjbConfig {
  std::vector<double> mesh_sizes{0.1};
  /// h = ratio * K; only the first entry is used outside h studies.
  std::vector<double> h_ratios{0.1};
  double margin = 0.1;
  double tol = 0.0;
  std::size_t max_iter = 0;
  std::size_t control_count = 21;
  double control_min = -1.0;
  double control_max = 1.0;
  Interpolation interpolation = Interpolation::kSimplex;
  std::size_t max_nodes = 20'000'000;
  std::size_t cache_mb = 768;
};

struct FeedbackConfig {
  PolicyMode policy = PolicyMode::kArgminOnline;
  double dt = 0.05;
  /// Amplitude 0 (noise free) is always simulated in addition.
  std::vector<double> noise_amplitudes;
  std::size_t noise_runs = 1;
  NoiseTarget noise_target = NoiseTarget::kMeasurement;
  std::uint64_t seed = 0;
  bool strict_reprojection = false;
};

struct AnalysisConfig {
  std::size_t proj_samples = 20;
  std::size_t constant_samples = 2000;
  /// "auto" picks analytic constants for linear systems.
  std::string constants = "auto";
  bool lqr = true;
};

struct OutputConfig {
  std::string directory = "out";
  bool trajectories = true;
  bool plots = true;
};

/// Everything one run needs. Spatial profiles are kept as their textual
/// specs (see sample_profile) and sampled by `pde_config()`.
struct ExperimentConfig {
  std::string name = "experiment";
  PdeConfig pde;
  std::string w0_spec = "zero";
  std::string shape_b_spec = "constant 1";
  std::string w_bar_spec = "zero";
  SnapshotConfig snapshots;
  std::vector<int> ells{2};
  HjbConfig hjb;
  FeedbackConfig feedback;
  AnalysisConfig analysis;
  OutputConfig output;

  /// pde with the profiles sampled on its grid.
  PdeConfig pde_config() const;
  ControlSet control_set() const;
  /// Throws ConfigError on the first violated invariant.
  void validate() const;
};

/// Reads an INI file with sections [experiment], [pde], [snapshots], [pod],
/// [hjb], [feedback], [analysis], [output]. Unknown keys are rejected.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);

/// Shipped presets: test1, test2, test3. Looked up in $HJBPOD_PRESETS and
/// then in the source tree's presets directory.
ExperimentConfig preset_config(const std::string& name);
std::string preset_path(const std::string& name);

}  // namespace hjbpod
