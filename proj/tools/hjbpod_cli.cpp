#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hjbpod/config.hpp"
#include "hjbpod/errors.hpp"
#include "hjbpod/experiment.hpp"
#include "hjbpod/io.hpp"

namespace {

constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config;
  std::string preset;
  std::string out;
  std::string value_in;
  std::string value_out;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  auto* cfg = cmd->add_option("--config", c.config, "Experiment INI file");
  auto* pre = cmd->add_option("--preset", c.preset, "Shipped preset")
                  ->check(CLI::IsMember({"test1", "test2", "test3"}));
  cfg->excludes(pre);
  cmd->add_option("--out", c.out, "Output directory (overrides the config)");
  cmd->add_option("--value-in", c.value_in, "Directory with stored value grids")
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--value-out", c.value_out, "Directory for computed value grids");
  cmd->add_option("--seed", c.seed, "Noise and sampling seed");
  cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("-q,--quiet", c.quiet, "No progress output");
}

hjbpod::ExperimentConfig resolve(const Common& c) {
  if (c.config.empty() == c.preset.empty()) {
    throw hjbpod::ConfigError("give exactly one of --config or --preset");
  }
  return c.config.empty() ? hjbpod::preset_config(c.preset) : hjbpod::load_config(c.config);
}

hjbpod::RunOptions run_options(const Common& c) {
  hjbpod::RunOptions o;
  o.out_dir = c.out;
  o.value_in = c.value_in;
  o.value_out = c.value_out;
  o.seed = c.seed;
  o.workers = c.workers;
  o.log = c.quiet ? nullptr : &std::clog;
  return o;
}

int cmd_run(const Common& c) {
  const auto config = resolve(c);
  const auto result = hjbpod::run_experiment(config, run_options(c));
  std::cout << hjbpod::format_error_report(result.report);
  std::cout << "uncontrolled final L2 " << result.uncontrolled_final_l2 << ", cost "
            << result.uncontrolled_cost << '\n';
  if (result.has_lqr) {
    std::cout << "LQR cost " << result.lqr_cost << ", clipped " << result.lqr_clipped_cost << '\n';
  }
  if (!result.noise_runs.empty()) {
    std::map<double, std::pair<std::size_t, std::size_t>> below;
    for (const auto& r : result.noise_runs) {
      auto& [hit, total] = below[r.amplitude];
      hit += r.final_l2 < result.uncontrolled_final_l2 ? 1 : 0;
      ++total;
    }
    for (const auto& [a, counts] : below) {
      std::cout << "noise " << a << ": " << counts.first << "/" << counts.second
                << " runs end below the uncontrolled norm\n";
    }
  }
  return result.ok() ? 0 : kExitPartial;
}

int cmd_study(const Common& c, const std::string& axis) {
  const auto config = resolve(c);
  const auto table = hjbpod::convergence_study(config, hjbpod::parse_study_axis(axis), run_options(c));
  hjbpod::write_study_csv(std::cout, table);
  const auto out = c.out.empty() ? config.output.directory : c.out;
  std::ofstream file(std::filesystem::path(out) / ("study_" + axis + ".csv"));
  hjbpod::write_study_csv(file, table);
  const bool ok = std::all_of(table.rows.begin(), table.rows.end(),
                              [](const auto& r) { return r.row.status == "ok"; });
  return ok ? 0 : kExitPartial;
}

int cmd_inspect(const std::string& path) {
  const auto grid = hjbpod::load_value_grid(path);
  std::cout << "dim " << grid.dim() << ", nodes " << grid.size() << ", K " << grid.mesh_size()
            << ", h " << grid.h() << ", lambda " << grid.lambda() << '\n';
  for (int j = 0; j < grid.dim(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    std::cout << "  axis " << j << ": [" << grid.box().lower[ju] << ", " << grid.box().upper[ju]
              << "], " << grid.counts()[ju] << " nodes\n";
  }
  std::cout << "converged " << (grid.converged ? "yes" : "no") << " after " << grid.iterations
            << " sweeps, residual " << grid.residual << '\n';
  const auto [lo, hi] = std::minmax_element(grid.values().begin(), grid.values().end());
  std::cout << "values in [" << *lo << ", " << *hi << "]\n";
  std::map<std::uint32_t, std::size_t> hist;
  for (auto k : grid.policy()) ++hist[k];
  std::cout << "policy indices:";
  for (const auto& [k, n] : hist) std::cout << ' ' << k << ':' << n;
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HJB-POD feedback control experiments"};
  app.require_subcommand(1);

  Common run_args;
  auto* run = app.add_subcommand("run", "Run every (ell, K) cell of an experiment");
  add_common(run, run_args);

  Common study_args;
  std::string axis = "ell";
  auto* study = app.add_subcommand("study", "Convergence study along one axis");
  add_common(study, study_args);
  study->add_option("--axis", axis, "ell, K or h")->check(CLI::IsMember({"ell", "K", "h"}));

  std::string value_file;
  auto* inspect = app.add_subcommand("inspect-value", "Describe a stored value grid");
  inspect->add_option("file", value_file, "Value grid file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*study) return cmd_study(study_args, axis);
    if (*inspect) return cmd_inspect(value_file);
  } catch (const hjbpod::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPartial;
  }
  return 0;
}
