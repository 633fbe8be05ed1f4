#include "hjbpod/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "hjbpod/errors.hpp"
#include "hjbpod/feedback.hpp"
#include "hjbpod/hjb.hpp"
#include "hjbpod/io.hpp"
#include "hjbpod/lqr.hpp"

namespace hjbpod {

namespace fs = std::filesystem;

namespace {

struct Cell {
  int ell = 0;
  double mesh_size = 0.0;
  double h_ratio = 0.0;

  double h() const { return h_ratio * mesh_size; }
  std::string tag() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "l%d_K%g_h%g", ell, mesh_size, h());
    return buf;
  }
};

struct CellOutput {
  ErrorRow row;
  CellDiagnostics diag;
  std::vector<NoiseRun> noise;
};

class Logger {
 public:
  explicit Logger(std::ostream* out) : out_(out) {}
  template <typename... Args>
  void operator()(const Args&... args) {
    if (out_ == nullptr) return;
    std::ostringstream line;
    (line << ... << args);
    std::lock_guard<std::mutex> lock(mutex_);
    *out_ << line.str() << '\n' << std::flush;
  }

 private:
  std::ostream* out_;
  std::mutex mutex_;
};

/// Inputs shared read-only by all cells.
struct Stage {
  const ExperimentConfig* config = nullptr;
  ControlledSystem system;
  Vector y0;
  TimeGrid grid;
  SnapshotSet snapshots;
  PodBasis basis;
  ControlSet controls;
  IntegratorMode scheme = IntegratorMode::kSemiImplicit;
  EstimateConstants constants;
  std::map<int, double> proj_sup;
  bool has_lqr = false;
  Trajectory lqr_clipped;
  double uncontrolled_final_l2 = 0.0;
  std::uint64_t seed = 0;
  fs::path out_dir;
  std::string value_in;
  std::string value_out;
};

bool write_trajectories(const Stage& s) { return s.config->output.trajectories; }

ValueGrid obtain_value_grid(const Stage& s, const Cell& cell, const ReducedSystem& reduced,
                            int workers, std::size_t cache_bytes, Logger& log) {
  const std::string file = "value_" + cell.tag() + ".bin";
  if (!s.value_in.empty()) {
    ValueGrid grid = load_value_grid((fs::path(s.value_in) / file).string());
    if (grid.dim() != cell.ell) throw ConfigError(file + ": dimension does not match ell");
    if (grid.lambda() != s.system.lambda() || grid.h() != cell.h()) {
      throw ConfigError(file + ": lambda or h differ from the configuration");
    }
    log("[", cell.tag(), "] loaded value grid (", grid.size(), " nodes)");
    return grid;
  }
  const Matrix points = reduced.basis().psi.transpose() * s.basis.mass * s.snapshots.columns;
  const Hypercube box = bounding_box(points, s.config->hjb.margin);
  ValueGrid grid = build_grid(box, cell.mesh_size, cell.h(), s.system.lambda(),
                              s.config->hjb.max_nodes, s.config->hjb.interpolation);
  log("[", cell.tag(), "] value iteration on ", grid.size(), " nodes x ", s.controls.size(),
      " controls");
  ValueIterationOptions vi;
  vi.tol = s.config->hjb.tol;
  vi.max_iter = s.config->hjb.max_iter;
  vi.workers = workers;
  vi.cache_budget_bytes = cache_bytes;
  const auto start = std::chrono::steady_clock::now();
  grid = solve_value_iteration(std::move(grid), reduced, s.controls, vi);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  log("[", cell.tag(), "] ", grid.converged ? "converged" : "NOT converged", " after ",
      grid.iterations, " sweeps, residual ", grid.residual, " (", secs, " s)");
  if (!s.value_out.empty()) save_value_grid((fs::path(s.value_out) / file).string(), grid);
  return grid;
}

CellOutput run_cell(const Stage& s, const Cell& cell, int workers, std::size_t cache_bytes,
                    Logger& log) {
  const auto start = std::chrono::steady_clock::now();
  CellOutput out;
  ErrorRow& row = out.row;
  row.ell = cell.ell;
  row.mesh_size = cell.mesh_size;
  row.h = cell.h();

  const PodBasis basis = s.basis.truncated(cell.ell);
  ReducedSystem reduced = reduce_system(s.system, basis);
  ValueGrid grid = obtain_value_grid(s, cell, reduced, workers, cache_bytes, log);
  row.nodes = grid.size();
  row.iterations = grid.iterations;
  out.diag = {cell.ell, cell.mesh_size, cell.h(), grid.lambda(), grid.residual_history,
              grid.cost_bound, 0.0, 0.0, grid.out_of_box_targets, 0.0};
  const auto [lo, hi] = std::minmax_element(grid.values().begin(), grid.values().end());
  out.diag.min_value = *lo;
  out.diag.max_value = *hi;
  if (!grid.converged) throw NumericalError("value iteration did not converge");

  const FeedbackConfig& fc = s.config->feedback;
  const FeedbackPolicy policy(std::move(grid), std::move(reduced), s.controls, fc.policy);
  ClosedLoopOptions loop;
  loop.mode = s.scheme;
  loop.strict_reprojection = fc.strict_reprojection;

  const Trajectory traj = closed_loop(s.system, policy, s.y0, s.grid, {}, loop);
  const Trajectory red = reduced_trajectory(policy.reduced(), s.y0, traj.controls, s.grid, s.scheme);
  Trajectory lifted{red.grid, basis.psi * red.states, red.controls};

  const double dx = s.system.dx();
  row.cost = evaluate_cost(traj, s.system);
  row.reduced_cost = evaluate_cost(lifted, s.system);
  row.gap_l2 = trajectory_gap(traj, red, basis, dx);
  if (s.has_lqr) row.lqr_gap = l2_distance_squared(s.lqr_clipped, traj, dx);
  row.proj_sup = s.proj_sup.at(cell.ell);
  const AprioriBound bound = apriori_bound(s.constants, basis, cell.h(), cell.mesh_size, row.proj_sup);
  row.apriori = bound.value;
  row.apriori_in_hypothesis = bound.within_hypothesis;
  row.final_l2 = l2_norm(traj.final_state(), dx);

  if (write_trajectories(s)) {
    save_trajectory_csv((s.out_dir / ("feedback_" + cell.tag() + ".csv")).string(), traj);
    save_trajectory_csv((s.out_dir / ("reduced_" + cell.tag() + ".csv")).string(), red, true);
  }

  for (double amplitude : fc.noise_amplitudes) {
    for (std::size_t r = 0; r < fc.noise_runs; ++r) {
      NoiseModel noise;
      noise.enabled = true;
      noise.amplitude = amplitude;
      noise.target = fc.noise_target;
      noise.seed = s.seed + r;
      NoiseRun run;
      run.ell = cell.ell;
      run.mesh_size = cell.mesh_size;
      run.amplitude = amplitude;
      run.run = r;
      run.seed = noise.seed;
      const Trajectory noisy = closed_loop(s.system, policy, s.y0, s.grid, noise, loop);
      run.final_l2 = l2_norm(noisy.final_state(), dx);
      run.cost = evaluate_cost(noisy, s.system);
      run.controls_in_bounds = std::all_of(noisy.controls.begin(), noisy.controls.end(), [&](double u) {
        return u >= s.system.u_min() && u <= s.system.u_max();
      });
      if (r == 0 && write_trajectories(s)) {
        save_trajectory_csv(
            (s.out_dir / ("noise_" + cell.tag() + "_a" + format_double(amplitude) + ".csv")).string(),
            noisy);
      }
      out.noise.push_back(run);
    }
  }
  log("[", cell.tag(), "] cost ", row.cost, ", gap ", row.gap_l2, ", final L2 ", row.final_l2);
  out.diag.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void write_spectrum(const fs::path& path, const Vector& ev) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  const double total = ev.sum();
  out << "i,eigenvalue,relative,tail_fraction\n";
  double tail = total;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    tail -= ev[i];
    out << i + 1 << ',' << format_double(ev[i]) << ',' << format_double(ev[i] / ev[0]) << ','
        << format_double(std::max(tail, 0.0) / total) << '\n';
  }
}

void write_noise(const fs::path& path, const std::vector<NoiseRun>& runs) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "ell,K,amplitude,run,seed,final_l2,cost,controls_in_bounds\n";
  for (const NoiseRun& r : runs) {
    out << r.ell << ',' << format_double(r.mesh_size) << ',' << format_double(r.amplitude) << ','
        << r.run << ',' << r.seed << ',' << format_double(r.final_l2) << ','
        << format_double(r.cost) << ',' << (r.controls_in_bounds ? 1 : 0) << '\n';
  }
}

void write_constants(const fs::path& path, const EstimateConstants& c) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "method,l_f,l_g,m_f,m_g,c_f,c_g,lambda,c_theorem,lambda_dominates\n"
      << (c.method == ConstantsMethod::kAnalytic ? "analytic" : "sampled") << ','
      << format_double(c.l_f) << ',' << format_double(c.l_g) << ',' << format_double(c.m_f)
      << ',' << format_double(c.m_g) << ',' << format_double(c.c_f) << ','
      << format_double(c.c_g) << ',' << format_double(c.lambda) << ','
      << format_double(c.c_theorem) << ',' << (c.lambda_dominates() ? 1 : 0) << '\n';
}

constexpr const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Figures from the CSV files in this directory: python3 plots.py"""
import glob
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))


def load(name):
    data = np.genfromtxt(os.path.join(here, name), delimiter=",", names=True)
    return data


def trajectory(name):
    raw = np.genfromtxt(os.path.join(here, name), delimiter=",", skip_header=1)
    return raw[:, 0], raw[:, 1], raw[:, 2:]


def surface(ax, name, title):
    t, _, y = trajectory(name)
    x = np.arange(1, y.shape[1] + 1)
    T, X = np.meshgrid(t, x, indexing="ij")
    ax.plot_surface(X, T, y, cmap="viridis", linewidth=0)
    ax.set_xlabel("node")
    ax.set_ylabel("t")
    ax.set_title(title)


def states():
    names = ["uncontrolled.csv"] + sorted(glob.glob(os.path.join(here, "lqr*.csv")))
    names += sorted(glob.glob(os.path.join(here, "feedback_*.csv")))
    names = [os.path.basename(n) for n in names if os.path.exists(os.path.join(here, os.path.basename(n)))]
    cols = min(3, len(names))
    rows = (len(names) + cols - 1) // cols
    fig = plt.figure(figsize=(5 * cols, 4 * rows))
    for k, name in enumerate(names):
        surface(fig.add_subplot(rows, cols, k + 1, projection="3d"), name, name[:-4])
    fig.tight_layout()
    fig.savefig(os.path.join(here, "states.png"), dpi=120)


def controls():
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in sorted(glob.glob(os.path.join(here, "feedback_*.csv"))) + sorted(
        glob.glob(os.path.join(here, "lqr*.csv"))
    ):
        t, u, _ = trajectory(os.path.basename(name))
        ax.step(t[:-1], u[:-1], where="post", label=os.path.basename(name)[:-4])
    ax.set_xlabel("t")
    ax.set_ylabel("u")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(os.path.join(here, "controls.png"), dpi=120)


def errors():
    rep = load("report.csv")
    rep = np.atleast_1d(rep)
    fig, axes = plt.subplots(1, 4, figsize=(18, 4))
    for K in np.unique(rep["K"]):
        sel = rep[rep["K"] == K]
        for ax, key in zip(axes, ["cost", "gap_l2", "lqr_gap", "proj_sup"]):
            ax.semilogy(sel["ell"], sel[key], "o-", label="K=%g" % K)
            ax.set_xlabel("ell")
            ax.set_title(key)
    for ax in axes:
        ax.legend()
    fig.tight_layout()
    fig.savefig(os.path.join(here, "errors.png"), dpi=120)


def spectrum():
    sp = load("spectrum.csv")
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogy(sp["i"], sp["relative"], "o-")
    ax.set_xlabel("i")
    ax.set_ylabel("lambda_i / lambda_1")
    fig.tight_layout()
    fig.savefig(os.path.join(here, "spectrum.png"), dpi=120)


if __name__ == "__main__":
    states()
    controls()
    errors()
    spectrum()
)PY";

std::vector<Cell> enumerate_cells(const ExperimentConfig& c) {
  std::vector<Cell> cells;
  for (double ratio : c.hjb.h_ratios) {
    for (double k : c.hjb.mesh_sizes) {
      for (int ell : c.ells) cells.push_back({ell, k, ratio});
    }
  }
  return cells;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  if (options.workers < 1) throw ConfigError("workers must be >= 1");
  Logger log(options.log);
  ExperimentResult result;

  Stage s;
  s.config = &config;
  s.seed = options.seed.value_or(config.feedback.seed);
  s.out_dir = options.out_dir.empty() ? fs::path(config.output.directory) : fs::path(options.out_dir);
  s.value_in = options.value_in;
  s.value_out = options.value_out;
  fs::create_directories(s.out_dir);
  if (!s.value_out.empty()) fs::create_directories(s.value_out);

  const PdeConfig pde = config.pde_config();
  s.system = assemble_system(pde);
  s.y0 = pde.w0;
  s.grid = TimeGrid::uniform(pde.t_e, config.feedback.dt);
  s.controls = config.control_set();
  s.scheme = s.system.is_linear() ? IntegratorMode::kImplicit : IntegratorMode::kSemiImplicit;
  log(config.name, ": n = ", s.system.dim(), ", mu = ", s.system.mu(), ", ", s.controls.size(),
      " controls in [", s.controls.min(), ", ", s.controls.max(), "]");

  // Snapshots and POD.
  const TimeGrid snap_grid = TimeGrid::uniform(pde.t_e, config.snapshots.dt);
  s.snapshots = generate_snapshots(s.system, s.y0, config.snapshots.controls, snap_grid, config.snapshots.weights,
                                   config.snapshots.derivatives);
  const int max_ell = *std::max_element(config.ells.begin(), config.ells.end());
  int usable = max_ell;
  try {
    s.basis = compute_pod_basis(s.snapshots, max_ell, s.system.mass());
  } catch (const RankDeficiencyError& e) {
    usable = static_cast<int>(e.usable_rank());
    log("warning: ", e.what());
    if (usable < 1) throw;
    s.basis = compute_pod_basis(s.snapshots, usable, s.system.mass());
  }
  result.eigenvalues = s.basis.eigenvalues;
  write_spectrum(s.out_dir / "spectrum.csv", s.basis.eigenvalues);
  log("POD: ", s.snapshots.size(), " snapshots, numerical rank ", s.basis.numerical_rank());

  // References.
  const Trajectory uncontrolled =
      integrate(s.system, s.y0, std::vector<double>(s.grid.size() - 1, 0.0), s.grid, s.scheme);
  result.uncontrolled_cost = evaluate_cost(uncontrolled, s.system);
  result.uncontrolled_final_l2 = l2_norm(uncontrolled.final_state(), s.system.dx());
  s.uncontrolled_final_l2 = result.uncontrolled_final_l2;
  if (write_trajectories(s)) save_trajectory_csv((s.out_dir / "uncontrolled.csv").string(), uncontrolled);

  if (config.analysis.lqr && s.system.is_linear() && s.system.w_bar().isZero(0.0)) {
    const RiccatiSolution care = solve_care(discount_shift(s.system));
    const Trajectory free = lqr_closed_loop(s.system, care, s.y0, s.grid, false);
    s.lqr_clipped = lqr_closed_loop(s.system, care, s.y0, s.grid, true);
    s.has_lqr = true;
    result.has_lqr = true;
    result.care_residual = care.residual / (s.system.dx() * std::sqrt(static_cast<double>(s.system.dim())));
    result.lqr_cost = evaluate_cost(free, s.system);
    result.lqr_clipped_cost = evaluate_cost(s.lqr_clipped, s.system);
    if (write_trajectories(s)) {
      save_trajectory_csv((s.out_dir / "lqr.csv").string(), free);
      save_trajectory_csv((s.out_dir / "lqr_clipped.csv").string(), s.lqr_clipped);
    }
    log("LQR: ", care.iterations, " Newton steps, cost ", result.lqr_cost, " (clipped ",
        result.lqr_clipped_cost, ")");
  }

  // Diagnostics shared by the cells.
  const ConstantsMethod method =
      config.analysis.constants == "sampled" ||
              (config.analysis.constants == "auto" && !s.system.is_linear())
          ? ConstantsMethod::kSampled
          : ConstantsMethod::kAnalytic;
  s.constants = estimate_constants(s.system, state_box(s.snapshots.columns), method,
                                   config.analysis.constant_samples, s.seed);
  result.constants = s.constants;
  write_constants(s.out_dir / "constants.csv", s.constants);
  for (int ell : config.ells) {
    if (ell > usable || s.proj_sup.count(ell)) continue;
    s.proj_sup[ell] = sup_projection_error(s.basis.truncated(ell), s.system, s.y0, s.grid,
                                           config.analysis.proj_samples, s.seed);
  }

  // Cells.
  const std::vector<Cell> cells = enumerate_cells(config);
  std::vector<CellOutput> outputs(cells.size());
  const int concurrent = std::max(1, std::min<int>(options.workers, static_cast<int>(cells.size())));
  const int inner = std::max(1, options.workers / concurrent);
  const std::size_t cache_bytes = (config.hjb.cache_mb << 20) / static_cast<std::size_t>(concurrent);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      CellOutput& out = outputs[i];
      try {
        if (cells[i].ell > usable) {
          throw RankDeficiencyError("ell exceeds the numerical rank of the snapshots",
                                    static_cast<std::size_t>(usable));
        }
        out = run_cell(s, cells[i], inner, cache_bytes, log);
      } catch (const std::exception& e) {
        out.row.ell = cells[i].ell;
        out.row.mesh_size = cells[i].mesh_size;
        out.row.h = cells[i].h();
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        out.row.status = "failed: " + msg;
        log("[", cells[i].tag(), "] FAILED: ", e.what());
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < concurrent; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (CellOutput& out : outputs) {
    if (out.row.status != "ok") ++result.failed_cells;
    result.report.rows.push_back(out.row);
    if (out.row.status == "ok") result.cells.push_back(std::move(out.diag));
    result.noise_runs.insert(result.noise_runs.end(), out.noise.begin(), out.noise.end());
  }

  save_error_report_csv((s.out_dir / "report.csv").string(), result.report);
  if (!config.feedback.noise_amplitudes.empty()) write_noise(s.out_dir / "noise.csv", result.noise_runs);
  {
    std::ofstream summary(s.out_dir / "summary.txt");
    summary << config.name << "\n\n" << format_error_report(result.report) << '\n';
    summary << "uncontrolled: cost " << format_double(result.uncontrolled_cost) << ", final L2 "
            << format_double(result.uncontrolled_final_l2) << '\n';
    if (result.has_lqr) {
      summary << "LQR: cost " << format_double(result.lqr_cost) << ", clipped cost "
              << format_double(result.lqr_clipped_cost) << '\n';
    }
    summary << "constants (" << (s.constants.method == ConstantsMethod::kAnalytic ? "analytic" : "sampled estimates")
            << "): L_f " << format_double(s.constants.l_f) << ", L_g " << format_double(s.constants.l_g)
            << ", M_f " << format_double(s.constants.m_f) << ", lambda "
            << format_double(s.constants.lambda)
            << (s.constants.lambda_dominates() ? "" : " (lambda <= L_f: bound outside its hypothesis)")
            << '\n';
  }
  if (config.output.plots) {
    std::ofstream py(s.out_dir / "plots.py");
    py << kPlotScript;
  }
  return result;
}

StudyAxis parse_study_axis(const std::string& name) {
  if (name == "ell") return StudyAxis::kEll;
  if (name == "K") return StudyAxis::kMeshSize;
  if (name == "h") return StudyAxis::kTimeStep;
  throw ConfigError("study axis must be ell, K or h");
}

StudyTable convergence_study(const ExperimentConfig& config, StudyAxis axis,
                             const RunOptions& options) {
  ExperimentConfig c = config;
  const int ell = *std::max_element(config.ells.begin(), config.ells.end());
  c.ells = {ell};
  c.hjb.mesh_sizes = {config.hjb.mesh_sizes.front()};
  c.hjb.h_ratios = {config.hjb.h_ratios.front()};
  std::size_t count = 0;
  switch (axis) {
    case StudyAxis::kEll:
      c.ells = config.ells;
      count = c.ells.size();
      break;
    case StudyAxis::kMeshSize:
      c.hjb.mesh_sizes = config.hjb.mesh_sizes;
      count = c.hjb.mesh_sizes.size();
      break;
    case StudyAxis::kTimeStep:
      c.hjb.h_ratios = config.hjb.h_ratios;
      count = c.hjb.h_ratios.size();
      break;
  }
  if (count < 2) throw ConfigError("a convergence study needs at least two values on its axis");
  c.feedback.noise_amplitudes.clear();

  const ExperimentResult result = run_experiment(c, options);
  StudyTable table;
  table.axis = axis;
  for (const ErrorRow& row : result.report.rows) {
    const double value = axis == StudyAxis::kEll        ? row.ell
                         : axis == StudyAxis::kMeshSize ? row.mesh_size
                                                        : row.h;
    table.rows.push_back({value, row});
  }
  auto nonincreasing = [&](auto member) {
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
      if (table.rows[i].row.status != "ok" || table.rows[i - 1].row.status != "ok") return false;
      if (table.rows[i].row.*member > table.rows[i - 1].row.*member) return false;
    }
    return true;
  };
  table.cost_nonincreasing = nonincreasing(&ErrorRow::cost);
  table.gap_nonincreasing = nonincreasing(&ErrorRow::gap_l2);
  table.proj_sup_nonincreasing = nonincreasing(&ErrorRow::proj_sup);
  return table;
}

void write_study_csv(std::ostream& out, const StudyTable& table) {
  const char* name = table.axis == StudyAxis::kEll        ? "ell"
                     : table.axis == StudyAxis::kMeshSize ? "K"
                                                          : "h";
  out << name << ",cost,gap_l2,proj_sup,apriori,status\n";
  for (const StudyRow& r : table.rows) {
    out << format_double(r.axis_value) << ',' << format_double(r.row.cost) << ','
        << format_double(r.row.gap_l2) << ',' << format_double(r.row.proj_sup) << ','
        << format_double(r.row.apriori) << ',' << r.row.status << '\n';
  }
  out << "# cost_nonincreasing=" << table.cost_nonincreasing
      << " gap_nonincreasing=" << table.gap_nonincreasing
      << " proj_sup_nonincreasing=" << table.proj_sup_nonincreasing << '\n';
}

}  // namespace hjbpod
