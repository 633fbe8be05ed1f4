#include "hjbpod/hjb.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "hjbpod/errors.hpp"

namespace hjbpod {

namespace {

// Runs body(begin, end) over [0, n) split into contiguous chunks.
template <typename Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  const auto w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || n < 2 * w) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(w);
  const std::size_t chunk = (n + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& th : pool) th.join();
}

[[noreturn]] void report_non_finite(const char* what, std::size_t node, double u) {
  std::ostringstream msg;
  msg << "Bellman operator: non-finite " << what << " at node " << node
      << ", control " << u;
  throw NumericalError(msg.str());
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

}  // namespace

bool Hypercube::contains(const Vector& point, double slack) const {
  for (int j = 0; j < dim(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (point[j] < lower[ju] - slack || point[j] > upper[ju] + slack) return false;
  }
  return true;
}

Hypercube bounding_box(const Matrix& points, double margin, double degenerate_floor) {
  if (points.cols() == 0 || points.rows() == 0) {
    throw ContractViolation("bounding_box: no points");
  }
  if (!(margin >= 0.0)) throw ContractViolation("bounding_box: negative margin");
  Hypercube box;
  for (Eigen::Index j = 0; j < points.rows(); ++j) {
    double lo = points.row(j).minCoeff();
    double hi = points.row(j).maxCoeff();
    const double pad = hi > lo ? 0.5 * margin * (hi - lo) : degenerate_floor;
    box.lower.push_back(lo - pad);
    box.upper.push_back(hi + pad);
  }
  return box;
}

ControlSet::ControlSet(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ContractViolation("ControlSet: empty");
  for (std::size_t i = 1; i < values_.size(); ++i) {
    if (!(values_[i] > values_[i - 1])) {
      throw ContractViolation("ControlSet: values must be strictly ascending");
    }
  }
}

ControlSet ControlSet::uniform(double lo, double hi, std::size_t count) {
  if (count == 0) throw ContractViolation("ControlSet::uniform: count must be >= 1");
  if (count == 1) return ControlSet({lo});
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  v.back() = hi;
  return ControlSet(std::move(v));
}

ValueGrid::ValueGrid(Hypercube box, double mesh_size, double h, double lambda,
                     std::vector<std::uint32_t> counts, Interpolation interp)
    : box_(std::move(box)),
      mesh_size_(mesh_size),
      h_(h),
      lambda_(lambda),
      interp_(interp),
      counts_(std::move(counts)) {
  const int d = box_.dim();
  if (d < 1 || d > kMaxGridDim || static_cast<int>(counts_.size()) != d) {
    throw ContractViolation("ValueGrid: dimension must be in [1, 10] and match counts");
  }
  if (interp_ == Interpolation::kMultilinear && d > 8) {
    throw ContractViolation("ValueGrid: multilinear interpolation limited to dim <= 8");
  }
  std::size_t total = 1;
  for (int j = 0; j < d; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    if (counts_[ju] < 2) throw ContractViolation("ValueGrid: need >= 2 nodes per axis");
    if (!(box_.upper[ju] > box_.lower[ju])) {
      throw ContractViolation("ValueGrid: box axes must have positive width");
    }
    spacing_.push_back((box_.upper[ju] - box_.lower[ju]) / (counts_[ju] - 1));
    strides_.push_back(total);
    total *= counts_[ju];
  }
  values_.assign(total, 0.0);
  policy_.assign(total, 0);
}

Vector ValueGrid::node(std::size_t index) const {
  Vector z(dim());
  for (int j = 0; j < dim(); ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const std::size_t k = (index / strides_[ju]) % counts_[ju];
    // Last node sits exactly on the upper bound.
    z[j] = k + 1 == counts_[ju] ? box_.upper[ju] : box_.lower[ju] + k * spacing_[ju];
  }
  return z;
}

std::size_t ValueGrid::stencil_size() const {
  return interp_ == Interpolation::kSimplex ? static_cast<std::size_t>(dim()) + 1
                                            : std::size_t{1} << dim();
}

double ValueGrid::interpolate(const Vector& point, std::size_t* clamp_count) const {
  if (point.size() != dim()) throw ContractViolation("interpolate: dimension mismatch");
  double v = 0.0;
  const bool clamped =
      visit_stencil(point.data(), [&](std::size_t i, double w) { v += w * values_[i]; });
  if (clamped && clamp_count != nullptr) ++*clamp_count;
  return v;
}

double ValueGrid::interpolate_data(std::span<const double> data, const Vector& point) const {
  if (data.size() != size() || point.size() != dim()) {
    throw ContractViolation("interpolate_data: dimension mismatch");
  }
  double v = 0.0;
  visit_stencil(point.data(), [&](std::size_t i, double w) { v += w * data[i]; });
  return v;
}

ValueGrid build_grid(const Hypercube& box, double mesh_size, double h, double lambda,
                     std::size_t max_nodes, Interpolation interp) {
  if (!(mesh_size > 0.0)) throw ContractViolation("build_grid: K must be positive");
  if (!(lambda > 0.0) || !(h > 0.0) || !(lambda * h < 1.0)) {
    throw ContractViolation("build_grid: h must lie in (0, 1/lambda)");
  }
  const int d = box.dim();
  const double diag = std::sqrt(static_cast<double>(d));
  std::vector<std::uint32_t> counts;
  double total = 1.0;
  for (int j = 0; j < d; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const double cells = std::ceil((box.upper[ju] - box.lower[ju]) * diag / mesh_size - 1e-9);
    const double c = std::max(1.0, cells) + 1.0;
    total *= c;
    if (total > static_cast<double>(max_nodes) || c > 4e9) {
      std::ostringstream msg;
      msg << "build_grid: grid for dim " << d << ", K " << mesh_size
          << " exceeds the node cap " << max_nodes;
      throw GridTooLargeError(msg.str());
    }
    counts.push_back(static_cast<std::uint32_t>(c));
  }
  return ValueGrid(box, mesh_size, h, lambda, std::move(counts), interp);
}

SweepResult bellman_sweep(const ValueGrid& grid, const ReducedModel& model,
                          const ControlSet& controls, int workers) {
  if (model.dim() != grid.dim()) {
    throw ContractViolation("bellman_sweep: model and grid dimensions differ");
  }
  const double beta = grid.contraction();
  const double h = grid.h();
  const auto& old = grid.values();
  SweepResult out;
  out.values.resize(grid.size());
  out.policy.resize(grid.size());

  parallel_for(grid.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Vector z = grid.node(i);
      double best = std::numeric_limits<double>::infinity();
      std::uint32_t arg = 0;
      for (std::size_t c = 0; c < controls.size(); ++c) {
        const Vector target = z + h * model.rhs(z, controls[c]);
        const double g = model.cost(z, controls[c]);
        if (!target.allFinite()) report_non_finite("dynamics", i, controls[c]);
        if (!std::isfinite(g)) report_non_finite("running cost", i, controls[c]);
        double v = 0.0;
        grid.visit_stencil(target.data(), [&](std::size_t k, double w) { v += w * old[k]; });
        const double q = beta * v + h * g;
        if (q < best) {
          best = q;
          arg = static_cast<std::uint32_t>(c);
        }
      }
      out.values[i] = best;
      out.policy[i] = arg;
    }
  });
  out.residual = max_abs_diff(out.values, old);
  return out;
}

namespace {

// Bellman data that does not change between sweeps: stage costs h*g and,
// when they fit in memory, the interpolation stencils of every target.
struct BellmanCache {
  std::size_t stencil = 0;
  std::vector<double> stage;          // node-major, control-minor
  std::vector<std::uint32_t> index;   // stage.size() * stencil
  std::vector<double> weight;
  std::vector<Vector> targets;        // used when stencils are not cached
  bool has_stencils = false;
  double cost_bound = 0.0;
  std::size_t clamped = 0;
};

BellmanCache build_cache(const ValueGrid& grid, const ReducedModel& model,
                         const ControlSet& controls, std::size_t budget, int workers) {
  BellmanCache cache;
  const std::size_t n = grid.size();
  const std::size_t p = controls.size();
  cache.stencil = grid.stencil_size();
  const double bytes = static_cast<double>(n) * p * cache.stencil * (sizeof(double) + sizeof(std::uint32_t));
  cache.has_stencils = bytes <= static_cast<double>(budget);
  cache.stage.resize(n * p);
  if (cache.has_stencils) {
    cache.index.resize(n * p * cache.stencil);
    cache.weight.resize(n * p * cache.stencil);
  } else {
    cache.targets.resize(n * p);
  }

  const auto chunks = static_cast<std::size_t>(std::max(1, workers));
  std::vector<double> bound(chunks, 0.0);
  std::vector<std::size_t> clamped(chunks, 0);
  const std::size_t per = (n + chunks - 1) / chunks;
  parallel_for(chunks, workers, [&](std::size_t cb, std::size_t ce) {
    for (std::size_t t = cb; t < ce; ++t) {
      for (std::size_t i = t * per; i < std::min(n, (t + 1) * per); ++i) {
        const Vector z = grid.node(i);
        for (std::size_t c = 0; c < p; ++c) {
          const double u = controls[c];
          Vector target = z + grid.h() * model.rhs(z, u);
          const double g = model.cost(z, u);
          if (!target.allFinite()) report_non_finite("dynamics", i, u);
          if (!std::isfinite(g)) report_non_finite("running cost", i, u);
          bound[t] = std::max(bound[t], std::abs(g));
          const std::size_t slot = i * p + c;
          cache.stage[slot] = grid.h() * g;
          if (cache.has_stencils) {
            std::size_t k = slot * cache.stencil;
            const bool out = grid.visit_stencil(target.data(), [&](std::size_t idx, double w) {
              cache.index[k] = static_cast<std::uint32_t>(idx);
              cache.weight[k] = w;
              ++k;
            });
            clamped[t] += out ? 1 : 0;
          } else {
            clamped[t] += grid.box().contains(target) ? 0 : 1;
            cache.targets[slot] = std::move(target);
          }
        }
      }
    }
  });
  for (std::size_t t = 0; t < chunks; ++t) {
    cache.cost_bound = std::max(cache.cost_bound, bound[t]);
    cache.clamped += clamped[t];
  }
  return cache;
}

}  // namespace

ValueGrid solve_value_iteration(ValueGrid grid, const ReducedModel& model,
                                const ControlSet& controls,
                                const ValueIterationOptions& options) {
  if (model.dim() != grid.dim()) {
    throw ContractViolation("solve_value_iteration: model and grid dimensions differ");
  }
  if (options.tol < 0.0) throw ContractViolation("solve_value_iteration: tol must be > 0");
  if (std::abs(model.discount() - grid.lambda()) > 1e-14 * grid.lambda()) {
    throw ContractViolation("solve_value_iteration: grid and model discounts differ");
  }

  const BellmanCache cache = build_cache(grid, model, controls, options.cache_budget_bytes,
                                         options.workers);
  grid.cost_bound = cache.cost_bound;
  grid.out_of_box_targets = cache.clamped;

  const double beta = grid.contraction();
  const double scale = cache.cost_bound / grid.lambda();
  const double tol = options.tol > 0.0 ? options.tol : std::max(1e-8 * scale, 1e-300);
  std::size_t max_iter = options.max_iter;
  if (max_iter == 0) {
    const double rel = scale > 0.0 ? std::min(tol / scale, 0.5) : 0.5;
    max_iter = 10 * static_cast<std::size_t>(std::ceil(std::log(rel) / std::log(beta)));
    max_iter = std::max<std::size_t>(max_iter, 10);
  }

  const std::size_t n = grid.size();
  const std::size_t p = controls.size();
  std::vector<double> next(n);
  std::vector<std::uint32_t> next_policy(n);
  grid.residual_history.clear();
  grid.converged = false;

  for (std::size_t it = 0; it < max_iter; ++it) {
    const std::vector<double>& old = grid.values();
    parallel_for(n, options.workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (std::size_t c = 0; c < p; ++c) {
          const std::size_t slot = i * p + c;
          double v = 0.0;
          if (cache.has_stencils) {
            const std::size_t k0 = slot * cache.stencil;
            for (std::size_t k = k0; k < k0 + cache.stencil; ++k) {
              v += cache.weight[k] * old[cache.index[k]];
            }
          } else {
            grid.visit_stencil(cache.targets[slot].data(),
                               [&](std::size_t k, double w) { v += w * old[k]; });
          }
          const double q = beta * v + cache.stage[slot];
          if (q < best) {
            best = q;
            arg = static_cast<std::uint32_t>(c);
          }
        }
        next[i] = best;
        next_policy[i] = arg;
      }
    });
    const double r = max_abs_diff(next, old);
    grid.values().swap(next);
    grid.policy().swap(next_policy);
    grid.residual_history.push_back(r);
    grid.iterations = it + 1;
    grid.residual = r;
    if (r <= tol) {
      grid.converged = true;
      break;
    }
  }
  return grid;
}

ArgminResult argmin_control(const ValueGrid& grid, const ReducedModel& model,
                            const ControlSet& controls, const Vector& point,
                            std::size_t* clamp_count) {
  if (point.size() != grid.dim() || model.dim() != grid.dim()) {
    throw ContractViolation("argmin_control: dimension mismatch");
  }
  const double beta = grid.contraction();
  const double h = grid.h();
  ArgminResult best{0.0, 0, std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < controls.size(); ++c) {
    const double u = controls[c];
    const Vector target = point + h * model.rhs(point, u);
    const double g = model.cost(point, u);
    if (!target.allFinite() || !std::isfinite(g)) {
      std::ostringstream msg;
      msg << "argmin_control: non-finite Bellman data for control " << u;
      throw NumericalError(msg.str());
    }
    const double q = beta * grid.interpolate(target, clamp_count) + h * g;
    if (q < best.value) best = {u, c, q};
  }
  return best;
}

}  // namespace hjbpod
