#include "hjbpod/config.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hjbpod/errors.hpp"

#ifndef HJBPOD_PRESET_DIR
#define HJBPOD_PRESET_DIR "presets"
#endif

namespace hjbpod {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment", {"name"}},
      {"pde",
       {"epsilon", "gamma", "mu", "a", "b", "n_x", "dx", "w0", "shape_b", "w_bar", "alpha",
        "lambda", "t_e", "u_min", "u_max", "advection", "inner_product"}},
      {"snapshots", {"controls", "dt", "weights", "derivatives"}},
      {"pod", {"ell"}},
      {"hjb",
       {"K", "h_ratio", "margin", "tol", "max_iter", "controls", "control_min", "control_max",
        "interpolation", "max_nodes", "cache_mb"}},
      {"feedback",
       {"policy", "dt", "noise", "noise_runs", "noise_target", "seed", "strict_reprojection"}},
      {"analysis", {"proj_samples", "constant_samples", "constants", "lqr"}},
      {"output", {"directory", "trajectories", "plots"}},
  };
  return keys;
}

template <typename T>
T scalar(const pt::ptree& tree, const std::string& key, T fallback) {
  const auto node = tree.get_child_optional(key);
  if (!node) return fallback;
  try {
    return node->get_value<T>();
  } catch (const pt::ptree_bad_data&) {
    throw ConfigError("bad value for '" + key + "': '" + node->data() + "'");
  }
}

bool flag(const pt::ptree& tree, const std::string& key, bool fallback) {
  const auto node = tree.get_child_optional(key);
  if (!node) return fallback;
  const std::string v = node->data();
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for '" + key + "': '" + v + "'");
}

template <typename T>
std::vector<T> list(const pt::ptree& tree, const std::string& key, std::vector<T> fallback) {
  const auto node = tree.get_child_optional(key);
  if (!node) return fallback;
  std::string text = node->data();
  for (char& c : text) {
    if (c == ',') c = ' ';
  }
  std::istringstream ss(text);
  std::vector<T> out;
  std::string token;
  while (ss >> token) {
    std::istringstream one(token);
    T v{};
    if (!(one >> v) || !one.eof()) {
      throw ConfigError("bad list entry for '" + key + "': '" + token + "'");
    }
    out.push_back(v);
  }
  return out;
}

template <typename E>
E choice(const pt::ptree& tree, const std::string& key, E fallback,
         const std::map<std::string, E>& options) {
  const auto node = tree.get_child_optional(key);
  if (!node) return fallback;
  const auto it = options.find(node->data());
  if (it == options.end()) {
    std::string allowed;
    for (const auto& [name, value] : options) allowed += " " + name;
    throw ConfigError("bad value for '" + key + "': '" + node->data() + "' (expected" +
                      allowed + ")");
  }
  return it->second;
}

ExperimentConfig from_tree(const pt::ptree& root) {
  for (const auto& [section, body] : root) {
    const auto it = schema().find(section);
    if (it == schema().end()) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    }
  }
  const pt::ptree empty;
  auto section = [&](const char* name) -> const pt::ptree& {
    const auto child = root.get_child_optional(name);
    return child ? *child : empty;
  };

  ExperimentConfig c;
  c.name = scalar<std::string>(section("experiment"), "name", c.name);

  const pt::ptree& pde = section("pde");
  c.pde.epsilon = scalar(pde, "epsilon", c.pde.epsilon);
  c.pde.gamma = scalar(pde, "gamma", c.pde.gamma);
  c.pde.mu = scalar(pde, "mu", c.pde.mu);
  c.pde.a = scalar(pde, "a", c.pde.a);
  c.pde.b = scalar(pde, "b", c.pde.b);
  c.pde.n_x = scalar(pde, "n_x", c.pde.n_x);
  if (pde.get_child_optional("dx")) {
    if (pde.get_child_optional("n_x")) throw ConfigError("give either n_x or dx, not both");
    const double dx = scalar(pde, "dx", 0.0);
    if (!(dx > 0.0)) throw ConfigError("dx must be positive");
    const double cells = (c.pde.b - c.pde.a) / dx;
    if (std::abs(cells - std::round(cells)) > 1e-9 * cells) {
      throw ConfigError("dx must divide the domain length");
    }
    c.pde.n_x = static_cast<int>(std::lround(cells)) - 1;
  }
  c.w0_spec = scalar<std::string>(pde, "w0", c.w0_spec);
  c.shape_b_spec = scalar<std::string>(pde, "shape_b", c.shape_b_spec);
  c.w_bar_spec = scalar<std::string>(pde, "w_bar", c.w_bar_spec);
  c.pde.alpha = scalar(pde, "alpha", c.pde.alpha);
  c.pde.lambda = scalar(pde, "lambda", c.pde.lambda);
  c.pde.t_e = scalar(pde, "t_e", c.pde.t_e);
  c.pde.u_min = scalar(pde, "u_min", c.pde.u_min);
  c.pde.u_max = scalar(pde, "u_max", c.pde.u_max);
  c.pde.advection = choice<Advection>(pde, "advection", c.pde.advection,
                                      {{"centered", Advection::kCentered},
                                       {"upwind", Advection::kUpwind}});
  c.pde.inner_product = choice<InnerProduct>(pde, "inner_product", c.pde.inner_product,
                                             {{"identity", InnerProduct::kIdentity},
                                              {"l2", InnerProduct::kL2}});

  const pt::ptree& snap = section("snapshots");
  c.snapshots.controls = list<double>(snap, "controls", {0.0});
  c.snapshots.dt = scalar(snap, "dt", c.snapshots.dt);
  c.snapshots.weights = choice<WeightMode>(snap, "weights", c.snapshots.weights,
                                           {{"uniform", WeightMode::kUniform},
                                            {"trapezoidal", WeightMode::kTrapezoidal}});
  c.snapshots.derivatives = flag(snap, "derivatives", c.snapshots.derivatives);

  c.ells = list<int>(section("pod"), "ell", c.ells);

  const pt::ptree& hjb = section("hjb");
  c.hjb.mesh_sizes = list<double>(hjb, "K", c.hjb.mesh_sizes);
  c.hjb.h_ratios = list<double>(hjb, "h_ratio", c.hjb.h_ratios);
  c.hjb.margin = scalar(hjb, "margin", c.hjb.margin);
  c.hjb.tol = scalar(hjb, "tol", c.hjb.tol);
  c.hjb.max_iter = scalar(hjb, "max_iter", c.hjb.max_iter);
  c.hjb.control_count = scalar(hjb, "controls", c.hjb.control_count);
  c.hjb.control_min = scalar(hjb, "control_min", c.pde.u_min);
  c.hjb.control_max = scalar(hjb, "control_max", c.pde.u_max);
  c.hjb.interpolation = choice<Interpolation>(hjb, "interpolation", c.hjb.interpolation,
                                              {{"simplex", Interpolation::kSimplex},
                                               {"multilinear", Interpolation::kMultilinear}});
  c.hjb.max_nodes = scalar(hjb, "max_nodes", c.hjb.max_nodes);
  c.hjb.cache_mb = scalar(hjb, "cache_mb", c.hjb.cache_mb);

  const pt::ptree& fb = section("feedback");
  c.feedback.policy = choice<PolicyMode>(fb, "policy", c.feedback.policy,
                                         {{"argmin_online", PolicyMode::kArgminOnline},
                                          {"stored_interpolation",
                                           PolicyMode::kStoredInterpolation}});
  c.feedback.dt = scalar(fb, "dt", c.feedback.dt);
  c.feedback.noise_amplitudes = list<double>(fb, "noise", {});
  c.feedback.noise_runs = scalar(fb, "noise_runs", c.feedback.noise_runs);
  c.feedback.noise_target = choice<NoiseTarget>(fb, "noise_target", c.feedback.noise_target,
                                                {{"measurement", NoiseTarget::kMeasurement},
                                                 {"state", NoiseTarget::kState}});
  c.feedback.seed = scalar(fb, "seed", c.feedback.seed);
  c.feedback.strict_reprojection = flag(fb, "strict_reprojection", false);

  const pt::ptree& an = section("analysis");
  c.analysis.proj_samples = scalar(an, "proj_samples", c.analysis.proj_samples);
  c.analysis.constant_samples = scalar(an, "constant_samples", c.analysis.constant_samples);
  c.analysis.constants = scalar<std::string>(an, "constants", c.analysis.constants);
  c.analysis.lqr = flag(an, "lqr", c.analysis.lqr);

  const pt::ptree& out = section("output");
  c.output.directory = scalar<std::string>(out, "directory", c.output.directory);
  c.output.trajectories = flag(out, "trajectories", c.output.trajectories);
  c.output.plots = flag(out, "plots", c.output.plots);

  c.validate();
  return c;
}

bool is_multiple(double t, double dt) {
  const double q = t / dt;
  return std::abs(q - std::round(q)) <= 1e-9 * std::max(1.0, q);
}

}  // namespace

PdeConfig ExperimentConfig::pde_config() const {
  PdeConfig p = pde;
  const Vector x = p.nodes();
  p.w0 = sample_profile(w0_spec, x);
  p.shape_b = sample_profile(shape_b_spec, x);
  p.w_bar = sample_profile(w_bar_spec, x);
  return p;
}

ControlSet ExperimentConfig::control_set() const {
  return ControlSet::uniform(hjb.control_min, hjb.control_max, hjb.control_count);
}

void ExperimentConfig::validate() const {
  pde_config().validate();
  if (snapshots.controls.empty()) throw ConfigError("snapshots.controls must not be empty");
  if (!(snapshots.dt > 0.0) || !is_multiple(pde.t_e, snapshots.dt)) {
    throw ConfigError("snapshots.dt must be positive and divide t_e");
  }
  if (!(feedback.dt > 0.0) || !is_multiple(pde.t_e, feedback.dt)) {
    throw ConfigError("feedback.dt must be positive and divide t_e");
  }
  if (ells.empty()) throw ConfigError("pod.ell must not be empty");
  for (int l : ells) {
    if (l < 1 || l > kMaxGridDim) {
      throw ConfigError("pod.ell entries must lie in [1, " + std::to_string(kMaxGridDim) + "]");
    }
  }
  if (hjb.mesh_sizes.empty()) throw ConfigError("hjb.K must not be empty");
  if (hjb.h_ratios.empty()) throw ConfigError("hjb.h_ratio must not be empty");
  for (double k : hjb.mesh_sizes) {
    if (!(k > 0.0)) throw ConfigError("hjb.K entries must be positive");
    for (double r : hjb.h_ratios) {
      const double h = r * k;
      if (!(h > 0.0 && h < 1.0 / pde.lambda)) {
        throw ConfigError("h = h_ratio * K must lie in (0, 1/lambda)");
      }
    }
  }
  if (!(hjb.margin >= 0.0)) throw ConfigError("hjb.margin must be nonnegative");
  if (hjb.tol < 0.0) throw ConfigError("hjb.tol must be nonnegative");
  if (hjb.control_count < 1) throw ConfigError("hjb.controls must be >= 1");
  if (hjb.control_min > hjb.control_max) throw ConfigError("hjb.control_min > control_max");
  if (hjb.control_min < pde.u_min || hjb.control_max > pde.u_max) {
    throw ConfigError("hjb control set must lie inside [u_min, u_max]");
  }
  for (double a : feedback.noise_amplitudes) {
    if (!(a >= 0.0 && a < 1.0)) throw ConfigError("feedback.noise amplitudes must lie in [0, 1)");
  }
  if (feedback.noise_runs < 1) throw ConfigError("feedback.noise_runs must be >= 1");
  if (analysis.proj_samples < 1) throw ConfigError("analysis.proj_samples must be >= 1");
  if (analysis.constants != "auto" && analysis.constants != "analytic" &&
      analysis.constants != "sampled") {
    throw ConfigError("analysis.constants must be auto, analytic or sampled");
  }
  if (analysis.constants == "analytic" && pde.mu != 0.0) {
    throw ConfigError("analytic constants need mu = 0");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_tree(root);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_config(buffer.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string preset_path(const std::string& name) {
  if (name != "test1" && name != "test2" && name != "test3") {
    throw ConfigError("unknown preset '" + name + "' (expected test1, test2 or test3)");
  }
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv("HJBPOD_PRESETS")) dirs.emplace_back(env);
  dirs.emplace_back(HJBPOD_PRESET_DIR);
  for (const auto& dir : dirs) {
    const auto p = dir / (name + ".ini");
    if (std::filesystem::exists(p)) return p.string();
  }
  throw ConfigError("preset '" + name + "' not found; set HJBPOD_PRESETS");
}

ExperimentConfig preset_config(const std::string& name) { return load_config(preset_path(name)); }

}  // namespace hjbpod
