#include "spadflux/run_config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace spadflux {
namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::string_view where,
                    std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", where));
  const std::set<std::string_view> keys(allowed);
  for (const auto& [key, value] : obj.items()) {
    if (!keys.count(key)) throw ConfigError(fmt::format("{}: unknown key '{}'", where, key));
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("key '{}' has the wrong type", key));
  }
}

template <typename T>
T require(const json& obj, const char* key) {
  if (!obj.contains(key)) throw ConfigError(fmt::format("missing required key '{}'", key));
  return get_or<T>(obj, key, T{});
}

std::vector<double> number_list(const json& obj, const char* key,
                                std::vector<double> fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (it->is_number()) return {it->get<double>()};
  if (it->is_array()) {
    std::vector<double> out;
    for (const auto& v : *it) {
      if (!v.is_number()) throw ConfigError(fmt::format("'{}' must hold numbers", key));
      out.push_back(v.get<double>());
    }
    return out;
  }
  if (it->is_object() && it->contains("log_grid")) {
    reject_unknown(*it, key, {"log_grid"});
    const auto& g = (*it)["log_grid"];
    reject_unknown(g, "log_grid", {"min", "max", "points"});
    return log_grid(require<double>(g, "min"), require<double>(g, "max"),
                    require<int>(g, "points"));
  }
  throw ConfigError(fmt::format("'{}' must be a number, a list, or {{\"log_grid\": ...}}", key));
}

PulseShape parse_pulse(const json& obj) {
  const auto it = obj.find("pulse");
  if (it == obj.end()) return PulseShape::delta();
  const auto kind = get_or<std::string>(*it, "kind", "delta");
  if (kind == "delta") {
    reject_unknown(*it, "pulse", {"kind"});
    return PulseShape::delta();
  }
  if (kind == "gaussian") {
    reject_unknown(*it, "pulse", {"kind", "sigma_bins", "half_width"});
    const double sigma = require<double>(*it, "sigma_bins");
    const int half = get_or<int>(*it, "half_width", static_cast<int>(std::ceil(4.0 * sigma)));
    return PulseShape::gaussian(sigma, half);
  }
  if (kind == "profile") {
    reject_unknown(*it, "pulse", {"kind", "weights", "peak"});
    return PulseShape::profile(require<std::vector<double>>(*it, "weights"),
                               require<int>(*it, "peak"));
  }
  throw ConfigError(fmt::format("unknown pulse kind '{}'", kind));
}

json parse_document(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("invalid JSON: {}", e.what()));
  }
}

std::vector<Estimator> parse_estimators(const json& doc) {
  if (doc.contains("estimators")) {
    std::vector<Estimator> out;
    for (const auto& name : require<std::vector<std::string>>(doc, "estimators")) {
      out.push_back(parse_estimator(name));
    }
    return out;
  }
  return {parse_estimator(get_or<std::string>(doc, "estimator", "coates"))};
}

Grid<double> load_grid(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  return read_grid(in);
}

// A flux map is a number, a grid file, or a left/right column split.
Grid<double> parse_flux_map(const json& doc, const char* key, const Grid<int>& shape,
                            const std::filesystem::path& base_dir, double fallback) {
  const auto it = doc.find(key);
  if (it == doc.end()) return constant_like(shape, fallback);
  if (it->is_number()) return constant_like(shape, it->get<double>());
  if (it->is_string()) {
    Grid<double> g = load_grid(base_dir / it->get<std::string>());
    if (!g.same_shape(shape.rows, shape.cols)) {
      throw ConfigError(fmt::format("'{}' map is {}x{}, depth map is {}x{}", key, g.rows, g.cols,
                                    shape.rows, shape.cols));
    }
    return g;
  }
  if (it->is_object()) {
    reject_unknown(*it, key, {"left", "right"});
    const double left = require<double>(*it, "left");
    const double right = require<double>(*it, "right");
    Grid<double> g = constant_like(shape, left);
    for (int r = 0; r < g.rows; ++r) {
      for (int c = g.cols / 2; c < g.cols; ++c) g.at(r, c) = right;
    }
    return g;
  }
  throw ConfigError(fmt::format("'{}' must be a number, a grid path, or {{left, right}}", key));
}

Grid<int> synthetic_depth(const json& spec, int num_bins) {
  reject_unknown(spec, "synthetic", {"rows", "cols", "pattern", "min_bin", "max_bin"});
  const int rows = require<int>(spec, "rows");
  const int cols = require<int>(spec, "cols");
  if (rows < 1 || cols < 1) throw ConfigError("synthetic scene needs rows, cols >= 1");
  const auto pattern = get_or<std::string>(spec, "pattern", "ramp");
  const int lo = get_or<int>(spec, "min_bin", 1);
  const int hi = get_or<int>(spec, "max_bin", num_bins);
  Grid<int> g(rows, cols, lo);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (pattern == "constant") {
        g.at(r, c) = lo;
      } else if (pattern == "ramp") {
        // Diagonal ramp across the whole range.
        const double t = (rows + cols > 2) ? double(r + c) / double(rows + cols - 2) : 0.0;
        g.at(r, c) = lo + static_cast<int>(std::lround(t * (hi - lo)));
      } else if (pattern == "steps") {
        const int step = (c * 4) / cols;
        g.at(r, c) = lo + (hi - lo) * step / 3;
      } else {
        throw ConfigError(fmt::format("unknown synthetic pattern '{}'", pattern));
      }
    }
  }
  return g;
}

}  // namespace

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi >= lo) || count < 1) {
    throw ConfigError("log grid needs 0 < min <= max and at least one point");
  }
  if (count == 1) return {lo};
  std::vector<double> out(static_cast<std::size_t>(count));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (count - 1));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SimulateConfig parse_simulate_config(std::string_view text) {
  const json doc = parse_document(text);
  reject_unknown(doc, "simulate config",
                 {"phi_sig", "phi_bkg", "num_bins", "bin_width", "true_bin", "attenuation",
                  "cycles", "trials", "seed", "pulse"});
  SimulateConfig cfg;
  cfg.flux.phi_sig = get_or(doc, "phi_sig", cfg.flux.phi_sig);
  cfg.flux.phi_bkg = get_or(doc, "phi_bkg", cfg.flux.phi_bkg);
  cfg.flux.num_bins = get_or(doc, "num_bins", cfg.flux.num_bins);
  cfg.flux.bin_width = get_or(doc, "bin_width", cfg.flux.bin_width);
  cfg.flux.true_bin = get_or(doc, "true_bin", cfg.flux.true_bin);
  cfg.flux.attenuation = get_or(doc, "attenuation", cfg.flux.attenuation);
  cfg.cycles = get_or(doc, "cycles", cfg.cycles);
  cfg.trials = get_or(doc, "trials", cfg.trials);
  cfg.seed = get_or(doc, "seed", cfg.seed);
  cfg.pulse = parse_pulse(doc);
  cfg.flux.validate();
  if (cfg.cycles < 0) throw ConfigError("cycles must be >= 0");
  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  return cfg;
}

EstimateConfig parse_estimate_config(std::string_view text,
                                     const std::filesystem::path& base_dir) {
  const json doc = parse_document(text);
  reject_unknown(doc, "estimate config",
                 {"estimator", "phi_sig", "phi_bkg", "attenuation", "bin_width", "pulse", "input"});
  EstimateConfig cfg;
  cfg.estimator = parse_estimator(get_or<std::string>(doc, "estimator", "coates"));
  cfg.phi_sig = get_or(doc, "phi_sig", cfg.phi_sig);
  cfg.phi_bkg = get_or(doc, "phi_bkg", cfg.phi_bkg);
  cfg.attenuation = get_or(doc, "attenuation", cfg.attenuation);
  cfg.bin_width = get_or(doc, "bin_width", cfg.bin_width);
  cfg.pulse = parse_pulse(doc);
  if (doc.contains("input")) cfg.input = (base_dir / require<std::string>(doc, "input")).string();
  if (!(cfg.attenuation > 0.0 && cfg.attenuation <= 1.0)) {
    throw ConfigError("attenuation must lie in (0, 1]");
  }
  if (!(cfg.bin_width > 0.0)) throw ConfigError("bin_width must be > 0");
  return cfg;
}

SweepConfig parse_sweep_config(std::string_view text) {
  const json doc = parse_document(text);
  reject_unknown(doc, "sweep config",
                 {"phi_sig", "phi_bkg", "upsilon", "num_bins", "cycles", "trials", "estimator",
                  "estimators", "seed", "depth", "pulse", "drop_invalid", "threads"});
  SweepConfig cfg;
  TrialSpec& s = cfg.spec;
  s.phi_sig = number_list(doc, "phi_sig", s.phi_sig);
  s.phi_bkg = number_list(doc, "phi_bkg", s.phi_bkg);
  s.upsilon = number_list(doc, "upsilon", s.upsilon);
  s.num_bins = get_or(doc, "num_bins", s.num_bins);
  s.cycles = get_or(doc, "cycles", s.cycles);
  s.trials = get_or(doc, "trials", s.trials);
  s.estimators = parse_estimators(doc);
  s.seed = get_or(doc, "seed", s.seed);
  if (doc.contains("depth")) {
    const auto& d = doc["depth"];
    if (d.is_string() && d.get<std::string>() == "uniform") {
      s.fixed_depth.reset();
    } else if (d.is_number_integer()) {
      s.fixed_depth = d.get<int>();
    } else {
      throw ConfigError("'depth' must be \"uniform\" or an integer bin");
    }
  }
  s.pulse = parse_pulse(doc);
  s.drop_invalid = get_or(doc, "drop_invalid", s.drop_invalid);
  s.threads = get_or(doc, "threads", s.threads);
  s.validate();
  return cfg;
}

SceneConfig parse_scene_config(std::string_view text, const std::filesystem::path& base_dir) {
  const json doc = parse_document(text);
  reject_unknown(doc, "scene config",
                 {"depth_map", "synthetic", "phi_bkg", "phi_sig", "policy", "policies",
                  "num_bins", "bin_width", "cycles", "seed", "estimator",
                  "extreme_cycle_background", "background_cycles", "inlier_threshold_bins",
                  "pixel_pitch", "pulse", "threads"});
  SceneConfig cfg;
  SceneJob& job = cfg.job;
  job.num_bins = get_or(doc, "num_bins", job.num_bins);
  if (doc.contains("depth_map") == doc.contains("synthetic")) {
    throw ConfigError("scene config needs exactly one of 'depth_map' or 'synthetic'");
  }
  job.depth = doc.contains("depth_map")
                  ? to_depth_grid(load_grid(base_dir / require<std::string>(doc, "depth_map")))
                  : synthetic_depth(doc["synthetic"], job.num_bins);
  job.phi_bkg = parse_flux_map(doc, "phi_bkg", job.depth, base_dir, 0.01);
  job.phi_sig = parse_flux_map(doc, "phi_sig", job.depth, base_dir, 1.0);
  if (doc.contains("policies")) {
    cfg.policies.clear();
    for (const auto& p : require<std::vector<std::string>>(doc, "policies")) {
      cfg.policies.push_back(parse_policy(p));
    }
    if (cfg.policies.empty()) throw ConfigError("'policies' must not be empty");
  } else if (doc.contains("policy")) {
    cfg.policies = {parse_policy(require<std::string>(doc, "policy"))};
  }
  job.bin_width = get_or(doc, "bin_width", job.bin_width);
  job.cycles = get_or(doc, "cycles", job.cycles);
  job.seed = get_or(doc, "seed", job.seed);
  job.estimator = parse_estimator(get_or<std::string>(doc, "estimator", "coates"));
  job.extreme_cycle_background =
      get_or(doc, "extreme_cycle_background", job.extreme_cycle_background);
  job.background_cycles = get_or(doc, "background_cycles", job.background_cycles);
  job.inlier_threshold_bins = get_or(doc, "inlier_threshold_bins", job.inlier_threshold_bins);
  job.pixel_pitch = get_or(doc, "pixel_pitch", job.pixel_pitch);
  job.pulse = parse_pulse(doc);
  job.threads = get_or(doc, "threads", job.threads);
  job.validate();
  return cfg;
}

AdaptConfig parse_adapt_config(std::string_view text) {
  const json doc = parse_document(text);
  reject_unknown(doc, "adapt config",
                 {"num_bins", "background_cycles", "cycles", "estimator", "seed", "pulse",
                  "threads", "points"});
  AdaptConfig cfg;
  cfg.options.num_bins = get_or(doc, "num_bins", cfg.options.num_bins);
  cfg.options.background_cycles = get_or(doc, "background_cycles", cfg.options.background_cycles);
  cfg.options.cycles = get_or(doc, "cycles", cfg.options.cycles);
  cfg.options.estimator = parse_estimator(get_or<std::string>(doc, "estimator", "coates"));
  cfg.options.pulse = parse_pulse(doc);
  cfg.seed = get_or(doc, "seed", cfg.seed);
  cfg.threads = get_or(doc, "threads", cfg.threads);
  const auto it = doc.find("points");
  if (it == doc.end() || !it->is_array() || it->empty()) {
    throw ConfigError("adapt config needs a nonempty 'points' list");
  }
  for (const auto& p : *it) {
    reject_unknown(p, "adapt point", {"name", "phi_sig", "phi_bkg", "true_bin", "count"});
    AdaptGroup g;
    g.name = get_or<std::string>(p, "name", fmt::format("group{}", cfg.groups.size()));
    g.phi_sig = get_or(p, "phi_sig", g.phi_sig);
    g.phi_bkg = get_or(p, "phi_bkg", g.phi_bkg);
    if (p.contains("true_bin")) g.true_bin = require<int>(p, "true_bin");
    g.count = get_or(p, "count", g.count);
    if (g.count < 1) throw ConfigError("adapt point count must be >= 1");
    FluxConfig probe;
    probe.phi_sig = g.phi_sig;
    probe.phi_bkg = g.phi_bkg;
    probe.num_bins = cfg.options.num_bins;
    probe.true_bin = g.true_bin.value_or(1);
    probe.validate();
    cfg.groups.push_back(std::move(g));
  }
  if (cfg.options.background_cycles < 1) throw ConfigError("background_cycles must be >= 1");
  if (cfg.options.cycles < 0) throw ConfigError("cycles must be >= 0");
  return cfg;
}

}  // namespace spadflux
