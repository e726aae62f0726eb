#include "spadflux/scene.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "spadflux/flux_optimizer.hpp"
#include "spadflux/parallel.hpp"

namespace spadflux {

Grid<double> read_grid(std::istream& in) {
  Grid<double> g;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    std::vector<double> values;
    std::string token;
    while (row >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParameterError(fmt::format("grid line {}: '{}' is not a number", line_no, token));
      }
    }
    if (g.rows == 0) {
      g.cols = static_cast<int>(values.size());
    } else if (static_cast<int>(values.size()) != g.cols) {
      throw ParameterError(fmt::format("grid line {}: expected {} values, found {}", line_no,
                                       g.cols, values.size()));
    }
    g.values.insert(g.values.end(), values.begin(), values.end());
    ++g.rows;
  }
  if (g.rows == 0) throw ParameterError("grid is empty");
  return g;
}

namespace {

template <typename T>
void write_grid_impl(std::ostream& out, const Grid<T>& g, std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (c > 0) out << ' ';
      const T v = g.at(r, c);
      if constexpr (std::is_floating_point_v<T>) {
        if (std::isnan(v)) {
          out << "nan";
          continue;
        }
      }
      out << fmt::format("{}", v);
    }
    out << '\n';
  }
}

}  // namespace

void write_grid(std::ostream& out, const Grid<double>& g, std::span<const std::string> comments) {
  write_grid_impl(out, g, comments);
}

void write_grid(std::ostream& out, const Grid<int>& g, std::span<const std::string> comments) {
  write_grid_impl(out, g, comments);
}

Grid<int> to_depth_grid(const Grid<double>& g) {
  Grid<int> out(g.rows, g.cols);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g.values[i];
    if (!(std::floor(v) == v) || std::abs(v) > 1e9) {
      throw ParameterError(fmt::format("depth map entry {} is not an integer bin", v));
    }
    out.values[i] = static_cast<int>(v);
  }
  return out;
}

std::string_view policy_name(AttenuationPolicy p) {
  switch (p) {
    case AttenuationPolicy::none: return "none";
    case AttenuationPolicy::extreme: return "extreme";
    case AttenuationPolicy::optimal_global: return "optimal-global";
    case AttenuationPolicy::optimal_per_pixel: return "optimal-per-pixel";
  }
  return "unknown";
}

AttenuationPolicy parse_policy(std::string_view name) {
  if (name == "none") return AttenuationPolicy::none;
  if (name == "extreme") return AttenuationPolicy::extreme;
  if (name == "optimal-global") return AttenuationPolicy::optimal_global;
  if (name == "optimal-per-pixel") return AttenuationPolicy::optimal_per_pixel;
  throw ParameterError(fmt::format(
      "unknown attenuation policy '{}' (expected none, extreme, optimal-global or "
      "optimal-per-pixel)",
      name));
}

Grid<double> constant_like(const Grid<int>& like, double value) {
  return Grid<double>(like.rows, like.cols, value);
}

void SceneJob::validate() const {
  if (depth.rows < 1 || depth.cols < 1) throw ParameterError("scene depth map is empty");
  if (!phi_bkg.same_shape(depth.rows, depth.cols) ||
      !phi_sig.same_shape(depth.rows, depth.cols)) {
    throw ParameterError(
        fmt::format("flux maps must match the {}x{} depth map", depth.rows, depth.cols));
  }
  if (cycles < 0) throw ParameterError("cycles must be >= 0");
  if (background_cycles < 0) throw ParameterError("background_cycles must be >= 0");
  if (!(extreme_cycle_background > 0.0)) {
    throw ParameterError("extreme_cycle_background must be > 0");
  }
  if (!(inlier_threshold_bins > 0.0)) throw ParameterError("inlier threshold must be > 0");
  FluxConfig probe;
  probe.num_bins = num_bins;
  probe.bin_width = bin_width;
  for (std::size_t i = 0; i < depth.size(); ++i) {
    probe.true_bin = depth.values[i];
    probe.phi_bkg = phi_bkg.values[i];
    probe.phi_sig = phi_sig.values[i];
    try {
      probe.validate();
    } catch (const ParameterError& e) {
      throw ParameterError(fmt::format("scene pixel {}: {}", i, e.what()));
    }
  }
}

SceneResult simulate_scene(const SceneJob& job) {
  job.validate();
  const int rows = job.depth.rows;
  const int cols = job.depth.cols;

  // Global policies are set from the mean ambient level over the scene.
  double mean_bkg = 0.0;
  for (double v : job.phi_bkg.values) mean_bkg += v;
  mean_bkg /= static_cast<double>(job.phi_bkg.size());
  double global_upsilon = 1.0;
  if (mean_bkg > 0.0) {
    if (job.policy == AttenuationPolicy::extreme) {
      global_upsilon =
          attenuation_for_cycle_background(job.extreme_cycle_background, mean_bkg, job.num_bins);
    } else if (job.policy == AttenuationPolicy::optimal_global) {
      global_upsilon = optimal_attenuation(mean_bkg, job.num_bins).upsilon_approx;
    }
  }

  SceneResult out;
  out.estimated = Grid<int>(rows, cols, 0);
  out.error = Grid<double>(rows, cols, std::numeric_limits<double>::quiet_NaN());
  out.upsilon = Grid<double>(rows, cols, 1.0);

  parallel_for(job.depth.size(), job.threads, [&](std::size_t i) {
    RandomStream rng = make_stream(job.seed, {i});
    const double phi_bkg = job.phi_bkg.values[i];
    const double phi_sig = job.phi_sig.values[i];
    const int true_bin = job.depth.values[i];
    DepthEstimate est;
    double upsilon = global_upsilon;

    if (job.policy == AttenuationPolicy::optimal_per_pixel && job.background_cycles > 0) {
      AdaptiveOptions opts;
      opts.num_bins = job.num_bins;
      opts.background_cycles = job.background_cycles;
      opts.cycles = job.cycles;
      opts.estimator = job.estimator;
      opts.pulse = job.pulse;
      const auto res = adaptive_acquire({phi_sig, phi_bkg, true_bin}, opts, rng);
      est = res.depth;
      upsilon = res.upsilon;
    } else {
      if (job.policy == AttenuationPolicy::optimal_per_pixel) {
        upsilon = phi_bkg > 0.0 ? optimal_attenuation(phi_bkg, job.num_bins).upsilon_approx : 1.0;
      }
      FluxConfig cfg;
      cfg.phi_sig = phi_sig;
      cfg.phi_bkg = phi_bkg;
      cfg.num_bins = job.num_bins;
      cfg.bin_width = job.bin_width;
      cfg.true_bin = true_bin;
      cfg.attenuation = upsilon;
      const auto dist = detection_probabilities(build_waveform(cfg, job.pulse));
      const Histogram h = sample_histogram(dist, job.cycles, rng);
      est = estimate_depth(job.estimator, h, {phi_sig, phi_bkg, upsilon, &job.pulse});
    }

    out.upsilon.values[i] = upsilon;
    if (est.valid) {
      out.estimated.values[i] = est.bin;
      out.error.values[i] = wrapped_error(est.bin, true_bin, job.num_bins);
    }
  });

  SceneSummary& s = out.summary;
  s.pixels = static_cast<int>(job.depth.size());
  double sum_sq = 0.0;
  int inliers = 0;
  double sum_upsilon = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      sum_upsilon += out.upsilon.at(r, c);
      const double e = out.error.at(r, c);
      if (std::isnan(e)) {
        ++s.invalid_pixels;
        sum_sq += (job.num_bins / 2.0) * (job.num_bins / 2.0);
        continue;
      }
      sum_sq += e * e;
      if (std::abs(e) < job.inlier_threshold_bins) ++inliers;
      const int bin = out.estimated.at(r, c);
      out.cloud.push_back({c * job.pixel_pitch, r * job.pixel_pitch,
                           kSpeedOfLight * bin * job.bin_width / 2.0});
    }
  }
  s.inlier_pct = 100.0 * inliers / s.pixels;
  s.rmse_bins = std::sqrt(sum_sq / s.pixels);
  s.mean_upsilon = sum_upsilon / s.pixels;
  return out;
}

void write_point_cloud(std::ostream& out, std::span<const Point3> cloud,
                       std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  for (const auto& p : cloud) out << fmt::format("{} {} {}\n", p.x, p.y, p.z);
}

}  // namespace spadflux
