#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spadflux/harness.hpp"

namespace spadflux {

/// Row-major H x W grid.
template <typename T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(int r, int c, T fill = T{})
      : rows(r), cols(c), values(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  std::size_t size() const { return values.size(); }
  T& at(int r, int c) { return values[index(r, c)]; }
  const T& at(int r, int c) const { return values[index(r, c)]; }
  bool same_shape(int r, int c) const { return rows == r && cols == c; }

 private:
  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(c);
  }
};

/// Reads rows of whitespace-separated numbers; blank and `#` lines are
/// skipped. All rows must have the same length.
Grid<double> read_grid(std::istream& in);

/// Writes `# ...` comment lines, then one line per row. NaN is written as
/// `nan`.
void write_grid(std::ostream& out, const Grid<double>& g,
                std::span<const std::string> comments = {});
void write_grid(std::ostream& out, const Grid<int>& g,
                std::span<const std::string> comments = {});

/// Converts a numeric grid of true bins, rejecting non-integers.
Grid<int> to_depth_grid(const Grid<double>& g);

enum class AttenuationPolicy { none, extreme, optimal_global, optimal_per_pixel };

std::string_view policy_name(AttenuationPolicy p);
AttenuationPolicy parse_policy(std::string_view name);

struct SceneJob {
  Grid<int> depth;        // true bins, 1..B
  Grid<double> phi_bkg;   // same shape as depth
  Grid<double> phi_sig;   // same shape as depth
  AttenuationPolicy policy = AttenuationPolicy::optimal_global;
  int num_bins = 1000;
  double bin_width = 100e-12;
  std::int64_t cycles = 500;
  std::uint64_t seed = 0;
  Estimator estimator = Estimator::coates;
  /// Photons per cycle Upsilon B Phi_bkg targeted by the extreme policy.
  double extreme_cycle_background = 0.05;
  /// Laser-off cycles per pixel for the per-pixel policy. 0 uses the true
  /// per-pixel background instead of an estimate.
  std::int64_t background_cycles = 30;
  /// A pixel is an inlier when |error| < this many bins.
  double inlier_threshold_bins = 10.0;
  double pixel_pitch = 1.0;  // meters between neighboring pixels
  PulseShape pulse = PulseShape::delta();
  int threads = 0;

  void validate() const;
};

/// Grid of `value` with the shape of `like`.
Grid<double> constant_like(const Grid<int>& like, double value);

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct SceneSummary {
  int pixels = 0;
  int invalid_pixels = 0;
  double inlier_pct = 0.0;
  double rmse_bins = 0.0;  // invalid pixels scored as B/2
  double mean_upsilon = 0.0;
};

struct SceneResult {
  Grid<int> estimated;     // 0 where the estimate is invalid
  Grid<double> error;      // signed wrapped error in bins, NaN where invalid
  Grid<double> upsilon;    // attenuation applied per pixel
  std::vector<Point3> cloud;
  SceneSummary summary;
};

/// Independent per-pixel simulation and estimation. Pixel (r, c) draws from
/// the stream derive_seed(seed, {r * cols + c}). Points are placed at
/// (c * pitch, r * pitch, bin * c_light * delta / 2).
SceneResult simulate_scene(const SceneJob& job);

void write_point_cloud(std::ostream& out, std::span<const Point3> cloud,
                       std::span<const std::string> comments = {});

}  // namespace spadflux
