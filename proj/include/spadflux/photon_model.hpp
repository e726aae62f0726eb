#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spadflux {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

/// Raised when a physical parameter violates its documented range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scene and sensor parameters for a single scene point.
///
/// Fluxes are mean photon counts per laser cycle: `phi_sig` is the total
/// signal pulse energy, `phi_bkg` the ambient (plus dark count) level in
/// every bin. Bins are numbered 1..num_bins.
struct FluxConfig {
  double phi_sig = 0.0;
  double phi_bkg = 0.0;
  int num_bins = 1000;
  double bin_width = 100e-12;  // seconds
  int true_bin = 1;
  double attenuation = 1.0;

  /// Throws ParameterError naming the first violated invariant.
  void validate() const;

  /// c * B * delta / 2, in meters.
  double unambiguous_range() const;
};

/// Temporal shape of the laser return, as per-bin weights around the peak.
///
/// Weights sum to one so that phi_sig keeps its meaning as total pulse
/// photons. The profile is periodic with the laser: weights that fall past
/// bin B wrap to the start of the cycle.
class PulseShape {
 public:
  /// Ideal single-bin impulse.
  static PulseShape delta();

  /// Arbitrary profile; `peak` is the index in `weights` that lands on the
  /// true bin. Weights are rescaled to unit sum.
  static PulseShape profile(std::vector<double> weights, int peak);

  /// Sampled Gaussian with standard deviation `sigma_bins`, truncated at
  /// +-`half_width` bins.
  static PulseShape gaussian(double sigma_bins, int half_width);

  bool is_delta() const { return weights_.size() == 1; }
  std::span<const double> weights() const { return weights_; }
  int peak() const { return peak_; }

  /// Weight landing on bin `bin` (1-based) when the peak sits at `true_bin`.
  double weight_at(int bin, int true_bin, int num_bins) const;

 private:
  PulseShape(std::vector<double> weights, int peak)
      : weights_(std::move(weights)), peak_(peak) {}

  std::vector<double> weights_;
  int peak_ = 0;
};

/// Mean number of photons incident in each bin per cycle.
class Waveform {
 public:
  Waveform() = default;
  explicit Waveform(std::vector<double> rates);

  std::span<const double> rates() const { return rates_; }
  int num_bins() const { return static_cast<int>(rates_.size()); }
  /// Rate of bin `bin` (1-based).
  double rate(int bin) const { return rates_[static_cast<std::size_t>(bin - 1)]; }

  /// Returns a copy with every rate multiplied by `factor`.
  Waveform scaled(double factor) const;

 private:
  std::vector<double> rates_;
};

/// r_i = upsilon * (phi_sig * w_i + phi_bkg).
Waveform build_waveform(const FluxConfig& cfg,
                        const PulseShape& pulse = PulseShape::delta());

/// Sum of all per-bin rates.
double total_flux(const Waveform& w);

}  // namespace spadflux
