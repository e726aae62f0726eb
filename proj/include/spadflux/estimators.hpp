#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "spadflux/histogram_sim.hpp"
#include "spadflux/photon_model.hpp"

namespace spadflux {

/// Raised when a statistic cannot be computed from the available data.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-bin output of the Coates inversion.
///
/// remaining[i] is D_i, the number of cycles with no detection before bin
/// i+1. Entries of q_hat and r_hat are empty where D_i = 0. A bin that
/// absorbed every remaining cycle (N_i = D_i > 0) has q_hat = 1 and
/// r_hat = +infinity.
struct WaveformEstimate {
  std::vector<std::optional<double>> q_hat;
  std::vector<std::optional<double>> r_hat;
  std::vector<std::int64_t> remaining;

  int num_bins() const { return static_cast<int>(q_hat.size()); }
};

/// A depth bin (1-based). `valid` is false when the estimator had nothing
/// to work with; `bin` is then 0.
struct DepthEstimate {
  int bin = 0;
  bool valid = false;

  static DepthEstimate at(int bin) { return {bin, true}; }
  static DepthEstimate invalid() { return {}; }

  /// c * bin * delta / 2 in meters.
  double distance(double bin_width) const { return kSpeedOfLight * bin * bin_width / 2.0; }

  bool operator==(const DepthEstimate&) const = default;
};

/// Posterior over the depth bin under a uniform prior.
struct Posterior {
  std::vector<double> log_weights;    // unnormalized
  std::vector<double> probabilities;  // sums to 1

  int num_bins() const { return static_cast<int>(probabilities.size()); }
};

WaveformEstimate coates_correct(const Histogram& h);

/// argmax of r_hat over defined bins. Saturated bins win; ties go to the
/// smallest index.
DepthEstimate coates_depth(const WaveformEstimate& e);

/// argmax of raw counts N_1..N_B (empty-cycle count excluded).
DepthEstimate argmax_depth(const Histogram& h);

/// Log-posterior for every candidate depth given known fluxes. The bin
/// probabilities for depth d are a rotation of those for depth 1, so
/// likelihoods are evaluated as correlations of the histogram with the
/// pulse support, O(B * pulse length).
///
/// Probabilities are clamped to [1e-12, 1 - 1e-12] before taking logs.
Posterior map_posterior(const Histogram& h, double phi_sig, double phi_bkg, double upsilon,
                        const PulseShape& pulse = PulseShape::delta());

/// Mode of the posterior; ties go to the smallest index.
DepthEstimate map_depth(const Posterior& p);

/// Circular posterior mean, rounded to the nearest bin. Falls back to the
/// mode when the mean direction is undefined (e.g. a uniform posterior).
DepthEstimate bayes_depth(const Posterior& p);

/// Closed-form MLE of a constant per-bin flux from a laser-off histogram.
/// Throws EstimationError when the data cannot support an estimate.
double estimate_background(const Histogram& h);

/// sigma_i^2 = q_i^2 (1 - q_i) / (N p_i); empty where p_i = 0.
std::vector<std::optional<double>> coates_variance(const Waveform& w, std::int64_t cycles);

/// Low-flux approximation r_i r / (N C_i); empty where r_i = 0.
std::vector<std::optional<double>> coates_variance_approx(const Waveform& w,
                                                          std::int64_t cycles);

}  // namespace spadflux
