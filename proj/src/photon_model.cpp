#include "spadflux/photon_model.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace spadflux {

void FluxConfig::validate() const {
  if (!(phi_sig >= 0.0) || !std::isfinite(phi_sig)) {
    throw ParameterError(fmt::format("phi_sig must be finite and >= 0 (got {})", phi_sig));
  }
  if (!(phi_bkg >= 0.0) || !std::isfinite(phi_bkg)) {
    throw ParameterError(fmt::format("phi_bkg must be finite and >= 0 (got {})", phi_bkg));
  }
  if (phi_sig == 0.0 && phi_bkg == 0.0) {
    throw ParameterError("phi_sig and phi_bkg must not both be zero");
  }
  if (num_bins < 2) {
    throw ParameterError(fmt::format("num_bins must be >= 2 (got {})", num_bins));
  }
  if (true_bin < 1 || true_bin > num_bins) {
    throw ParameterError(
        fmt::format("true_bin must lie in [1, {}] (got {})", num_bins, true_bin));
  }
  if (!(attenuation > 0.0 && attenuation <= 1.0)) {
    throw ParameterError(fmt::format("attenuation must lie in (0, 1] (got {})", attenuation));
  }
  if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
    throw ParameterError(fmt::format("bin_width must be > 0 (got {})", bin_width));
  }
}

double FluxConfig::unambiguous_range() const {
  return kSpeedOfLight * num_bins * bin_width / 2.0;
}

PulseShape PulseShape::delta() { return PulseShape({1.0}, 0); }

PulseShape PulseShape::profile(std::vector<double> weights, int peak) {
  if (weights.empty()) {
    throw ParameterError("pulse profile must have at least one weight");
  }
  if (peak < 0 || peak >= static_cast<int>(weights.size())) {
    throw ParameterError(fmt::format("pulse peak index {} outside profile of length {}",
                                     peak, weights.size()));
  }
  double sum = 0.0;
  for (double v : weights) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw ParameterError("pulse weights must be finite and nonnegative");
    }
    sum += v;
  }
  if (!(sum > 0.0)) {
    throw ParameterError("pulse weights must not all be zero");
  }
  for (double& v : weights) v /= sum;
  return PulseShape(std::move(weights), peak);
}

PulseShape PulseShape::gaussian(double sigma_bins, int half_width) {
  if (!(sigma_bins > 0.0)) {
    throw ParameterError(fmt::format("gaussian sigma must be > 0 (got {})", sigma_bins));
  }
  if (half_width < 0) {
    throw ParameterError("gaussian half width must be >= 0");
  }
  std::vector<double> w(static_cast<std::size_t>(2 * half_width + 1));
  for (int k = -half_width; k <= half_width; ++k) {
    const double z = k / sigma_bins;
    w[static_cast<std::size_t>(k + half_width)] = std::exp(-0.5 * z * z);
  }
  return profile(std::move(w), half_width);
}

double PulseShape::weight_at(int bin, int true_bin, int num_bins) const {
  const int n = static_cast<int>(weights_.size());
  double w = 0.0;
  // Several profile taps can alias onto one bin when the profile is longer
  // than the cycle.
  for (int k = 0; k < n; ++k) {
    int target = true_bin + (k - peak_);
    target = ((target - 1) % num_bins + num_bins) % num_bins + 1;
    if (target == bin) w += weights_[static_cast<std::size_t>(k)];
  }
  return w;
}

Waveform::Waveform(std::vector<double> rates) : rates_(std::move(rates)) {
  if (rates_.empty()) {
    throw ParameterError("waveform must have at least one bin");
  }
  double total = 0.0;
  for (double r : rates_) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw ParameterError("waveform rates must be finite and nonnegative");
    }
    total += r;
  }
  if (!std::isfinite(total)) {
    throw ParameterError("waveform total flux must be finite");
  }
}

Waveform Waveform::scaled(double factor) const {
  std::vector<double> out(rates_);
  for (double& r : out) r *= factor;
  return Waveform(std::move(out));
}

Waveform build_waveform(const FluxConfig& cfg, const PulseShape& pulse) {
  cfg.validate();
  const auto nbins = static_cast<std::size_t>(cfg.num_bins);
  std::vector<double> rates(nbins, cfg.attenuation * cfg.phi_bkg);
  const int n = static_cast<int>(pulse.weights().size());
  for (int k = 0; k < n; ++k) {
    int target = cfg.true_bin + (k - pulse.peak());
    target = ((target - 1) % cfg.num_bins + cfg.num_bins) % cfg.num_bins;
    rates[static_cast<std::size_t>(target)] +=
        cfg.attenuation * cfg.phi_sig * pulse.weights()[static_cast<std::size_t>(k)];
  }
  return Waveform(std::move(rates));
}

double total_flux(const Waveform& w) {
  return std::accumulate(w.rates().begin(), w.rates().end(), 0.0);
}

}  // namespace spadflux
