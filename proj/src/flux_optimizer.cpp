#include "spadflux/flux_optimizer.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "spadflux/histogram_sim.hpp"

namespace spadflux {

double ReceptivityCurve::min() const {
  return *std::min_element(coeffs.begin(), coeffs.end());
}

ReceptivityCurve bin_receptivity(double upsilon, double phi_bkg, int num_bins) {
  if (!(upsilon > 0.0)) throw ParameterError("upsilon must be > 0");
  if (!(phi_bkg > 0.0)) throw ParameterError("phi_bkg must be > 0");
  if (num_bins < 2) throw ParameterError("num_bins must be >= 2");
  const double x = upsilon * phi_bkg;
  const double head = num_bins * -std::expm1(-x);
  ReceptivityCurve c;
  c.per_bin_flux = x;
  c.coeffs.resize(static_cast<std::size_t>(num_bins));
  for (int i = 0; i < num_bins; ++i) {
    c.coeffs[static_cast<std::size_t>(i)] = head * std::exp(-i * x);
  }
  return c;
}

ReceptivityCurve bin_receptivity(const Waveform& w) {
  const auto rates = w.rates();
  const double r = total_flux(w);
  if (!(r > 0.0)) throw ParameterError("receptivity needs a waveform with nonzero flux");
  const auto d = detection_probabilities(w);
  ReceptivityCurve c;
  c.coeffs.resize(rates.size());
  double preceding = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double ratio = rates[i] > 0.0 ? d.probs()[i] / rates[i] : std::exp(-preceding);
    c.coeffs[i] = ratio * r;
    preceding += rates[i];
  }
  return c;
}

namespace {

OptimalAttenuation optimal_from_bins(double phi_bkg, double bins) {
  if (!(phi_bkg > 0.0)) {
    throw ParameterError(fmt::format("phi_bkg must be > 0 (got {})", phi_bkg));
  }
  if (!(bins > 1.0)) throw ParameterError(fmt::format("bin count must exceed 1 (got {})", bins));
  OptimalAttenuation out;
  // ln(B/(B-1)) = -ln(1 - 1/B)
  out.raw_exact = -std::log1p(-1.0 / bins) / phi_bkg;
  out.raw_approx = 1.0 / (bins * phi_bkg);
  out.clamped = out.raw_exact > 1.0 || out.raw_approx > 1.0;
  out.upsilon_exact = std::min(1.0, out.raw_exact);
  out.upsilon_approx = std::min(1.0, out.raw_approx);
  return out;
}

}  // namespace

OptimalAttenuation optimal_attenuation(double phi_bkg, int num_bins) {
  if (num_bins < 2) throw ParameterError("num_bins must be >= 2");
  return optimal_from_bins(phi_bkg, num_bins);
}

OptimalAttenuation optimal_attenuation_for_range(double phi_bkg, double d_max,
                                                 double bin_width) {
  if (!(d_max > 0.0) || !(bin_width > 0.0)) {
    throw ParameterError("d_max and bin_width must be > 0");
  }
  return optimal_from_bins(phi_bkg, 2.0 * d_max / (kSpeedOfLight * bin_width));
}

double attenuation_for_cycle_background(double photons_per_cycle, double phi_bkg,
                                        double num_bins) {
  if (!(photons_per_cycle > 0.0) || !(phi_bkg > 0.0) || !(num_bins > 0.0)) {
    throw ParameterError("cycle background, phi_bkg and bin count must be > 0");
  }
  return std::min(1.0, photons_per_cycle / (num_bins * phi_bkg));
}

BrcDecomposition brc_decomposition(const ReceptivityCurve& c) {
  if (c.num_bins() < 2) throw ParameterError("skew is undefined for fewer than two bins");
  if (!(c.per_bin_flux > 0.0)) {
    throw ParameterError("decomposition needs a constant-flux receptivity curve");
  }
  BrcDecomposition out;
  double sum = 0.0;
  for (double v : c.coeffs) sum += v;
  out.mean_receptivity = sum / c.num_bins();
  // 1/C_B - e^{-x}/C_1 summed as a geometric series, which avoids the
  // cancellation between the two reciprocals when the BRC is nearly flat.
  const double x = c.per_bin_flux;
  out.skew = std::expm1(c.num_bins() * x) / (c.num_bins() * std::expm1(x));
  return out;
}

double error_probability_bound(double upsilon, double phi_bkg, double theta,
                               std::int64_t cycles, int num_bins) {
  if (cycles < 0) throw ParameterError("cycles must be >= 0");
  if (!(theta > 0.0)) throw ParameterError("theta must be > 0");
  const auto c = bin_receptivity(upsilon, phi_bkg, num_bins);
  const double scale = static_cast<double>(cycles) / num_bins * theta * theta / 2.0;
  std::vector<double> inv(c.coeffs.size());
  for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / c.coeffs[i];
  double total = 0.0;
  for (double inv_tau : inv) {
    for (double inv_i : inv) {
      total += 0.5 * std::exp(-scale / (inv_i + (1.0 + theta) * inv_tau));
    }
  }
  return total / num_bins;
}

}  // namespace spadflux
