#pragma once

#include <cstdint>
#include <vector>

#include "spadflux/photon_model.hpp"

namespace spadflux {

/// Bin receptivity coefficients C_1..C_B.
struct ReceptivityCurve {
  std::vector<double> coeffs;
  /// Per-bin attenuated background Upsilon*Phi_bkg for curves built from the
  /// constant-flux closed form; 0 for curves built from a waveform.
  double per_bin_flux = 0.0;

  int num_bins() const { return static_cast<int>(coeffs.size()); }
  double first() const { return coeffs.front(); }
  double last() const { return coeffs.back(); }
  double min() const;
};

/// C_i = B (1 - e^{-Upsilon Phi_bkg}) e^{-(i-1) Upsilon Phi_bkg}.
ReceptivityCurve bin_receptivity(double upsilon, double phi_bkg, int num_bins);

/// General form C_i = (p_i / r_i) r. Zero-rate bins take the r_i -> 0 limit
/// r e^{-sum_{k<i} r_k}.
ReceptivityCurve bin_receptivity(const Waveform& w);

struct OptimalAttenuation {
  double upsilon_exact = 1.0;   // ln(B/(B-1)) / Phi_bkg, clamped to 1
  double upsilon_approx = 1.0;  // 1 / (B Phi_bkg), clamped to 1
  double raw_exact = 1.0;       // before clamping
  double raw_approx = 1.0;
  bool clamped = false;         // either raw value exceeded 1
};

/// Attenuation maximizing the minimum receptivity C_B.
OptimalAttenuation optimal_attenuation(double phi_bkg, int num_bins);

/// Same, with the bin count derived from the unambiguous range:
/// B = 2 d_max / (c delta), which need not be an integer.
OptimalAttenuation optimal_attenuation_for_range(double phi_bkg, double d_max,
                                                 double bin_width);

/// Attenuation that puts `photons_per_cycle` background photons into one
/// cycle, i.e. Upsilon B Phi_bkg = photons_per_cycle, clamped to 1.
double attenuation_for_cycle_background(double photons_per_cycle, double phi_bkg,
                                        double num_bins);

/// Mean receptivity and skew of a constant-flux BRC, with
/// C_B = mean_receptivity / skew.
///
/// skew = 1/C_B - e^{-x}/C_1, where x = Upsilon Phi_bkg: the gap between
/// the reciprocal receptivities of the last bin and of the geometric BRC
/// extended one bin before the first. Equivalently the mean of e^{(i-1)x},
/// so skew >= 1 with equality only in the flat limit.
struct BrcDecomposition {
  double mean_receptivity = 0.0;
  double skew = 0.0;
};

BrcDecomposition brc_decomposition(const ReceptivityCurve& c);

/// Chernoff-style upper bound on the depth error probability of the Coates
/// estimator, summed over all B^2 (i, tau) pairs and averaged over tau.
/// `theta` is the signal-to-background ratio Phi_sig / Phi_bkg.
double error_probability_bound(double upsilon, double phi_bkg, double theta,
                               std::int64_t cycles, int num_bins);

}  // namespace spadflux
