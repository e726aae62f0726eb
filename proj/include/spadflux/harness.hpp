#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spadflux/estimators.hpp"
#include "spadflux/histogram_sim.hpp"
#include "spadflux/photon_model.hpp"
#include "spadflux/random.hpp"

namespace spadflux {

enum class Estimator { coates, argmax, map, bayes };

std::string_view estimator_name(Estimator e);
/// Throws ParameterError for unknown names.
Estimator parse_estimator(std::string_view name);

/// Everything an estimator may need beyond the histogram. Only map and
/// bayes read the flux fields.
struct KnownFlux {
  double phi_sig = 0.0;
  double phi_bkg = 0.0;
  double upsilon = 1.0;
  const PulseShape* pulse = nullptr;  // delta when null
};

DepthEstimate estimate_depth(Estimator e, const Histogram& h, const KnownFlux& flux);

/// ((tau_hat - tau + B/2) mod B) - B/2, in [-B/2, B/2).
double wrapped_error(int tau_hat, int tau, int num_bins);

/// Monte Carlo sweep over a (phi_sig, phi_bkg, upsilon) grid.
struct TrialSpec {
  std::vector<double> phi_sig{1.0};
  std::vector<double> phi_bkg{0.01};
  std::vector<double> upsilon{1.0};
  int num_bins = 1000;
  std::int64_t cycles = 500;
  int trials = 200;
  std::vector<Estimator> estimators{Estimator::coates};
  std::uint64_t seed = 0;
  /// Fixed true bin; uniform over 1..B when empty.
  std::optional<int> fixed_depth;
  PulseShape pulse = PulseShape::delta();
  /// Invalid estimates are scored as an error of B/2 unless dropped.
  bool drop_invalid = false;
  int threads = 0;

  void validate() const;
};

struct SweepRow {
  double phi_sig = 0.0;
  double phi_bkg = 0.0;
  double upsilon = 1.0;
  Estimator estimator = Estimator::coates;
  int trials = 0;
  double rmse_bins = 0.0;
  double rel_err_pct = 0.0;
  double mean_abs_err = 0.0;
  int invalid_trials = 0;
  /// Every trial was invalid and invalid trials were dropped; metrics are NaN.
  bool all_invalid = false;
  /// Standard error of the RMSE (delta method on the mean squared error).
  double rmse_std_error = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  int num_bins = 0;
  std::int64_t cycles = 0;
  std::uint64_t seed = 0;
  std::string depth_prior;  // "uniform" or "fixed:<bin>"

  /// Row for a grid point and estimator; throws std::out_of_range if absent.
  const SweepRow& at(double phi_sig, double phi_bkg, double upsilon,
                     Estimator e = Estimator::coates) const;
};

/// Grid points are enumerated phi_sig-major, then phi_bkg, then upsilon.
/// Each (grid point, trial) pair owns the stream derive_seed(seed, {g, t}),
/// and all estimators see the same histogram, so estimator comparisons are
/// paired.
SweepResult run_sweep(const TrialSpec& spec);

/// Header comment, column header, then one line per row.
void write_sweep_csv(std::ostream& out, const SweepResult& result);

/// RMSE as a function of the true bin for one flux setting.
struct ProfileSpec {
  double phi_sig = 1.0;
  double phi_bkg = 0.01;
  double upsilon = 1.0;
  int num_bins = 1000;
  std::int64_t cycles = 500;
  int trials = 200;  // per true bin
  Estimator estimator = Estimator::coates;
  std::vector<int> depths;  // all bins when empty
  std::uint64_t seed = 0;
  PulseShape pulse = PulseShape::delta();
  int threads = 0;
};

struct ProfilePoint {
  int true_bin = 0;
  double rmse_bins = 0.0;
};

std::vector<ProfilePoint> error_vs_depth_profile(const ProfileSpec& spec);

/// One scene point for adaptive acquisition.
struct ScenePoint {
  double phi_sig = 1.0;
  double phi_bkg = 0.01;
  int true_bin = 1;
};

struct AdaptiveOptions {
  int num_bins = 1000;
  std::int64_t background_cycles = 30;  // laser-off cycles N'
  std::int64_t cycles = 500;            // laser-on cycles N
  Estimator estimator = Estimator::coates;
  PulseShape pulse = PulseShape::delta();
};

struct AdaptiveResult {
  DepthEstimate depth;
  double phi_bkg_hat = 0.0;
  double upsilon = 1.0;
  bool fallback = false;  // background estimate unusable; upsilon forced to 1
  std::string warning;
  Histogram laser_off;
  Histogram laser_on;
};

/// Laser-off acquisition, background MLE, attenuation 1/(B Phi_bkg_hat)
/// clamped to 1, laser-on acquisition, then depth estimation.
AdaptiveResult adaptive_acquire(const ScenePoint& point, const AdaptiveOptions& options,
                                RandomStream& rng);
AdaptiveResult adaptive_acquire(const ScenePoint& point, const AdaptiveOptions& options,
                                std::uint64_t seed);

/// Runs adaptive_acquire for every point; point k uses derive_seed(seed, {k}).
std::vector<AdaptiveResult> adaptive_batch(std::span<const ScenePoint> points,
                                           const AdaptiveOptions& options, std::uint64_t seed,
                                           int threads = 0);

}  // namespace spadflux
