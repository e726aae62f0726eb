#include "spadflux/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <boost/random/uniform_int_distribution.hpp>
#include <fmt/format.h>

#include "spadflux/parallel.hpp"

namespace spadflux {

std::string_view estimator_name(Estimator e) {
  switch (e) {
    case Estimator::coates: return "coates";
    case Estimator::argmax: return "argmax";
    case Estimator::map: return "map";
    case Estimator::bayes: return "bayes";
  }
  return "unknown";
}

Estimator parse_estimator(std::string_view name) {
  if (name == "coates") return Estimator::coates;
  if (name == "argmax") return Estimator::argmax;
  if (name == "map") return Estimator::map;
  if (name == "bayes") return Estimator::bayes;
  throw ParameterError(
      fmt::format("unknown estimator '{}' (expected coates, argmax, map or bayes)", name));
}

DepthEstimate estimate_depth(Estimator e, const Histogram& h, const KnownFlux& flux) {
  switch (e) {
    case Estimator::coates: return coates_depth(coates_correct(h));
    case Estimator::argmax: return argmax_depth(h);
    case Estimator::map:
    case Estimator::bayes: {
      const PulseShape delta = PulseShape::delta();
      const auto post = map_posterior(h, flux.phi_sig, flux.phi_bkg, flux.upsilon,
                                      flux.pulse ? *flux.pulse : delta);
      return e == Estimator::map ? map_depth(post) : bayes_depth(post);
    }
  }
  throw std::logic_error("unhandled estimator");
}

double wrapped_error(int tau_hat, int tau, int num_bins) {
  const double B = num_bins;
  double e = static_cast<double>(tau_hat - tau) + B / 2.0;
  e -= B * std::floor(e / B);
  return e - B / 2.0;
}

void TrialSpec::validate() const {
  if (phi_sig.empty() || phi_bkg.empty() || upsilon.empty()) {
    throw ParameterError("sweep grids must be nonempty");
  }
  if (estimators.empty()) throw ParameterError("sweep needs at least one estimator");
  if (trials < 1) throw ParameterError(fmt::format("trials must be >= 1 (got {})", trials));
  if (cycles < 0) throw ParameterError("cycles must be >= 0");
  FluxConfig probe;
  probe.num_bins = num_bins;
  for (double s : phi_sig) {
    for (double b : phi_bkg) {
      for (double u : upsilon) {
        probe.phi_sig = s;
        probe.phi_bkg = b;
        probe.attenuation = u;
        probe.true_bin = fixed_depth.value_or(1);
        probe.validate();
      }
    }
  }
}

const SweepRow& SweepResult::at(double phi_sig, double phi_bkg, double upsilon,
                                Estimator e) const {
  for (const auto& row : rows) {
    if (row.phi_sig == phi_sig && row.phi_bkg == phi_bkg && row.upsilon == upsilon &&
        row.estimator == e) {
      return row;
    }
  }
  throw std::out_of_range(fmt::format("no sweep row for ({}, {}, {}, {})", phi_sig, phi_bkg,
                                      upsilon, estimator_name(e)));
}

namespace {

struct ErrorAccumulator {
  int count = 0;
  int invalid = 0;
  double sum_sq = 0.0;
  double sum_quartic = 0.0;
  double sum_abs = 0.0;

  void add(double err) {
    ++count;
    sum_sq += err * err;
    sum_quartic += err * err * err * err;
    sum_abs += std::abs(err);
  }
};

struct TrialOutcome {
  std::vector<double> errors;  // per estimator
  std::vector<bool> valid;
};

TrialOutcome run_trial(const FluxConfig& cfg, const PulseShape& pulse, std::int64_t cycles,
                       std::span<const Estimator> estimators, RandomStream& rng) {
  const auto dist = detection_probabilities(build_waveform(cfg, pulse));
  const Histogram h = sample_histogram(dist, cycles, rng);
  const KnownFlux flux{cfg.phi_sig, cfg.phi_bkg, cfg.attenuation, &pulse};

  TrialOutcome out;
  out.errors.reserve(estimators.size());
  std::optional<Posterior> posterior;
  for (Estimator e : estimators) {
    DepthEstimate d;
    if (e == Estimator::map || e == Estimator::bayes) {
      if (!posterior) {
        posterior = map_posterior(h, cfg.phi_sig, cfg.phi_bkg, cfg.attenuation, pulse);
      }
      d = e == Estimator::map ? map_depth(*posterior) : bayes_depth(*posterior);
    } else {
      d = estimate_depth(e, h, flux);
    }
    out.valid.push_back(d.valid);
    out.errors.push_back(d.valid ? wrapped_error(d.bin, cfg.true_bin, cfg.num_bins) : 0.0);
  }
  return out;
}

int draw_depth(const std::optional<int>& fixed, int num_bins, RandomStream& rng) {
  if (fixed) return *fixed;
  boost::random::uniform_int_distribution<int> uniform(1, num_bins);
  return uniform(rng);
}

SweepRow summarize(const ErrorAccumulator& acc, int num_bins, bool drop_invalid) {
  SweepRow row;
  row.trials = acc.count + acc.invalid;
  row.invalid_trials = acc.invalid;
  ErrorAccumulator scored = acc;
  if (!drop_invalid) {
    const double worst = num_bins / 2.0;
    for (int k = 0; k < acc.invalid; ++k) scored.add(worst);
  }
  if (scored.count == 0) {
    row.all_invalid = true;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.rmse_bins = row.rel_err_pct = row.mean_abs_err = row.rmse_std_error = nan;
    return row;
  }
  const double n = scored.count;
  const double mse = scored.sum_sq / n;
  row.rmse_bins = std::sqrt(mse);
  row.rel_err_pct = 100.0 * row.rmse_bins / num_bins;
  row.mean_abs_err = scored.sum_abs / n;
  const double var_sq = std::max(0.0, scored.sum_quartic / n - mse * mse);
  const double mse_se = std::sqrt(var_sq / n);
  row.rmse_std_error = row.rmse_bins > 0.0 ? mse_se / (2.0 * row.rmse_bins) : 0.0;
  return row;
}

}  // namespace

SweepResult run_sweep(const TrialSpec& spec) {
  spec.validate();
  struct GridPoint {
    double phi_sig, phi_bkg, upsilon;
  };
  std::vector<GridPoint> grid;
  for (double s : spec.phi_sig) {
    for (double b : spec.phi_bkg) {
      for (double u : spec.upsilon) grid.push_back({s, b, u});
    }
  }

  const auto trials = static_cast<std::size_t>(spec.trials);
  std::vector<TrialOutcome> outcomes(grid.size() * trials);
  parallel_for(outcomes.size(), spec.threads, [&](std::size_t job) {
    const std::size_t g = job / trials;
    const std::size_t t = job % trials;
    RandomStream rng = make_stream(spec.seed, {g, t});
    FluxConfig cfg;
    cfg.phi_sig = grid[g].phi_sig;
    cfg.phi_bkg = grid[g].phi_bkg;
    cfg.attenuation = grid[g].upsilon;
    cfg.num_bins = spec.num_bins;
    cfg.true_bin = draw_depth(spec.fixed_depth, spec.num_bins, rng);
    outcomes[job] = run_trial(cfg, spec.pulse, spec.cycles, spec.estimators, rng);
  });

  SweepResult result;
  result.num_bins = spec.num_bins;
  result.cycles = spec.cycles;
  result.seed = spec.seed;
  result.depth_prior =
      spec.fixed_depth ? fmt::format("fixed:{}", *spec.fixed_depth) : std::string("uniform");
  for (std::size_t g = 0; g < grid.size(); ++g) {
    for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
      ErrorAccumulator acc;
      for (std::size_t t = 0; t < trials; ++t) {
        const auto& o = outcomes[g * trials + t];
        if (o.valid[e]) {
          acc.add(o.errors[e]);
        } else {
          ++acc.invalid;
        }
      }
      SweepRow row = summarize(acc, spec.num_bins, spec.drop_invalid);
      row.phi_sig = grid[g].phi_sig;
      row.phi_bkg = grid[g].phi_bkg;
      row.upsilon = grid[g].upsilon;
      row.estimator = spec.estimators[e];
      result.rows.push_back(row);
    }
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << fmt::format("# spadflux sweep seed={} bins={} cycles={} depth={}\n", result.seed,
                     result.num_bins, result.cycles, result.depth_prior);
  out << "phi_sig,phi_bkg,upsilon,estimator,trials,rmse_bins,rel_err_pct,mean_abs_err,"
         "invalid_trials\n";
  for (const auto& r : result.rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.phi_sig, r.phi_bkg, r.upsilon,
                       estimator_name(r.estimator), r.trials, r.rmse_bins, r.rel_err_pct,
                       r.mean_abs_err, r.invalid_trials);
  }
}

std::vector<ProfilePoint> error_vs_depth_profile(const ProfileSpec& spec) {
  if (spec.trials < 1) throw ParameterError("profile needs at least one trial per depth");
  std::vector<int> depths = spec.depths;
  if (depths.empty()) {
    depths.resize(static_cast<std::size_t>(spec.num_bins));
    for (int i = 0; i < spec.num_bins; ++i) depths[static_cast<std::size_t>(i)] = i + 1;
  }
  FluxConfig base;
  base.phi_sig = spec.phi_sig;
  base.phi_bkg = spec.phi_bkg;
  base.attenuation = spec.upsilon;
  base.num_bins = spec.num_bins;
  for (int d : depths) {
    base.true_bin = d;
    base.validate();
  }

  const auto trials = static_cast<std::size_t>(spec.trials);
  std::vector<double> errors(depths.size() * trials);
  std::vector<char> valid(errors.size());
  const Estimator estimators[] = {spec.estimator};
  parallel_for(errors.size(), spec.threads, [&](std::size_t job) {
    const std::size_t k = job / trials;
    RandomStream rng = make_stream(spec.seed, {k, job % trials});
    FluxConfig cfg = base;
    cfg.true_bin = depths[k];
    const auto o = run_trial(cfg, spec.pulse, spec.cycles, estimators, rng);
    errors[job] = o.errors[0];
    valid[job] = o.valid[0];
  });

  std::vector<ProfilePoint> out;
  out.reserve(depths.size());
  for (std::size_t k = 0; k < depths.size(); ++k) {
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t job = k * trials + t;
      const double e = valid[job] ? errors[job] : spec.num_bins / 2.0;
      sum_sq += e * e;
    }
    out.push_back({depths[k], std::sqrt(sum_sq / static_cast<double>(trials))});
  }
  return out;
}

AdaptiveResult adaptive_acquire(const ScenePoint& point, const AdaptiveOptions& options,
                                RandomStream& rng) {
  if (options.background_cycles < 1) {
    throw ParameterError("adaptive acquisition needs at least one laser-off cycle");
  }
  FluxConfig cfg;
  cfg.phi_sig = point.phi_sig;
  cfg.phi_bkg = point.phi_bkg;
  cfg.num_bins = options.num_bins;
  cfg.true_bin = point.true_bin;
  cfg.validate();

  AdaptiveResult out;
  // Laser off: only the ambient level reaches the detector.
  const std::vector<double> ambient(static_cast<std::size_t>(options.num_bins), point.phi_bkg);
  out.laser_off = sample_histogram(detection_probabilities(Waveform(ambient)),
                                   options.background_cycles, rng);
  try {
    out.phi_bkg_hat = estimate_background(out.laser_off);
  } catch (const EstimationError& e) {
    out.fallback = true;
    out.warning = e.what();
  }
  if (!out.fallback && !(out.phi_bkg_hat > 0.0)) {
    out.fallback = true;
    out.warning = "no photons in the laser-off acquisition; background estimated as zero";
  }
  out.upsilon = out.fallback ? 1.0 : std::min(1.0, 1.0 / (options.num_bins * out.phi_bkg_hat));

  cfg.attenuation = out.upsilon;
  const auto dist = detection_probabilities(build_waveform(cfg, options.pulse));
  out.laser_on = sample_histogram(dist, options.cycles, rng);
  const KnownFlux flux{point.phi_sig, out.phi_bkg_hat, out.upsilon, &options.pulse};
  out.depth = estimate_depth(options.estimator, out.laser_on, flux);
  return out;
}

AdaptiveResult adaptive_acquire(const ScenePoint& point, const AdaptiveOptions& options,
                                std::uint64_t seed) {
  RandomStream rng = make_stream(seed);
  return adaptive_acquire(point, options, rng);
}

std::vector<AdaptiveResult> adaptive_batch(std::span<const ScenePoint> points,
                                           const AdaptiveOptions& options, std::uint64_t seed,
                                           int threads) {
  std::vector<AdaptiveResult> out(points.size());
  parallel_for(points.size(), threads, [&](std::size_t k) {
    RandomStream rng = make_stream(seed, {k});
    out[k] = adaptive_acquire(points[k], options, rng);
  });
  return out;
}

}  // namespace spadflux
