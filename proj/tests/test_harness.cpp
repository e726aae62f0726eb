#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <boost/random/uniform_int_distribution.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spadflux/flux_optimizer.hpp"
#include "spadflux/harness.hpp"
#include "spadflux/run_config.hpp"
#include "sweep_checks.hpp"

using namespace spadflux;

namespace {

std::string csv(const SweepResult& r) {
  std::ostringstream out;
  write_sweep_csv(out, r);
  return out.str();
}

// Least-squares slope of y against x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

double spread(const std::vector<ProfilePoint>& p) {
  const auto [lo, hi] = std::minmax_element(
      p.begin(), p.end(), [](auto& a, auto& b) { return a.rmse_bins < b.rmse_bins; });
  return hi->rmse_bins / lo->rmse_bins;
}

}  // namespace

TEST(WrappedError, Examples) {
  EXPECT_EQ(wrapped_error(7, 7, 10), 0.0);
  EXPECT_EQ(wrapped_error(10, 1, 10), -1.0);
  EXPECT_EQ(wrapped_error(6, 1, 10), -5.0);
  EXPECT_EQ(wrapped_error(1, 6, 10), -5.0);
  EXPECT_EQ(wrapped_error(5, 1, 10), 4.0);
  EXPECT_EQ(wrapped_error(1, 2, 5), -1.0);
  EXPECT_EQ(wrapped_error(4, 1, 5), -2.0);
}

TEST(WrappedErrorProperty, MatchesOracleAndRange) {
  for (int bins : {2, 3, 10, 11, 1000}) {
    for (int a = 1; a <= bins; a += std::max(1, bins / 40)) {
      for (int b = 1; b <= bins; b += std::max(1, bins / 37)) {
        const double e = wrapped_error(a, b, bins);
        EXPECT_EQ(e, oracle::wrapped(a, b, bins));
        EXPECT_GE(e, -bins / 2.0);
        EXPECT_LT(e, bins / 2.0);
      }
    }
  }
}

TEST(WrappedErrorProperty, ConstantPredictorUnderUniformDepth) {
  // Wrapped error of a fixed guess against a uniform truth is uniform over
  // [-B/2, B/2), so its RMS is B / sqrt(12).
  const int bins = 1000;
  RandomStream rng = make_stream(61);
  boost::random::uniform_int_distribution<int> uniform(1, bins);
  double sum_sq = 0;
  const int n = 10'000;
  for (int t = 0; t < n; ++t) {
    const double e = wrapped_error(1, uniform(rng), bins);
    sum_sq += e * e;
  }
  EXPECT_NEAR(std::sqrt(sum_sq / n) / (bins / std::sqrt(12.0)), 1.0, 0.05);
}

TEST(Estimators, NamesRoundTrip) {
  for (Estimator e : {Estimator::coates, Estimator::argmax, Estimator::map, Estimator::bayes}) {
    EXPECT_EQ(parse_estimator(estimator_name(e)), e);
  }
  EXPECT_THROW(parse_estimator("median"), ParameterError);
}

TEST(EstimateDepth, Dispatch) {
  const Histogram h{{1, 9, 2, 88}, 100};
  EXPECT_EQ(estimate_depth(Estimator::argmax, h, {}), argmax_depth(h));
  EXPECT_EQ(estimate_depth(Estimator::coates, h, {}), coates_depth(coates_correct(h)));
  const auto post = map_posterior(h, 1.0, 0.01, 1.0);
  EXPECT_EQ(estimate_depth(Estimator::map, h, {1.0, 0.01, 1.0, nullptr}), map_depth(post));
  EXPECT_EQ(estimate_depth(Estimator::bayes, h, {1.0, 0.01, 1.0, nullptr}), bayes_depth(post));
}

TEST(TrialSpec, Validation) {
  TrialSpec s;
  s.trials = 0;
  EXPECT_THROW(s.validate(), ParameterError);
  s = TrialSpec{};
  s.upsilon = {};
  EXPECT_THROW(s.validate(), ParameterError);
  s = TrialSpec{};
  s.upsilon = {1.5};
  EXPECT_THROW(s.validate(), ParameterError);
  s = TrialSpec{};
  s.fixed_depth = 1001;
  EXPECT_THROW(s.validate(), ParameterError);
  s = TrialSpec{};
  s.estimators = {};
  EXPECT_THROW(s.validate(), ParameterError);
  EXPECT_THROW(run_sweep(s), ParameterError);
}

TEST(RunSweep, NoAmbientLightIsErrorFree) {
  TrialSpec s;
  s.phi_sig = {5.0};
  s.phi_bkg = {0.0};
  s.upsilon = {0.05, 0.3, 1.0};
  s.trials = 100;
  s.estimators = {Estimator::coates, Estimator::argmax, Estimator::map, Estimator::bayes};
  s.seed = 62;
  for (const auto& row : run_sweep(s).rows) {
    EXPECT_EQ(row.rmse_bins, 0.0) << estimator_name(row.estimator) << " " << row.upsilon;
    EXPECT_EQ(row.rel_err_pct, 0.0);
    EXPECT_EQ(row.invalid_trials, 0);
  }
}

TEST(RunSweep, RowLayoutAndMetrics) {
  TrialSpec s;
  s.phi_sig = {1.0, 2.0};
  s.phi_bkg = {0.01};
  s.upsilon = {0.1, 1.0};
  s.num_bins = 200;
  s.trials = 50;
  s.estimators = {Estimator::coates, Estimator::argmax};
  const auto r = run_sweep(s);
  ASSERT_EQ(r.rows.size(), 8u);
  EXPECT_EQ(r.rows[0].phi_sig, 1.0);
  EXPECT_EQ(r.rows[0].upsilon, 0.1);
  EXPECT_EQ(r.rows[0].estimator, Estimator::coates);
  EXPECT_EQ(r.rows[1].estimator, Estimator::argmax);
  EXPECT_EQ(r.rows[2].upsilon, 1.0);
  EXPECT_EQ(r.rows[4].phi_sig, 2.0);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.trials, 50);
    EXPECT_NEAR(row.rel_err_pct, 100 * row.rmse_bins / 200, 1e-12);
    EXPECT_LE(row.rmse_bins, 200 / 2.0 * (1 + 1.0 / 200));
    EXPECT_LE(row.mean_abs_err, row.rmse_bins + 1e-12);
  }
  EXPECT_EQ(&r.at(2.0, 0.01, 1.0, Estimator::argmax), &r.rows[7]);
  EXPECT_THROW(r.at(3.0, 0.01, 1.0), std::out_of_range);
}

TEST(RunSweep, InvalidTrialsScoredAsHalfRange) {
  TrialSpec s;
  s.phi_bkg = {0.01};
  s.num_bins = 100;
  s.cycles = 0;  // nothing to estimate from
  s.trials = 20;
  auto r = run_sweep(s).rows.at(0);
  EXPECT_EQ(r.invalid_trials, 20);
  EXPECT_FALSE(r.all_invalid);
  EXPECT_DOUBLE_EQ(r.rmse_bins, 50.0);
  EXPECT_DOUBLE_EQ(r.rel_err_pct, 50.0);

  s.drop_invalid = true;
  r = run_sweep(s).rows.at(0);
  EXPECT_TRUE(r.all_invalid);
  EXPECT_TRUE(std::isnan(r.rmse_bins));
}

TEST(RunSweep, DeterministicAcrossThreadCounts) {
  TrialSpec s;
  s.phi_sig = {1.0, 3.0};
  s.phi_bkg = {0.005, 0.02};
  s.upsilon = log_grid(0.01, 1.0, 4);
  s.num_bins = 300;
  s.trials = 40;
  s.estimators = {Estimator::coates, Estimator::map, Estimator::bayes};
  s.seed = 63;
  s.threads = 1;
  const std::string one = csv(run_sweep(s));
  s.threads = 4;
  EXPECT_EQ(csv(run_sweep(s)), one);
  s.seed = 64;
  EXPECT_NE(csv(run_sweep(s)), one);
}

TEST(RunSweep, FixedDepthIsRecorded) {
  TrialSpec s;
  s.num_bins = 50;
  s.trials = 3;
  s.fixed_depth = 17;
  s.seed = 9;
  const std::string text = csv(run_sweep(s));
  EXPECT_EQ(text.substr(0, text.find('\n')), "# spadflux sweep seed=9 bins=50 cycles=500 depth=fixed:17");
  EXPECT_NE(text.find("\nphi_sig,phi_bkg,upsilon,estimator,trials,rmse_bins,rel_err_pct,"
                      "mean_abs_err,invalid_trials\n"),
            std::string::npos);
}

TEST(SweepProperty, RmseNonincreasingInSignalAtOptimalAndExtremeAttenuation) {
  // Without attenuation the Coates error surface has a ridge at high signal
  // flux, so the trend is checked where pile-up is controlled.
  for (double bkg : {0.005, 0.01, 0.05}) {
    TrialSpec s;
    s.phi_sig = {1.0, 2.0, 5.0};
    s.phi_bkg = {bkg};
    s.upsilon = {attenuation_for_cycle_background(0.05, bkg, 1000),
                 optimal_attenuation(bkg, 1000).upsilon_approx};
    s.seed = 65;
    const auto r = run_sweep(s);
    for (double u : s.upsilon) {
      for (std::size_t k = 1; k < s.phi_sig.size(); ++k) {
        const auto& lo = r.at(s.phi_sig[k - 1], bkg, u);
        const auto& hi = r.at(s.phi_sig[k], bkg, u);
        const double se = std::hypot(lo.rmse_std_error, hi.rmse_std_error);
        EXPECT_LE(hi.rmse_bins, lo.rmse_bins + 2 * se)
            << "bkg " << bkg << " u " << u << " sig " << s.phi_sig[k];
      }
    }
  }
}

TEST(SweepProperty, OptimalAttenuationIsQuasiInvariantToSignal) {
  for (double bkg : {0.005, 0.05}) {
    TrialSpec s;
    s.phi_sig = {1.0, 2.0, 5.0};
    s.phi_bkg = {bkg};
    s.upsilon = log_grid(1e-3, 1.0, 12);
    s.seed = 66;
    const auto r = run_sweep(s);
    std::vector<std::vector<std::size_t>> sets;
    for (double sig : s.phi_sig) sets.push_back(sweep_checks::argmin_set(sweep_checks::curve(r, sig, bkg)));
    for (std::size_t a = 0; a < sets.size(); ++a) {
      for (std::size_t b = a + 1; b < sets.size(); ++b) {
        EXPECT_LE(sweep_checks::set_distance(sets[a], sets[b]), 1u) << "bkg " << bkg;
      }
    }
  }
}

TEST(ErrorProfile, NoAmbientIsFlatZero) {
  ProfileSpec p;
  p.num_bins = 100;
  p.phi_sig = 3.0;
  p.phi_bkg = 0.0;
  p.trials = 30;
  p.depths = {1, 30, 60, 100};
  for (const auto& pt : error_vs_depth_profile(p)) EXPECT_EQ(pt.rmse_bins, 0.0);
}

TEST(ErrorProfile, DefaultsToEveryBin) {
  ProfileSpec p;
  p.num_bins = 20;
  p.phi_bkg = 0.01;
  p.trials = 2;
  const auto prof = error_vs_depth_profile(p);
  ASSERT_EQ(prof.size(), 20u);
  EXPECT_EQ(prof.front().true_bin, 1);
  EXPECT_EQ(prof.back().true_bin, 20);
  p.depths = {21};
  EXPECT_THROW(error_vs_depth_profile(p), ParameterError);
}

TEST(ErrorProfile, PileUpStarvesLaterBinsAndOptimalAttenuationFlattens) {
  ProfileSpec p;
  p.num_bins = 200;
  p.phi_bkg = 5.0 / 200;
  p.phi_sig = 0.5;
  p.cycles = 100;
  p.trials = 400;
  p.seed = 67;
  for (int d = 5; d <= 200; d += 15) p.depths.push_back(d);

  p.upsilon = 1.0;
  const auto none = error_vs_depth_profile(p);
  // Far bins are so starved that the estimate there is close to a uniform
  // guess, whose wrapped RMSE is only B/sqrt(12). The rise is measured over the
  // first quarter of the range, before that plateau.
  std::vector<double> x, y;
  for (const auto& pt : none) {
    if (pt.true_bin > 50) break;
    x.push_back(pt.true_bin);
    y.push_back(pt.rmse_bins);
  }
  EXPECT_GT(slope(x, y), 0.0);
  EXPECT_GT(y.back(), 1.3 * y.front());

  p.upsilon = optimal_attenuation(p.phi_bkg, p.num_bins).upsilon_approx;
  const auto opt = error_vs_depth_profile(p);
  EXPECT_LT(spread(opt), spread(none));
}

TEST(ErrorProfile, DeterministicAcrossThreadCounts) {
  ProfileSpec p;
  p.num_bins = 100;
  p.phi_bkg = 0.03;
  p.trials = 20;
  p.depths = {3, 50, 97};
  p.threads = 1;
  const auto a = error_vs_depth_profile(p);
  p.threads = 3;
  const auto b = error_vs_depth_profile(p);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].rmse_bins, b[k].rmse_bins);
}

TEST(Adaptive, PlugInWithLargeLaserOffSample) {
  AdaptiveOptions o;
  o.background_cycles = 200'000;
  for (double bkg : {0.002, 0.02}) {
    const auto r = adaptive_acquire({1.0, bkg, 500}, o, std::uint64_t{68});
    EXPECT_FALSE(r.fallback);
    EXPECT_NEAR(r.phi_bkg_hat / bkg, 1.0, 0.02);
    EXPECT_NEAR(r.upsilon * 1000 * bkg, 1.0, 0.02);
    EXPECT_EQ(r.laser_off.num_cycles, 200'000);
    EXPECT_EQ(r.laser_on.num_cycles, 500);
  }
}

TEST(Adaptive, EmptyLaserOffFallsBackToNoAttenuation) {
  AdaptiveOptions o;
  o.num_bins = 100;
  const auto r = adaptive_acquire({2.0, 1e-12, 40}, o, std::uint64_t{69});
  EXPECT_EQ(r.laser_off.empty_cycles(), 30);
  EXPECT_TRUE(r.fallback);
  EXPECT_FALSE(r.warning.empty());
  EXPECT_EQ(r.upsilon, 1.0);
  EXPECT_TRUE(r.depth.valid);
}

TEST(Adaptive, ClampsInDimScenes) {
  AdaptiveOptions o;
  o.background_cycles = 10'000;
  const auto r = adaptive_acquire({1.0, 1e-4, 10}, o, std::uint64_t{70});
  EXPECT_FALSE(r.fallback);
  EXPECT_EQ(r.upsilon, 1.0);
}

TEST(Adaptive, RejectsBadInput) {
  AdaptiveOptions o;
  o.background_cycles = 0;
  EXPECT_THROW(adaptive_acquire({1.0, 0.01, 1}, o, std::uint64_t{1}), ParameterError);
  o.background_cycles = 30;
  EXPECT_THROW(adaptive_acquire({1.0, 0.01, 0}, o, std::uint64_t{1}), ParameterError);
}

TEST(Adaptive, ThirtyLaserOffCyclesSuffice) {
  const int trials = 2000;
  AdaptiveOptions o;
  o.background_cycles = 30;
  o.cycles = 500;
  const double sig = 0.5, bkg = 0.02;
  RandomStream depth_rng = make_stream(71, {0});
  boost::random::uniform_int_distribution<int> uniform(1, 1000);
  std::vector<ScenePoint> points;
  for (int k = 0; k < trials; ++k) points.push_back({sig, bkg, uniform(depth_rng)});
  const auto res = adaptive_batch(points, o, 72, 0);

  int close = 0;
  double sum_sq = 0;
  for (int k = 0; k < trials; ++k) {
    const auto& r = res[static_cast<std::size_t>(k)];
    close += r.upsilon >= 0.025 && r.upsilon <= 0.1;
    const double e = r.depth.valid ? wrapped_error(r.depth.bin, points[static_cast<std::size_t>(k)].true_bin, 1000) : 500;
    sum_sq += e * e;
  }
  EXPECT_GE(close, 0.9 * trials);

  TrialSpec known;
  known.phi_sig = {sig};
  known.phi_bkg = {bkg};
  known.upsilon = {optimal_attenuation(bkg, 1000).upsilon_approx};
  known.trials = trials;
  known.seed = 73;
  const double known_rmse = run_sweep(known).rows.at(0).rmse_bins;
  ASSERT_GT(known_rmse, 0.0);
  EXPECT_LE(std::sqrt(sum_sq / trials), 1.5 * known_rmse);
}

TEST(Adaptive, BatchIsDeterministicAcrossThreadCounts) {
  AdaptiveOptions o;
  o.num_bins = 200;
  std::vector<ScenePoint> pts;
  for (int k = 0; k < 30; ++k) pts.push_back({1.0, 0.001 * (1 + k % 7), 1 + (k * 37) % 200});
  const auto a = adaptive_batch(pts, o, 74, 1);
  const auto b = adaptive_batch(pts, o, 74, 4);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    EXPECT_EQ(a[k].depth, b[k].depth);
    EXPECT_EQ(a[k].upsilon, b[k].upsilon);
    EXPECT_EQ(a[k].laser_on, b[k].laser_on);
  }
  // Batch entry k is the single acquisition on stream {k}.
  RandomStream rng = make_stream(74, {5});
  EXPECT_EQ(adaptive_acquire(pts[5], o, rng).laser_on, a[5].laser_on);
}
