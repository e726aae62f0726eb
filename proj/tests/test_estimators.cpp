#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "spadflux/estimators.hpp"

using namespace spadflux;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Histogram hist(std::vector<std::int64_t> counts) {
  std::int64_t n = 0;
  for (auto c : counts) n += c;
  return Histogram{std::move(counts), n};
}

WaveformEstimate with_r_hat(std::vector<std::optional<double>> r) {
  WaveformEstimate e;
  e.q_hat.resize(r.size());
  e.remaining.assign(r.size(), 1);
  e.r_hat = std::move(r);
  return e;
}

Posterior posterior_from(std::vector<double> probs) {
  Posterior p;
  p.probabilities = probs;
  for (double v : probs) p.log_weights.push_back(std::log(v));
  return p;
}

// Histogram holding round(N p_i); with very large N this is the noise-free
// expectation to double precision.
Histogram expected_histogram(const Waveform& w, double cycles) {
  const auto d = detection_probabilities(w);
  Histogram h;
  for (double p : d.probs()) {
    h.counts.push_back(static_cast<std::int64_t>(std::llround(cycles * p)));
    h.num_cycles += h.counts.back();
  }
  return h;
}

}  // namespace

TEST(CoatesCorrect, DirectFormula) {
  const auto e = coates_correct(hist({50, 25, 25}));
  EXPECT_EQ(e.remaining, (std::vector<std::int64_t>{100, 50}));
  EXPECT_DOUBLE_EQ(*e.q_hat[0], 0.5);
  EXPECT_DOUBLE_EQ(*e.q_hat[1], 0.5);
  EXPECT_NEAR(*e.r_hat[0], std::log(2.0), 1e-15);
  EXPECT_NEAR(*e.r_hat[1], std::log(2.0), 1e-15);
}

TEST(CoatesCorrect, SaturationAndUndefinedBins) {
  const auto e = coates_correct(hist({100, 0, 0}));
  EXPECT_DOUBLE_EQ(*e.q_hat[0], 1.0);
  EXPECT_EQ(*e.r_hat[0], kInf);
  EXPECT_FALSE(e.q_hat[1].has_value());
  EXPECT_FALSE(e.r_hat[1].has_value());
  EXPECT_EQ(e.remaining[1], 0);
}

TEST(CoatesCorrect, RemainingCyclesAreNonincreasing) {
  const auto d = detection_probabilities(Waveform(std::vector<double>(80, 0.05)));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto e = coates_correct(sample_histogram(d, 300, seed));
    EXPECT_EQ(e.remaining.front(), 300);
    for (std::size_t i = 1; i < e.remaining.size(); ++i) {
      EXPECT_LE(e.remaining[i], e.remaining[i - 1]);
      EXPECT_EQ(e.q_hat[i].has_value(), e.remaining[i] > 0);
    }
    for (const auto& q : e.q_hat) {
      if (q) EXPECT_TRUE(*q >= 0.0 && *q <= 1.0);
    }
  }
}

TEST(CoatesCorrect, NoiseFreeInversionRecoversRates) {
  // Dyadic case is exact in integers.
  const double l2 = std::log(2.0);
  const auto e = coates_correct(expected_histogram(Waveform({l2, l2, l2, l2}), 1024));
  for (const auto& r : e.r_hat) EXPECT_NEAR(*r, l2, 1e-12);

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0005, 0.05);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> rates(2 + rng() % 60);
    for (double& v : rates) v = u(rng);
    const auto est = coates_correct(expected_histogram(Waveform(rates), 1e15));
    for (std::size_t i = 0; i < rates.size(); ++i) EXPECT_NEAR(*est.r_hat[i], rates[i], 1e-9);
  }
}

TEST(CoatesDepth, ArgmaxTieBreakAndSentinel) {
  EXPECT_EQ(coates_depth(with_r_hat({std::log(2.0), std::log(4.0), std::nullopt})),
            DepthEstimate::at(2));
  EXPECT_EQ(coates_depth(with_r_hat({0.1, 0.3, kInf, 0.2})), DepthEstimate::at(3));
  EXPECT_EQ(coates_depth(with_r_hat({0.1, 0.5, 0.2, 0.3, 0.5})), DepthEstimate::at(2));
  EXPECT_EQ(coates_depth(with_r_hat({kInf, kInf})), DepthEstimate::at(1));
  EXPECT_FALSE(coates_depth(with_r_hat({std::nullopt, std::nullopt})).valid);
}

TEST(ArgmaxDepth, RawCounts) {
  EXPECT_EQ(argmax_depth(hist({1, 9, 2, 88})), DepthEstimate::at(2));
  EXPECT_EQ(argmax_depth(hist({4, 1, 4, 0})), DepthEstimate::at(1));
  // The empty-cycle bin never wins.
  EXPECT_FALSE(argmax_depth(hist({0, 0, 0, 10})).valid);
}

TEST(ArgmaxDepth, NoAmbientMatchesCoates) {
  FluxConfig cfg;
  cfg.phi_sig = 0.3;
  cfg.phi_bkg = 0.0;
  cfg.num_bins = 200;
  std::mt19937_64 pick(42);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    cfg.true_bin = 1 + static_cast<int>(pick() % 200);
    const Histogram h = sample_histogram(detection_probabilities(build_waveform(cfg)), 50, seed);
    if (h.count(cfg.true_bin) == 0) continue;
    EXPECT_EQ(argmax_depth(h), DepthEstimate::at(cfg.true_bin));
    EXPECT_EQ(coates_depth(coates_correct(h)), DepthEstimate::at(cfg.true_bin));
  }
}

TEST(DepthEstimate, DistanceFromBin) {
  const DepthEstimate d = DepthEstimate::at(667);
  EXPECT_NEAR(d.distance(100e-12), 299'792'458.0 * 667 * 100e-12 / 2, 1e-12);
}

TEST(MapPosterior, NoAmbientPutsAllMassOnTheDetectionBin) {
  const Posterior p = map_posterior(hist({0, 0, 7, 0, 0, 93}), 0.5, 0.0, 1.0);
  EXPECT_NEAR(p.probabilities[2], 1.0, 1e-12);
  EXPECT_EQ(map_depth(p), DepthEstimate::at(3));
  EXPECT_EQ(bayes_depth(p), DepthEstimate::at(3));
}

TEST(MapPosterior, UniformHistogramGivesUniformPosterior) {
  // Survivor counts D_i - N_i shrink along a uniform histogram, so rotational
  // symmetry needs either a flat waveform or no detections at all.
  for (const Posterior& p : {map_posterior(hist({5, 5, 5, 5, 5, 5, 5, 5, 60}), 0.0, 0.02, 1.0),
                             map_posterior(hist({0, 0, 0, 0, 0, 0, 0, 0, 60}), 1.0, 0.02, 1.0)}) {
    double sum = 0.0;
    for (double v : p.probabilities) {
      EXPECT_NEAR(v, 1.0 / 8, 1e-12);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-10);
  }
}

TEST(MapPosterior, MatchesBruteForceLikelihoodOnAllSmallHistograms) {
  struct Flux {
    double sig, bkg, ups;
  };
  for (const Flux& f : {Flux{1.0, 0.1, 1.0}, Flux{2.0, 0.3, 0.5}, Flux{0.2, 0.05, 1.0}}) {
    for (int cycles = 0; cycles <= 3; ++cycles) {
      for (const auto& counts : oracle::compositions(cycles, 5)) {
        const Posterior p = map_posterior(hist(counts), f.sig, f.bkg, f.ups);
        std::vector<double> ll(4);
        for (int d = 1; d <= 4; ++d) {
          ll[static_cast<std::size_t>(d - 1)] =
              oracle::depth_log_likelihood(counts, d, f.sig, f.bkg, f.ups);
        }
        for (int a = 0; a < 4; ++a) {
          for (int b = 0; b < 4; ++b) {
            const double want = ll[static_cast<std::size_t>(a)] - ll[static_cast<std::size_t>(b)];
            const double got = p.log_weights[static_cast<std::size_t>(a)] -
                               p.log_weights[static_cast<std::size_t>(b)];
            EXPECT_NEAR(got, want, 1e-9);
          }
        }
      }
    }
  }
}

TEST(MapPosterior, PulseProfileMatchesBruteForce) {
  // Oracle for a non-delta pulse: build each candidate waveform explicitly.
  const PulseShape pulse = PulseShape::profile({0.25, 0.5, 0.25}, 1);
  const Histogram h = hist({2, 0, 3, 4, 1, 0, 20});
  const Posterior p = map_posterior(h, 1.5, 0.1, 0.8, pulse);
  std::vector<double> ll;
  for (int d = 1; d <= 6; ++d) {
    FluxConfig cfg;
    cfg.phi_sig = 1.5;
    cfg.phi_bkg = 0.1;
    cfg.attenuation = 0.8;
    cfg.num_bins = 6;
    cfg.true_bin = d;
    const Waveform w = build_waveform(cfg, pulse);
    const auto probs = oracle::first_photon_probs({w.rates().begin(), w.rates().end()});
    double v = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) v += h.counts[i] * std::log(probs[i]);
    ll.push_back(v);
  }
  for (std::size_t d = 1; d < 6; ++d) {
    EXPECT_NEAR(p.log_weights[d] - p.log_weights[0], ll[d] - ll[0], 1e-9);
  }
}

TEST(MapPosterior, RejectsBadFlux) {
  EXPECT_THROW(map_posterior(hist({1, 1, 1}), -1.0, 0.1, 1.0), ParameterError);
  EXPECT_THROW(map_posterior(hist({1, 1, 1}), 1.0, 0.1, 0.0), ParameterError);
}

TEST(PosteriorSummaries, PointMassAndSymmetricPair) {
  std::vector<double> point(50, 1e-300);
  point[16] = 1.0;
  const Posterior pm = posterior_from(point);
  EXPECT_EQ(map_depth(pm), DepthEstimate::at(17));
  EXPECT_EQ(bayes_depth(pm), DepthEstimate::at(17));

  std::vector<double> pair(100, 0.0);
  pair[9] = 0.5;
  pair[19] = 0.5;
  Posterior bp;
  bp.probabilities = pair;
  bp.log_weights.assign(100, -1e300);
  bp.log_weights[9] = bp.log_weights[19] = std::log(0.5);
  EXPECT_EQ(map_depth(bp), DepthEstimate::at(10));
  EXPECT_EQ(bayes_depth(bp), DepthEstimate::at(15));
}

TEST(PosteriorSummaries, BayesMeanWrapsAroundTheCycle) {
  std::vector<double> pair(100, 0.0);
  pair[97] = 0.5;  // bin 98
  pair[3] = 0.5;   // bin 4
  Posterior p;
  p.probabilities = pair;
  p.log_weights.assign(100, -1e300);
  p.log_weights[97] = p.log_weights[3] = std::log(0.5);
  EXPECT_EQ(bayes_depth(p), DepthEstimate::at(1));
}

TEST(PosteriorSummaries, UniformPosteriorFallsBackToMode) {
  const Posterior p = posterior_from(std::vector<double>(12, 1.0 / 12));
  EXPECT_EQ(bayes_depth(p), DepthEstimate::at(1));
}

TEST(EstimateBackground, ClosedFormCases) {
  EXPECT_NEAR(estimate_background(hist({50, 50})), std::log(2.0), 1e-15);
  EXPECT_EQ(estimate_background(hist({0, 0, 0, 0, 40})), 0.0);
}

TEST(EstimateBackground, Failures) {
  EXPECT_THROW(estimate_background(Histogram{{0, 0, 0}, 0}), EstimationError);
  EXPECT_THROW(estimate_background(hist({10, 0, 0})), EstimationError);
}

TEST(EstimateBackground, SingleBinMatchesCoates) {
  for (std::int64_t n1 : {1, 17, 60, 99}) {
    const Histogram h = hist({n1, 100 - n1});
    EXPECT_NEAR(estimate_background(h), *coates_correct(h).r_hat[0], 1e-12);
  }
}

TEST(EstimateBackground, NoiseFreeHistogramRecoversFlux) {
  for (double phi : {0.0005, 0.02, 0.3}) {
    for (int bins : {2, 100, 1000}) {
      const Histogram h =
          expected_histogram(Waveform(std::vector<double>(static_cast<std::size_t>(bins), phi)),
                             1e15);
      EXPECT_NEAR(estimate_background(h), phi, 1e-9 * std::max(1.0, phi));
    }
  }
}

TEST(CoatesVariance, ClosedForm) {
  const auto v = coates_variance(Waveform({std::log(2.0)}), 100);
  EXPECT_NEAR(*v[0], 0.0025, 1e-15);
  // A zero-rate bin never detects, so its variance is undefined.
  const auto zero = coates_variance(Waveform({0.0, 0.1}), 10);
  EXPECT_FALSE(zero[0].has_value());
  EXPECT_TRUE(zero[1].has_value());
  EXPECT_THROW(coates_variance(Waveform({0.1}), 0), ParameterError);
}

TEST(CoatesVariance, UndefinedWhereDetectionIsImpossible) {
  // Zero survival past a saturated bin.
  const auto v = coates_variance(Waveform({800.0, 0.1}), 10);
  EXPECT_FALSE(v[1].has_value());
}

TEST(CoatesVariance, LaterBinsAreNoisierUnderConstantFlux) {
  const auto v = coates_variance(Waveform(std::vector<double>(100, 0.02)), 500);
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_GT(*v[i], *v[i - 1]);
}

TEST(CoatesVariance, ApproximationTracksExactInLowFlux) {
  const Waveform w(std::vector<double>(100, 1e-4));
  const auto exact = coates_variance(w, 1000);
  const auto approx = coates_variance_approx(w, 1000);
  for (std::size_t i = 0; i < exact.size(); ++i) {
    EXPECT_NEAR(*approx[i] / *exact[i], 1.0, 1e-3);
  }
  // r_i r / (N C_i) written out: C_i = p_i r / r_i, so it reduces to r_i^2 / (N p_i).
  const auto d = detection_probabilities(w);
  EXPECT_NEAR(*approx[7], 1e-8 / (1000 * d.prob(8)), 1e-20);
}

TEST(CoatesProperty, UnbiasedAndUncorrelatedOnASmallConfig) {
  const int bins = 20;
  const std::int64_t cycles = 100;
  const int trials = 20'000;
  const Waveform w(std::vector<double>(bins, 0.05));
  const auto d = detection_probabilities(w);
  const double q = -std::expm1(-0.05);
  std::vector<double> sum(bins, 0), sum_sq(bins, 0), used(bins, 0);
  double cross = 0.0, cross_n = 0.0, s3 = 0, s7 = 0;
  for (int t = 0; t < trials; ++t) {
    RandomStream rng = make_stream(43, {static_cast<std::uint64_t>(t)});
    const auto e = coates_correct(sample_histogram(d, cycles, rng));
    for (int i = 0; i < bins; ++i) {
      if (!e.q_hat[static_cast<std::size_t>(i)]) continue;
      const double v = *e.q_hat[static_cast<std::size_t>(i)];
      sum[i] += v;
      sum_sq[i] += v * v;
      used[i] += 1;
    }
    if (e.q_hat[3] && e.q_hat[7]) {
      cross += (*e.q_hat[3] - q) * (*e.q_hat[7] - q);
      s3 += *e.q_hat[3] - q;
      s7 += *e.q_hat[7] - q;
      cross_n += 1;
    }
  }
  for (int i = 0; i < bins; ++i) {
    const double mean = sum[i] / used[i];
    const double var = sum_sq[i] / used[i] - mean * mean;
    EXPECT_LE(std::abs(mean - q), 4 * std::sqrt(var / used[i])) << "bin " << i + 1;
  }
  const double cov = cross / cross_n - (s3 / cross_n) * (s7 / cross_n);
  const auto v = coates_variance(w, cycles);
  EXPECT_LE(std::abs(cov), 4 * std::sqrt(*v[3] * *v[7] / cross_n));
}
