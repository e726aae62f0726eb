#include "spadflux/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

namespace spadflux {
namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double q) { return std::clamp(q, kProbClamp, 1.0 - kProbClamp); }

// Index of the largest entry, smallest index on ties; -1 if none qualify.
template <typename Score>
int first_argmax(int n, Score score) {
  int best = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const std::optional<double> v = score(i);
    if (!v) continue;
    if (best < 0 || *v > best_value) {
      best = i;
      best_value = *v;
    }
  }
  return best;
}

}  // namespace

WaveformEstimate coates_correct(const Histogram& h) {
  h.validate();
  const int nbins = h.num_bins();
  WaveformEstimate e;
  e.q_hat.resize(static_cast<std::size_t>(nbins));
  e.r_hat.resize(static_cast<std::size_t>(nbins));
  e.remaining.resize(static_cast<std::size_t>(nbins));

  std::int64_t remaining = h.num_cycles;
  for (int i = 0; i < nbins; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const std::int64_t n_i = h.counts[idx];
    e.remaining[idx] = remaining;
    if (remaining > 0) {
      const double q = static_cast<double>(n_i) / static_cast<double>(remaining);
      e.q_hat[idx] = q;
      e.r_hat[idx] = n_i == remaining ? std::numeric_limits<double>::infinity()
                                      : -std::log1p(-q);
    }
    remaining -= n_i;
  }
  return e;
}

DepthEstimate coates_depth(const WaveformEstimate& e) {
  // r_hat is monotone in q_hat, and +inf marks q_hat = 1, so ranking by
  // r_hat handles the saturated sentinel directly.
  const int best = first_argmax(e.num_bins(), [&](int i) {
    return e.r_hat[static_cast<std::size_t>(i)];
  });
  return best < 0 ? DepthEstimate::invalid() : DepthEstimate::at(best + 1);
}

DepthEstimate argmax_depth(const Histogram& h) {
  const int nbins = h.num_bins();
  std::int64_t best_count = 0;
  int best = -1;
  for (int i = 0; i < nbins; ++i) {
    const auto c = h.counts[static_cast<std::size_t>(i)];
    if (c > best_count) {
      best_count = c;
      best = i;
    }
  }
  return best < 0 ? DepthEstimate::invalid() : DepthEstimate::at(best + 1);
}

Posterior map_posterior(const Histogram& h, double phi_sig, double phi_bkg, double upsilon,
                        const PulseShape& pulse) {
  h.validate();
  if (!(phi_sig >= 0.0) || !(phi_bkg >= 0.0) || !(upsilon > 0.0)) {
    throw ParameterError("map_posterior needs phi_sig >= 0, phi_bkg >= 0, upsilon > 0");
  }
  const int nbins = h.num_bins();
  const auto B = static_cast<std::size_t>(nbins);

  // Pulse weight per offset from the candidate depth, folded modulo B.
  std::vector<double> offset_weight(B, 0.0);
  {
    const auto w = pulse.weights();
    for (int k = 0; k < static_cast<int>(w.size()); ++k) {
      const int off = ((k - pulse.peak()) % nbins + nbins) % nbins;
      offset_weight[static_cast<std::size_t>(off)] += w[static_cast<std::size_t>(k)];
    }
  }

  auto log_terms = [&](double rate) {
    const double q = clamp_prob(-std::expm1(-rate));
    return std::pair{std::log(q), std::log1p(-q)};
  };
  const auto [log_q_bkg, log_miss_bkg] = log_terms(upsilon * phi_bkg);

  struct Tap {
    std::size_t offset;
    double dlog_q;
    double dlog_miss;
  };
  std::vector<Tap> taps;
  for (std::size_t off = 0; off < B; ++off) {
    if (offset_weight[off] == 0.0) continue;
    const auto [lq, lm] = log_terms(upsilon * (phi_bkg + phi_sig * offset_weight[off]));
    taps.push_back({off, lq - log_q_bkg, lm - log_miss_bkg});
  }

  // Detections N_i and survivors S_i = D_i - N_i; the likelihood of depth d is
  // prod_i q_{i|d}^{N_i} (1 - q_{i|d})^{S_i}.
  std::vector<double> detected(B), survived(B);
  double base = 0.0;
  std::int64_t remaining = h.num_cycles;
  for (std::size_t i = 0; i < B; ++i) {
    const auto n_i = h.counts[i];
    remaining -= n_i;
    detected[i] = static_cast<double>(n_i);
    survived[i] = static_cast<double>(remaining);
    base += detected[i] * log_q_bkg + survived[i] * log_miss_bkg;
  }

  Posterior post;
  post.log_weights.assign(B, base);
  for (std::size_t d = 0; d < B; ++d) {
    double acc = 0.0;
    for (const auto& tap : taps) {
      const std::size_t t = (d + tap.offset) % B;
      acc += detected[t] * tap.dlog_q + survived[t] * tap.dlog_miss;
    }
    post.log_weights[d] += acc;
  }

  const double peak = *std::max_element(post.log_weights.begin(), post.log_weights.end());
  post.probabilities.resize(B);
  double norm = 0.0;
  for (std::size_t d = 0; d < B; ++d) {
    post.probabilities[d] = std::exp(post.log_weights[d] - peak);
    norm += post.probabilities[d];
  }
  for (double& p : post.probabilities) p /= norm;
  return post;
}

DepthEstimate map_depth(const Posterior& p) {
  // Rank on log weights; normalized probabilities can underflow to ties.
  const int best = first_argmax(p.num_bins(), [&](int i) -> std::optional<double> {
    return p.log_weights[static_cast<std::size_t>(i)];
  });
  return best < 0 ? DepthEstimate::invalid() : DepthEstimate::at(best + 1);
}

DepthEstimate bayes_depth(const Posterior& p) {
  const int nbins = p.num_bins();
  if (nbins == 0) return DepthEstimate::invalid();
  double re = 0.0;
  double im = 0.0;
  for (int d = 0; d < nbins; ++d) {
    const double angle = 2.0 * std::numbers::pi * d / nbins;
    re += p.probabilities[static_cast<std::size_t>(d)] * std::cos(angle);
    im += p.probabilities[static_cast<std::size_t>(d)] * std::sin(angle);
  }
  if (std::hypot(re, im) < 1e-12) return map_depth(p);
  double angle = std::atan2(im, re);
  if (angle < 0.0) angle += 2.0 * std::numbers::pi;
  const auto index = static_cast<long long>(std::llround(angle * nbins / (2.0 * std::numbers::pi)));
  return DepthEstimate::at(static_cast<int>(index % nbins) + 1);
}

double estimate_background(const Histogram& h) {
  h.validate();
  if (h.num_cycles == 0) {
    throw EstimationError("background estimate needs at least one laser-off cycle");
  }
  const int nbins = h.num_bins();
  double weighted = 0.0;  // sum_{i<=B} i N_i
  for (int i = 1; i <= nbins; ++i) weighted += static_cast<double>(i) * h.count(i);
  const double empty = static_cast<double>(h.empty_cycles());
  const double numerator = weighted + nbins * empty;
  const double denominator =
      weighted + (nbins + 1.0) * empty - static_cast<double>(h.num_cycles);
  if (!(denominator > 0.0)) {
    throw EstimationError(
        "background estimate undefined: every cycle detected a photon in the first bin");
  }
  const double phi = std::log(numerator / denominator);
  if (!(phi >= 0.0) || !std::isfinite(phi)) {
    throw EstimationError(fmt::format("background estimate {} is not a valid flux", phi));
  }
  return phi;
}

std::vector<std::optional<double>> coates_variance(const Waveform& w, std::int64_t cycles) {
  if (cycles < 1) throw ParameterError("coates_variance needs at least one cycle");
  const auto d = detection_probabilities(w);
  const auto rates = w.rates();
  std::vector<std::optional<double>> out(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double p = d.probs()[i];
    if (p <= 0.0) continue;
    const double q = -std::expm1(-rates[i]);
    out[i] = q * q * (1.0 - q) / (static_cast<double>(cycles) * p);
  }
  return out;
}

std::vector<std::optional<double>> coates_variance_approx(const Waveform& w,
                                                          std::int64_t cycles) {
  if (cycles < 1) throw ParameterError("coates_variance_approx needs at least one cycle");
  const auto d = detection_probabilities(w);
  const auto rates = w.rates();
  const double r = total_flux(w);
  std::vector<std::optional<double>> out(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double p = d.probs()[i];
    if (p <= 0.0 || rates[i] <= 0.0) continue;
    const double receptivity = p / rates[i] * r;
    out[i] = rates[i] * r / (static_cast<double>(cycles) * receptivity);
  }
  return out;
}

}  // namespace spadflux
