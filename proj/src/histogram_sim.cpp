#include "spadflux/histogram_sim.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/binomial_distribution.hpp>
#include <fmt/format.h>

namespace spadflux {

DetectionDistribution::DetectionDistribution(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.size() < 2) {
    throw ParameterError("detection distribution needs at least one bin plus no-detection");
  }
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ParameterError(fmt::format("detection probability {} outside [0, 1]", p));
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-10) {
    throw ParameterError(fmt::format("detection probabilities sum to {}, not 1", sum));
  }
}

void Histogram::validate() const {
  if (counts.size() < 2) {
    throw ParameterError("histogram needs at least one bin plus the empty-cycle count");
  }
  if (num_cycles < 0) {
    throw ParameterError("histogram cycle count must be >= 0");
  }
  std::int64_t sum = 0;
  for (auto c : counts) {
    if (c < 0) throw ParameterError("histogram counts must be nonnegative");
    sum += c;
  }
  if (sum != num_cycles) {
    throw ParameterError(
        fmt::format("histogram counts sum to {} but num_cycles is {}", sum, num_cycles));
  }
}

DetectionDistribution detection_probabilities(const Waveform& w) {
  const auto rates = w.rates();
  std::vector<double> probs(rates.size() + 1);
  double preceding = 0.0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    probs[i] = -std::expm1(-rates[i]) * std::exp(-preceding);
    preceding += rates[i];
  }
  probs.back() = std::exp(-preceding);
  return DetectionDistribution(std::move(probs));
}

Histogram sample_histogram(const DetectionDistribution& d, std::int64_t cycles,
                           RandomStream& rng) {
  if (cycles < 0) throw ParameterError("cycle count must be >= 0");
  const auto probs = d.probs();
  const std::size_t n = probs.size();

  // Suffix sums give the conditional probability of each category given that
  // the earlier ones were not chosen, without cancellation.
  std::vector<double> tail(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) tail[i] = tail[i + 1] + probs[i];

  Histogram h;
  h.counts.assign(n, 0);
  h.num_cycles = cycles;
  std::int64_t remaining = cycles;
  for (std::size_t i = 0; i + 1 < n && remaining > 0; ++i) {
    if (probs[i] <= 0.0) continue;
    const double p = tail[i] > 0.0 ? std::min(1.0, probs[i] / tail[i]) : 1.0;
    std::int64_t k = remaining;
    if (p < 1.0) {
      boost::random::binomial_distribution<std::int64_t, double> binom(remaining, p);
      k = binom(rng);
    }
    h.counts[i] = k;
    remaining -= k;
  }
  h.counts[n - 1] += remaining;
  return h;
}

Histogram sample_histogram(const DetectionDistribution& d, std::int64_t cycles,
                           std::uint64_t seed) {
  RandomStream rng = make_stream(seed);
  return sample_histogram(d, cycles, rng);
}

Histogram sample_histogram_per_cycle(const Waveform& w, std::int64_t cycles,
                                     RandomStream& rng) {
  if (cycles < 0) throw ParameterError("cycle count must be >= 0");
  const auto rates = w.rates();
  std::vector<double> hit(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) hit[i] = -std::expm1(-rates[i]);

  Histogram h;
  h.counts.assign(rates.size() + 1, 0);
  h.num_cycles = cycles;
  for (std::int64_t c = 0; c < cycles; ++c) {
    std::size_t bin = rates.size();
    for (std::size_t i = 0; i < rates.size(); ++i) {
      boost::random::bernoulli_distribution<double> arrival(hit[i]);
      if (arrival(rng)) {
        bin = i;
        break;
      }
    }
    ++h.counts[bin];
  }
  return h;
}

void write_histogram_csv(std::ostream& out, const Histogram& h,
                         std::span<const std::string> comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "bin,count\n";
  const int nbins = h.num_bins();
  for (int i = 1; i <= nbins; ++i) out << i << ',' << h.count(i) << '\n';
  out << "none," << h.empty_cycles() << '\n';
}

Histogram read_histogram_csv(std::istream& in) {
  Histogram h;
  std::string line;
  bool header = false;
  bool saw_none = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "bin,count") {
        throw ParameterError(fmt::format("line {}: expected header 'bin,count'", line_no));
      }
      header = true;
      continue;
    }
    if (saw_none) {
      throw ParameterError(fmt::format("line {}: rows after the 'none' row", line_no));
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParameterError(fmt::format("line {}: expected 'bin,count'", line_no));
    }
    const std::string key = line.substr(0, comma);
    std::int64_t count = 0;
    try {
      std::size_t used = 0;
      count = std::stoll(line.substr(comma + 1), &used);
      if (used != line.size() - comma - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParameterError(fmt::format("line {}: invalid count", line_no));
    }
    if (key == "none") {
      saw_none = true;
    } else {
      const int expected = static_cast<int>(h.counts.size()) + 1;
      if (key != std::to_string(expected)) {
        throw ParameterError(fmt::format("line {}: expected bin {}", line_no, expected));
      }
    }
    h.counts.push_back(count);
    h.num_cycles += count;
  }
  if (!saw_none) throw ParameterError("histogram CSV is missing the 'none' row");
  h.validate();
  return h;
}

}  // namespace spadflux
