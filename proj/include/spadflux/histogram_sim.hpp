#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spadflux/photon_model.hpp"
#include "spadflux/random.hpp"

namespace spadflux {

/// First-photon detection probabilities p_1..p_B plus the no-detection
/// probability p_{B+1} (stored last).
class DetectionDistribution {
 public:
  /// Takes B+1 probabilities; they must lie in [0,1] and sum to 1 within 1e-10.
  explicit DetectionDistribution(std::vector<double> probs);

  std::span<const double> probs() const { return probs_; }
  int num_bins() const { return static_cast<int>(probs_.size()) - 1; }
  /// p_i for 1-based `bin`; bin B+1 is the no-detection outcome.
  double prob(int bin) const { return probs_[static_cast<std::size_t>(bin - 1)]; }
  double no_detection() const { return probs_.back(); }

 private:
  std::vector<double> probs_;
};

/// Counts N_1..N_B of first-photon detections, plus N_{B+1} empty cycles.
struct Histogram {
  std::vector<std::int64_t> counts;  // length B+1
  std::int64_t num_cycles = 0;

  int num_bins() const { return static_cast<int>(counts.size()) - 1; }
  std::int64_t count(int bin) const { return counts[static_cast<std::size_t>(bin - 1)]; }
  std::int64_t empty_cycles() const { return counts.back(); }

  /// Checks nonnegative counts summing to num_cycles.
  void validate() const;

  bool operator==(const Histogram&) const = default;
};

/// p_i = (1 - e^{-r_i}) e^{-sum_{k<i} r_k};  p_{B+1} = e^{-r}.
DetectionDistribution detection_probabilities(const Waveform& w);

/// Multinomial(N, probs) via sequential conditional binomials, O(B).
Histogram sample_histogram(const DetectionDistribution& d, std::int64_t cycles,
                           RandomStream& rng);

/// Same as above with a fresh stream seeded from `seed`.
Histogram sample_histogram(const DetectionDistribution& d, std::int64_t cycles,
                           std::uint64_t seed);

/// Reference sampler that simulates each laser cycle: walk the bins, draw
/// Poisson arrivals, stop at the first bin that receives a photon. O(N*B);
/// intended as a cross-check for sample_histogram.
Histogram sample_histogram_per_cycle(const Waveform& w, std::int64_t cycles,
                                     RandomStream& rng);

/// CSV with header `bin,count`; rows 1..B then `none`. Each entry of
/// `comments` is written first as a `# ...` line.
void write_histogram_csv(std::ostream& out, const Histogram& h,
                         std::span<const std::string> comments = {});

/// Parses the format written by write_histogram_csv. `#` lines are skipped.
Histogram read_histogram_csv(std::istream& in);

}  // namespace spadflux
