#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spadflux/harness.hpp"
#include "spadflux/photon_model.hpp"
#include "spadflux/scene.hpp"

namespace spadflux {

/// Malformed or unknown configuration content.
class ConfigError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

struct SimulateConfig {
  FluxConfig flux;
  PulseShape pulse = PulseShape::delta();
  std::int64_t cycles = 1000;
  int trials = 1;
  std::uint64_t seed = 0;
};

struct EstimateConfig {
  Estimator estimator = Estimator::coates;
  double phi_sig = 0.0;
  double phi_bkg = 0.0;
  double attenuation = 1.0;
  double bin_width = 100e-12;
  PulseShape pulse = PulseShape::delta();
  std::string input;  // histogram CSV path, relative to the config file
};

struct SweepConfig {
  TrialSpec spec;
};

struct SceneConfig {
  SceneJob job;  // job.policy is overwritten per entry of `policies`
  std::vector<AttenuationPolicy> policies{AttenuationPolicy::optimal_global};
};

/// A batch of identical scene points; true_bin is drawn uniformly when unset.
struct AdaptGroup {
  std::string name;
  double phi_sig = 1.0;
  double phi_bkg = 0.01;
  std::optional<int> true_bin;
  int count = 1;
};

struct AdaptConfig {
  AdaptiveOptions options;
  std::vector<AdaptGroup> groups;
  std::uint64_t seed = 0;
  int threads = 0;
};

// Each parser validates the physical parameters before returning. File
// references inside the document are resolved against `base_dir`.
SimulateConfig parse_simulate_config(std::string_view json);
EstimateConfig parse_estimate_config(std::string_view json,
                                     const std::filesystem::path& base_dir = {});
SweepConfig parse_sweep_config(std::string_view json);
SceneConfig parse_scene_config(std::string_view json, const std::filesystem::path& base_dir = {});
AdaptConfig parse_adapt_config(std::string_view json);

/// Reads a whole file; throws ConfigError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

/// `count` log-spaced values from `lo` to `hi` inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

}  // namespace spadflux
