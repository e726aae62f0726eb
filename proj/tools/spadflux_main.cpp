// spadflux: command-line front end for the pile-up simulator, estimators,
// flux optimizer and Monte Carlo harness.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <fmt/format.h>

#include "spadflux/estimators.hpp"
#include "spadflux/flux_optimizer.hpp"
#include "spadflux/harness.hpp"
#include "spadflux/histogram_sim.hpp"
#include "spadflux/run_config.hpp"
#include "spadflux/scene.hpp"

namespace fs = std::filesystem;
using namespace spadflux;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
  std::string estimator;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_parallel, bool with_estimator) {
  cmd->add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", f.out, "Output directory (default: stdout)");
  if (with_parallel) {
    cmd->add_option("--threads", f.threads, "Worker threads (default: all cores)")
        ->check(CLI::PositiveNumber);
  }
  if (with_estimator) {
    cmd->add_option("--estimator", f.estimator, "Depth estimator: coates, argmax, map, bayes");
  }
}

fs::path config_dir(const CommonFlags& f) {
  return f.config.empty() ? fs::path{} : fs::path(f.config).parent_path();
}

std::string config_text(const CommonFlags& f, bool required) {
  if (f.config.empty()) {
    if (required) throw ConfigError("--config is required");
    return "{}";
  }
  return read_text_file(f.config);
}

// Writes to <out>/<name>, or to stdout when no output directory was given.
class Sink {
 public:
  Sink(const std::string& out_dir, const std::string& name) {
    if (out_dir.empty()) return;
    fs::create_directories(out_dir);
    path_ = fs::path(out_dir) / name;
    file_.open(path_, std::ios::binary);
    if (!file_) throw std::runtime_error(fmt::format("cannot write '{}'", path_.string()));
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw std::runtime_error(fmt::format("write failed for '{}'", path_.string()));
  }

 private:
  fs::path path_;
  std::ofstream file_;
};

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  f << body;
  if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
}

int run_simulate(const CommonFlags& f) {
  SimulateConfig cfg = parse_simulate_config(config_text(f, true));
  if (f.seed) cfg.seed = *f.seed;
  const auto dist = detection_probabilities(build_waveform(cfg.flux, cfg.pulse));
  for (int k = 0; k < cfg.trials; ++k) {
    RandomStream rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(k)});
    const Histogram h = sample_histogram(dist, cfg.cycles, rng);
    const std::string name =
        cfg.trials == 1 ? std::string("histogram.csv") : fmt::format("histogram_{:04d}.csv", k);
    Sink sink(f.out, name);
    const std::string header = fmt::format(
        "spadflux simulate seed={} trial={} bins={} cycles={} phi_sig={} phi_bkg={} "
        "attenuation={} true_bin={}",
        cfg.seed, k, cfg.flux.num_bins, cfg.cycles, cfg.flux.phi_sig, cfg.flux.phi_bkg,
        cfg.flux.attenuation, cfg.flux.true_bin);
    const std::string comments[] = {header};
    write_histogram_csv(sink.stream(), h, comments);
    sink.finish();
  }
  return 0;
}

struct EstimateFlags {
  std::string input;
  std::optional<double> phi_sig, phi_bkg, attenuation, bin_width;
};

int run_estimate(const CommonFlags& f, const EstimateFlags& e) {
  EstimateConfig cfg = parse_estimate_config(config_text(f, false), config_dir(f));
  if (!f.estimator.empty()) cfg.estimator = parse_estimator(f.estimator);
  if (!e.input.empty()) cfg.input = e.input;
  if (e.phi_sig) cfg.phi_sig = *e.phi_sig;
  if (e.phi_bkg) cfg.phi_bkg = *e.phi_bkg;
  if (e.attenuation) cfg.attenuation = *e.attenuation;
  if (e.bin_width) cfg.bin_width = *e.bin_width;
  if (cfg.input.empty()) throw ConfigError("estimate needs --input or an 'input' config key");

  std::istringstream in(read_text_file(cfg.input));
  const Histogram h = read_histogram_csv(in);
  const DepthEstimate d =
      estimate_depth(cfg.estimator, h, {cfg.phi_sig, cfg.phi_bkg, cfg.attenuation, &cfg.pulse});

  Sink sink(f.out, "estimate.txt");
  auto& os = sink.stream();
  os << fmt::format("estimator: {}\n", estimator_name(cfg.estimator));
  os << fmt::format("valid: {}\n", d.valid);
  os << fmt::format("bin: {}\n", d.bin);
  os << fmt::format("distance_m: {}\n", d.valid ? d.distance(cfg.bin_width) : 0.0);
  sink.finish();
  return 0;
}

struct OptimalFluxFlags {
  std::optional<double> phi_bkg;
  std::optional<int> bins;
  std::optional<double> d_max;
  std::optional<double> bin_width;
};

int run_optimal_flux(const CommonFlags& f, const OptimalFluxFlags& o) {
  if (!o.phi_bkg) throw ConfigError("optimal-flux needs --phi-bkg");
  OptimalAttenuation opt;
  double bins = 0.0;
  if (o.bins) {
    if (o.d_max) throw ConfigError("give either --bins or --d-max with --bin-width, not both");
    opt = optimal_attenuation(*o.phi_bkg, *o.bins);
    bins = *o.bins;
  } else if (o.d_max && o.bin_width) {
    opt = optimal_attenuation_for_range(*o.phi_bkg, *o.d_max, *o.bin_width);
    bins = 2.0 * *o.d_max / (kSpeedOfLight * *o.bin_width);
  } else {
    throw ConfigError("optimal-flux needs --bins, or --d-max together with --bin-width");
  }
  const double phi = *o.phi_bkg;
  const double extreme1 = attenuation_for_cycle_background(0.01, phi, bins);
  const double extreme5 = attenuation_for_cycle_background(0.05, phi, bins);

  Sink sink(f.out, "optimal_flux.txt");
  auto& os = sink.stream();
  os << fmt::format("phi_bkg: {}\n", phi);
  os << fmt::format("bins: {}\n", bins);
  os << fmt::format("upsilon_exact: {}\n", opt.upsilon_exact);
  os << fmt::format("upsilon_approx: {}\n", opt.upsilon_approx);
  os << fmt::format("upsilon_exact_unclamped: {}\n", opt.raw_exact);
  os << fmt::format("upsilon_approx_unclamped: {}\n", opt.raw_approx);
  os << fmt::format("clamped: {}\n", opt.clamped);
  os << fmt::format("per_cycle_background: {}\n", opt.upsilon_approx * bins * phi);
  os << fmt::format("per_bin_background_optimal: {}\n", opt.upsilon_approx * phi);
  os << fmt::format("upsilon_extreme_1pct: {}\n", extreme1);
  os << fmt::format("per_bin_background_extreme_1pct: {}\n", extreme1 * phi);
  os << fmt::format("upsilon_extreme_5pct: {}\n", extreme5);
  os << fmt::format("per_bin_background_extreme_5pct: {}\n", extreme5 * phi);
  sink.finish();
  return 0;
}

int run_sweep_cmd(const CommonFlags& f) {
  SweepConfig cfg = parse_sweep_config(config_text(f, true));
  if (f.seed) cfg.spec.seed = *f.seed;
  if (f.threads) cfg.spec.threads = *f.threads;
  if (!f.estimator.empty()) cfg.spec.estimators = {parse_estimator(f.estimator)};
  const SweepResult result = run_sweep(cfg.spec);
  Sink sink(f.out, "sweep.csv");
  write_sweep_csv(sink.stream(), result);
  sink.finish();
  return 0;
}

int run_scene_cmd(const CommonFlags& f) {
  SceneConfig cfg = parse_scene_config(config_text(f, true), config_dir(f));
  if (f.seed) cfg.job.seed = *f.seed;
  if (f.threads) cfg.job.threads = *f.threads;
  if (!f.estimator.empty()) cfg.job.estimator = parse_estimator(f.estimator);

  std::ostringstream summary;
  summary << fmt::format("# spadflux scene seed={} bins={} cycles={} estimator={} pixels={}x{}\n",
                         cfg.job.seed, cfg.job.num_bins, cfg.job.cycles,
                         estimator_name(cfg.job.estimator), cfg.job.depth.rows,
                         cfg.job.depth.cols);
  summary << "policy,mean_upsilon,inlier_pct,rmse_bins,invalid_pixels,pixels\n";
  for (AttenuationPolicy policy : cfg.policies) {
    SceneJob job = cfg.job;
    job.policy = policy;
    const SceneResult res = simulate_scene(job);
    const auto& s = res.summary;
    summary << fmt::format("{},{},{},{},{},{}\n", policy_name(policy), s.mean_upsilon,
                           s.inlier_pct, s.rmse_bins, s.invalid_pixels, s.pixels);
    if (f.out.empty()) continue;
    fs::create_directories(f.out);
    const std::string tag(policy_name(policy));
    const std::string comments[] = {fmt::format(
        "spadflux scene seed={} policy={} bins={} cycles={}", job.seed, tag, job.num_bins,
        job.cycles)};
    std::ostringstream depth, error, ups, cloud;
    write_grid(depth, res.estimated, comments);
    write_grid(error, res.error, comments);
    write_grid(ups, res.upsilon, comments);
    write_point_cloud(cloud, res.cloud, comments);
    const fs::path dir(f.out);
    write_file(dir / (tag + "_depth.txt"), depth.str());
    write_file(dir / (tag + "_error.txt"), error.str());
    write_file(dir / (tag + "_upsilon.txt"), ups.str());
    write_file(dir / (tag + "_points.xyz"), cloud.str());
  }
  Sink sink(f.out, "summary.csv");
  sink.stream() << summary.str();
  sink.finish();
  return 0;
}

int run_adapt_cmd(const CommonFlags& f) {
  AdaptConfig cfg = parse_adapt_config(config_text(f, true));
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (!f.estimator.empty()) cfg.options.estimator = parse_estimator(f.estimator);

  // Unset true bins are drawn from a stream separate from the acquisitions.
  RandomStream depth_rng = make_stream(cfg.seed, {~std::uint64_t{0}});
  boost::random::uniform_int_distribution<int> uniform(1, cfg.options.num_bins);
  std::vector<ScenePoint> points;
  std::vector<std::size_t> group_of;
  for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
    const auto& grp = cfg.groups[g];
    for (int k = 0; k < grp.count; ++k) {
      points.push_back({grp.phi_sig, grp.phi_bkg, grp.true_bin ? *grp.true_bin : uniform(depth_rng)});
      group_of.push_back(g);
    }
  }
  const auto results = adaptive_batch(points, cfg.options, cfg.seed, cfg.threads);

  const std::string header = fmt::format(
      "# spadflux adapt seed={} bins={} background_cycles={} cycles={} estimator={}\n", cfg.seed,
      cfg.options.num_bins, cfg.options.background_cycles, cfg.options.cycles,
      estimator_name(cfg.options.estimator));
  Sink sink(f.out, "adapt.csv");
  auto& os = sink.stream();
  os << header;
  os << "point,group,phi_sig,phi_bkg,true_bin,phi_bkg_hat,upsilon,estimated_bin,error_bins,"
        "fallback\n";
  std::vector<double> sum_sq(cfg.groups.size(), 0.0), sum_ups(cfg.groups.size(), 0.0);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& r = results[k];
    const double err = r.depth.valid
                           ? wrapped_error(r.depth.bin, points[k].true_bin, cfg.options.num_bins)
                           : cfg.options.num_bins / 2.0;
    sum_sq[group_of[k]] += err * err;
    sum_ups[group_of[k]] += r.upsilon;
    os << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", k, cfg.groups[group_of[k]].name,
                      points[k].phi_sig, points[k].phi_bkg, points[k].true_bin, r.phi_bkg_hat,
                      r.upsilon, r.depth.valid ? r.depth.bin : 0,
                      r.depth.valid ? fmt::format("{}", err) : std::string("nan"),
                      r.fallback ? 1 : 0);
  }
  sink.finish();

  Sink summary(f.out, "adapt_summary.csv");
  auto& ss = summary.stream();
  ss << header;
  ss << "group,count,phi_bkg,mean_upsilon,target_upsilon,rmse_bins\n";
  for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
    const auto& grp = cfg.groups[g];
    const double target = optimal_attenuation(grp.phi_bkg, cfg.options.num_bins).upsilon_approx;
    ss << fmt::format("{},{},{},{},{},{}\n", grp.name, grp.count, grp.phi_bkg,
                      sum_ups[g] / grp.count, grp.phi_bkg > 0.0 ? target : 1.0,
                      std::sqrt(sum_sq[g] / grp.count));
  }
  summary.finish();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spadflux: SPAD LiDAR pile-up simulation, depth estimation and flux optimization"};
  app.require_subcommand(1);

  CommonFlags sim_f, est_f, opt_f, sweep_f, scene_f, adapt_f;
  EstimateFlags est_e;
  OptimalFluxFlags opt_o;

  auto* simulate = app.add_subcommand("simulate", "Sample first-photon histograms");
  add_common(simulate, sim_f, false, false);

  auto* estimate = app.add_subcommand("estimate", "Estimate depth from a histogram CSV");
  add_common(estimate, est_f, false, true);
  estimate->add_option("--input", est_e.input, "Histogram CSV")->check(CLI::ExistingFile);
  estimate->add_option("--phi-sig", est_e.phi_sig, "Signal flux (map, bayes)");
  estimate->add_option("--phi-bkg", est_e.phi_bkg, "Background flux per bin (map, bayes)");
  estimate->add_option("--attenuation", est_e.attenuation, "Applied attenuation (map, bayes)");
  estimate->add_option("--bin-width", est_e.bin_width, "Bin width in seconds");

  auto* optimal = app.add_subcommand("optimal-flux", "Optimal attenuation for an ambient level");
  optimal->add_option("--out", opt_f.out, "Output directory (default: stdout)");
  optimal->add_option("--phi-bkg", opt_o.phi_bkg, "Background flux per bin")->required();
  optimal->add_option("--bins", opt_o.bins, "Number of histogram bins");
  optimal->add_option("--d-max", opt_o.d_max, "Unambiguous depth range in meters");
  optimal->add_option("--bin-width", opt_o.bin_width, "Bin width in seconds");

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo depth error sweep");
  add_common(sweep, sweep_f, true, true);
  auto* scene = app.add_subcommand("scene", "Simulate a depth map under attenuation policies");
  add_common(scene, scene_f, true, true);
  auto* adapt = app.add_subcommand("adapt", "Adaptive attenuation from laser-off background");
  add_common(adapt, adapt_f, true, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return run_simulate(sim_f);
    if (*estimate) return run_estimate(est_f, est_e);
    if (*optimal) return run_optimal_flux(opt_f, opt_o);
    if (*sweep) return run_sweep_cmd(sweep_f);
    if (*scene) return run_scene_cmd(scene_f);
    if (*adapt) return run_adapt_cmd(adapt_f);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
