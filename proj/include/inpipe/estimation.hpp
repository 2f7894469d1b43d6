#pragma once

#include <cstddef>
#include <vector>

#include "inpipe/control.hpp"
#include "inpipe/pipe_map.hpp"
#include "inpipe/random.hpp"
#include "inpipe/sensing.hpp"

namespace inpipe {

struct Particle {
  double s = 0.0;  // m, hypothesised arc length
  double w = 0.0;
};

struct ParticleSet {
  std::vector<Particle> particles;
  bool normalized = false;
};

struct KldConfig {
  double bin_m = 0.05;
  double epsilon = 0.05;
  double delta = 0.01;
};

struct PfConfig {
  std::size_t n_init = 2000;
  std::size_t n_min = 200;
  std::size_t n_max = 10000;
  double ess_threshold = 0.5;        // resample when ESS / n drops below
  double motion_sigma_floor = 0.001; // m
  KldConfig kld;
  /// The filter counts as lost once eta stays below lost_eta_ratio times the
  /// sonar outlier density for this many ticks in a row; 0 disables.
  std::size_t lost_after_ticks = 10;
  double lost_eta_ratio = 2.0;

  void validate() const;
};

/// Uniform over the whole route, equal weights.
ParticleSet pf_init(const RouteMap& map, const PfConfig& config, Rng& rng);

/// Shifts every particle by the odometry displacement u plus Gaussian noise
/// with std max(sigma_per_meter |u|, motion_sigma_floor), clamped to the route.
ParticleSet pf_predict(const ParticleSet& set, double u, const OdometryModel& odom,
                       const PfConfig& config, const RouteMap& map, Rng& rng);

struct UpdateResult {
  ParticleSet set;
  double eta = 0.0;  // sum of the unnormalised weights
};

/// Multiplies each weight by p(z | s_i) and normalises by eta.
/// Throws DegenerateWeights when eta is zero or not finite.
UpdateResult pf_update(const ParticleSet& set, const SonarReading& z, const RouteMap& map,
                       const SonarModel& sonar);

/// 1 / sum w^2. Throws NotNormalized.
double effective_sample_size(const ParticleSet& set);

/// KLD bound on the sample count for k occupied bins, clamped to
/// [n_min, n_max]. A population in one bin needs only n_min.
std::size_t kld_sample_count(std::size_t occupied_bins, const PfConfig& config);

/// Low-variance (systematic) resampling with a KLD-adaptive sample count.
/// Throws NotNormalized.
ParticleSet pf_resample(const ParticleSet& set, const PfConfig& config, Rng& rng);

/// Weighted mean and variance of s. Throws NotNormalized.
PositionEstimate pf_estimate(const ParticleSet& set);

/// Probability mass on a uniform grid of cells covering [0, route_length].
struct GridDensity {
  double cell = 0.01;
  std::vector<double> mass;

  double center(std::size_t i) const { return (static_cast<double>(i) + 0.5) * cell; }
  double mean() const;
};

/// Grid with cells of roughly `cell` width (adjusted to tile the route) and
/// uniform mass.
GridDensity uniform_grid(const RouteMap& map, double cell);

/// Exact discrete Bayes recursion on the grid: convolve with the motion
/// kernel (mass leaving the route piles up in the end cells), weight each
/// cell by the measurement likelihood at its centre, renormalise.
/// Throws DegeneratePosterior when no mass survives.
GridDensity grid_filter_oracle(const RouteMap& map, const GridDensity& prior, double u,
                               const SonarReading& z, const OdometryModel& odom,
                               const PfConfig& config, const SonarModel& sonar);

/// Weighted histogram of a particle set on the cells of `like`.
GridDensity histogram(const ParticleSet& set, const GridDensity& like);

double total_variation(const GridDensity& a, const GridDensity& b);

/// Algorithm state for one run: predict, weight, normalise, and resample
/// when the effective sample size degenerates.
class ParticleFilter {
 public:
  ParticleFilter(RouteMap map, PfConfig config, SonarModel sonar, OdometryModel odometry, Rng rng);

  struct StepInfo {
    double eta = 0.0;
    double ess = 0.0;
    bool resampled = false;
    bool reinitialized = false;
  };

  /// Predict, update, and resample if needed. Restarts from pf_init when all
  /// weights vanish or the filter has been lost (see PfConfig).
  StepInfo step(double odometry_delta, const SonarReading& z);

  PositionEstimate estimate() const { return pf_estimate(set_); }
  const ParticleSet& particles() const { return set_; }

 private:
  RouteMap map_;
  PfConfig config_;
  SonarModel sonar_;
  OdometryModel odometry_;
  Rng rng_;
  ParticleSet set_;
  std::size_t lost_streak_ = 0;
};

}  // namespace inpipe
