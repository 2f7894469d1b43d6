#pragma once

#include "inpipe/pipe_map.hpp"
#include "inpipe/random.hpp"

namespace inpipe {

/// Forward-facing ultrasonic rangefinder. Defaults follow an HC-SR04 class
/// sensor.
struct SonarModel {
  double sigma = 0.01;      // m
  double max_range = 4.0;   // m
  double min_range = 0.02;  // m
  double outlier_prob = 0.05;

  void validate() const;
};

struct SonarReading {
  double distance = 0.0;   // m, within [min_range, max_range]
  bool saturated = false;  // distance reached max_range
};

struct OdometryModel {
  double sigma_per_meter = 0.02;

  void validate() const;
};

/// Clamps a raw range into the sensor window and flags saturation.
SonarReading make_reading(double raw_distance, const SonarModel& model);

/// Noise-free range: the next junction opening or the route end, clamped to
/// the sensor window. Throws OutOfRoute.
double expected_range(const RouteMap& map, double s, const SonarModel& model);

/// Gaussian range noise with a uniform outlier component.
SonarReading simulate_sonar(const RouteMap& map, double true_s, const SonarModel& model, Rng& rng);

/// Encoder displacement with noise proportional to the distance travelled.
double simulate_odometry(double delta_s_true, const OdometryModel& model, Rng& rng);

/// p(z | expected): (1 - p_out) N(z; expected, sigma^2) + p_out / (max - min)
/// for readings inside the window. Readings clamped at either end of the
/// window are censored: the Gaussian density is replaced by its tail mass
/// beyond the window edge and the outlier term contributes nothing.
double measurement_likelihood(const SonarReading& z, double expected, const SonarModel& model);

double normal_cdf(double x);

}  // namespace inpipe
