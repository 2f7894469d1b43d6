#include "inpipe/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "inpipe/errors.hpp"

namespace inpipe {

void SonarModel::validate() const {
  if (!(sigma > 0.0)) throw InvariantError("sonar.sigma_m", "must be > 0");
  if (!(min_range > 0.0)) throw InvariantError("sonar.min_range_m", "must be > 0");
  if (!(max_range > min_range))
    throw InvariantError("sonar.max_range_m", "must exceed min_range_m");
  if (!(outlier_prob >= 0.0 && outlier_prob < 1.0))
    throw InvariantError("sonar.outlier_prob", "must lie in [0, 1)");
}

void OdometryModel::validate() const {
  if (!(sigma_per_meter >= 0.0)) throw InvariantError("odometry.sigma_per_meter", "must be >= 0");
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

SonarReading make_reading(double raw, const SonarModel& m) {
  SonarReading z;
  z.distance = std::clamp(raw, m.min_range, m.max_range);
  z.saturated = raw >= m.max_range;
  return z;
}

double expected_range(const RouteMap& map, double s, const SonarModel& m) {
  return std::clamp(map.distance_to_next_feature(s).distance, m.min_range, m.max_range);
}

SonarReading simulate_sonar(const RouteMap& map, double true_s, const SonarModel& m, Rng& rng) {
  const double expected = expected_range(map, true_s, m);
  const double pick = uniform01(rng);
  if (pick < m.outlier_prob)
    return make_reading(m.min_range + uniform01(rng) * (m.max_range - m.min_range), m);
  return make_reading(expected + m.sigma * standard_normal(rng), m);
}

double simulate_odometry(double delta_s_true, const OdometryModel& m, Rng& rng) {
  return delta_s_true + m.sigma_per_meter * std::abs(delta_s_true) * standard_normal(rng);
}

double measurement_likelihood(const SonarReading& z, double expected, const SonarModel& m) {
  const double inlier = 1.0 - m.outlier_prob;
  if (z.saturated) return inlier * normal_cdf((expected - m.max_range) / m.sigma);
  if (z.distance <= m.min_range) return inlier * normal_cdf((m.min_range - expected) / m.sigma);
  const double r = (z.distance - expected) / m.sigma;
  const double gauss = std::exp(-0.5 * r * r) / (m.sigma * std::sqrt(2.0 * std::numbers::pi));
  return inlier * gauss + m.outlier_prob / (m.max_range - m.min_range);
}

}  // namespace inpipe
