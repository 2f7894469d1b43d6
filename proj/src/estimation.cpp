#include "inpipe/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <boost/math/distributions/normal.hpp>

#include "inpipe/errors.hpp"

namespace inpipe {

namespace {

// Neumaier compensated sum; keeps the weight total within a few ulps of 1.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void require_normalized(const ParticleSet& set) {
  if (!set.normalized) throw NotNormalized("particle weights are not normalised");
  if (set.particles.empty()) throw NotNormalized("particle set is empty");
}

}  // namespace

void PfConfig::validate() const {
  if (!(n_min >= 1 && n_min <= n_init && n_init <= n_max))
    throw InvariantError("pf", "need 1 <= n_min <= n_init <= n_max");
  if (!(ess_threshold > 0.0 && ess_threshold <= 1.0))
    throw InvariantError("pf.ess_threshold", "must lie in (0, 1]");
  if (!(lost_eta_ratio >= 0.0)) throw InvariantError("pf.lost_eta_ratio", "must be >= 0");
  if (!(motion_sigma_floor >= 0.0))
    throw InvariantError("pf.motion_sigma_floor_m", "must be >= 0");
  if (!(kld.bin_m > 0.0)) throw InvariantError("pf.kld.bin_m", "must be > 0");
  if (!(kld.epsilon > 0.0)) throw InvariantError("pf.kld.epsilon", "must be > 0");
  if (!(kld.delta > 0.0 && kld.delta < 1.0))
    throw InvariantError("pf.kld.delta", "must lie in (0, 1)");
}

ParticleSet pf_init(const RouteMap& map, const PfConfig& config, Rng& rng) {
  const double total = map.route_length();
  ParticleSet set;
  set.particles.resize(config.n_init);
  const double w = 1.0 / static_cast<double>(config.n_init);
  for (auto& p : set.particles) {
    p.s = total * uniform01(rng);
    p.w = w;
  }
  set.normalized = true;
  return set;
}

ParticleSet pf_predict(const ParticleSet& set, double u, const OdometryModel& odom,
                       const PfConfig& config, const RouteMap& map, Rng& rng) {
  const double total = map.route_length();
  const double sigma = std::max(odom.sigma_per_meter * std::abs(u), config.motion_sigma_floor);
  ParticleSet out = set;
  for (auto& p : out.particles) {
    const double noise = sigma > 0.0 ? sigma * standard_normal(rng) : 0.0;
    p.s = std::clamp(p.s + u + noise, 0.0, total);
  }
  return out;
}

UpdateResult pf_update(const ParticleSet& set, const SonarReading& z, const RouteMap& map,
                       const SonarModel& sonar) {
  UpdateResult out;
  out.set = set;
  CompensatedSum eta;
  for (auto& p : out.set.particles) {
    p.w *= measurement_likelihood(z, expected_range(map, p.s, sonar), sonar);
    eta.add(p.w);
  }
  out.eta = eta.value();
  if (!(out.eta > 0.0) || !std::isfinite(out.eta))
    throw DegenerateWeights("all particles have zero likelihood");
  for (auto& p : out.set.particles) p.w /= out.eta;
  out.set.normalized = true;
  return out;
}

double effective_sample_size(const ParticleSet& set) {
  require_normalized(set);
  CompensatedSum sq;
  for (const auto& p : set.particles) sq.add(p.w * p.w);
  return 1.0 / sq.value();
}

std::size_t kld_sample_count(std::size_t bins, const PfConfig& config) {
  if (bins <= 1) return config.n_min;
  const boost::math::normal standard;
  const double z = boost::math::quantile(standard, 1.0 - config.kld.delta);
  const double k = static_cast<double>(bins - 1);
  const double a = 2.0 / (9.0 * k);
  const double c = 1.0 - a + std::sqrt(a) * z;
  const double n = std::ceil(k / (2.0 * config.kld.epsilon) * c * c * c);
  if (n <= static_cast<double>(config.n_min)) return config.n_min;
  if (n >= static_cast<double>(config.n_max)) return config.n_max;
  return static_cast<std::size_t>(n);
}

namespace {

// Indices picked by a systematic sweep of `count` evenly spaced pointers.
std::vector<std::size_t> systematic_indices(const std::vector<double>& cumulative,
                                            std::size_t count, double offset) {
  std::vector<std::size_t> idx(count);
  const double total = cumulative.back();
  const std::size_t last = cumulative.size() - 1;
  std::size_t j = 0;
  for (std::size_t m = 0; m < count; ++m) {
    const double target = (offset + static_cast<double>(m)) / static_cast<double>(count) * total;
    while (j < last && cumulative[j] < target) ++j;
    idx[m] = j;
  }
  return idx;
}

}  // namespace

ParticleSet pf_resample(const ParticleSet& set, const PfConfig& config, Rng& rng) {
  require_normalized(set);
  const auto& ps = set.particles;
  std::vector<double> cumulative(ps.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    acc += ps[i].w;
    cumulative[i] = acc;
  }

  // Size the new population from the spread of a same-size draw.
  std::unordered_set<long long> bins;
  for (std::size_t i : systematic_indices(cumulative, ps.size(), uniform01(rng)))
    bins.insert(static_cast<long long>(std::floor(ps[i].s / config.kld.bin_m)));
  const std::size_t count = kld_sample_count(bins.size(), config);

  ParticleSet out;
  out.particles.resize(count);
  const double w = 1.0 / static_cast<double>(count);
  const auto picks = systematic_indices(cumulative, count, uniform01(rng));
  for (std::size_t m = 0; m < count; ++m) out.particles[m] = {ps[picks[m]].s, w};
  out.normalized = true;
  return out;
}

PositionEstimate pf_estimate(const ParticleSet& set) {
  require_normalized(set);
  CompensatedSum mean;
  for (const auto& p : set.particles) mean.add(p.w * p.s);
  PositionEstimate est;
  est.mean = mean.value();
  CompensatedSum var;
  for (const auto& p : set.particles) var.add(p.w * (p.s - est.mean) * (p.s - est.mean));
  est.variance = var.value();
  return est;
}

double GridDensity::mean() const {
  CompensatedSum m;
  for (std::size_t i = 0; i < mass.size(); ++i) m.add(mass[i] * center(i));
  return m.value();
}

GridDensity uniform_grid(const RouteMap& map, double cell) {
  const double total = map.route_length();
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(total / cell)));
  GridDensity g;
  g.cell = total / static_cast<double>(n);
  g.mass.assign(n, 1.0 / static_cast<double>(n));
  return g;
}

GridDensity grid_filter_oracle(const RouteMap& map, const GridDensity& prior, double u,
                               const SonarReading& z, const OdometryModel& odom,
                               const PfConfig& config, const SonarModel& sonar) {
  const auto n = static_cast<long long>(prior.mass.size());
  const double h = prior.cell;
  const double sigma = std::max(odom.sigma_per_meter * std::abs(u), config.motion_sigma_floor);

  // Shift-invariant kernel over cell offsets; tails past 10 sigma are below
  // double precision.
  std::vector<double> kernel;
  long long lo = 0;
  if (sigma == 0.0) {
    lo = std::llround(u / h);
    kernel = {1.0};
  } else {
    lo = static_cast<long long>(std::floor((u - 10.0 * sigma) / h)) - 1;
    const long long hi = static_cast<long long>(std::ceil((u + 10.0 * sigma) / h)) + 1;
    for (long long o = lo; o <= hi; ++o) {
      const double upper = (static_cast<double>(o) + 0.5) * h - u;
      const double lower = (static_cast<double>(o) - 0.5) * h - u;
      kernel.push_back(normal_cdf(upper / sigma) - normal_cdf(lower / sigma));
    }
  }

  GridDensity post;
  post.cell = h;
  post.mass.assign(prior.mass.size(), 0.0);
  for (long long j = 0; j < n; ++j) {
    const double pj = prior.mass[static_cast<std::size_t>(j)];
    if (pj == 0.0) continue;
    for (std::size_t k = 0; k < kernel.size(); ++k) {
      const long long target = std::clamp(j + lo + static_cast<long long>(k), 0LL, n - 1);
      post.mass[static_cast<std::size_t>(target)] += pj * kernel[k];
    }
  }

  CompensatedSum total;
  for (std::size_t i = 0; i < post.mass.size(); ++i) {
    post.mass[i] *= measurement_likelihood(z, expected_range(map, post.center(i), sonar), sonar);
    total.add(post.mass[i]);
  }
  const double t = total.value();
  if (!(t > 0.0) || !std::isfinite(t)) throw DegeneratePosterior("posterior has no mass");
  for (double& m : post.mass) m /= t;
  return post;
}

GridDensity histogram(const ParticleSet& set, const GridDensity& like) {
  GridDensity g;
  g.cell = like.cell;
  g.mass.assign(like.mass.size(), 0.0);
  const auto last = static_cast<long long>(g.mass.size()) - 1;
  for (const auto& p : set.particles) {
    const auto i = std::clamp(static_cast<long long>(std::floor(p.s / g.cell)), 0LL, last);
    g.mass[static_cast<std::size_t>(i)] += p.w;
  }
  return g;
}

double total_variation(const GridDensity& a, const GridDensity& b) {
  double tv = 0.0;
  const std::size_t n = std::min(a.mass.size(), b.mass.size());
  for (std::size_t i = 0; i < n; ++i) tv += std::abs(a.mass[i] - b.mass[i]);
  return 0.5 * tv;
}

ParticleFilter::ParticleFilter(RouteMap map, PfConfig config, SonarModel sonar,
                               OdometryModel odometry, Rng rng)
    : map_(std::move(map)),
      config_(config),
      sonar_(sonar),
      odometry_(odometry),
      rng_(std::move(rng)) {
  set_ = pf_init(map_, config_, rng_);
}

ParticleFilter::StepInfo ParticleFilter::step(double odometry_delta, const SonarReading& z) {
  StepInfo info;
  set_ = pf_predict(set_, odometry_delta, odometry_, config_, map_, rng_);
  bool restart = false;
  try {
    auto upd = pf_update(set_, z, map_, sonar_);
    set_ = std::move(upd.set);
    info.eta = upd.eta;
  } catch (const DegenerateWeights&) {
    restart = true;
  }

  // Every reading explained only as an outlier, tick after tick: the true
  // position is no longer covered by any particle.
  const double floor_eta =
      config_.lost_eta_ratio * sonar_.outlier_prob / (sonar_.max_range - sonar_.min_range);
  lost_streak_ = !restart && info.eta < floor_eta ? lost_streak_ + 1 : 0;
  if (config_.lost_after_ticks > 0 && lost_streak_ >= config_.lost_after_ticks) restart = true;

  if (restart) {
    // Start over from a uniform population (kidnapped robot).
    lost_streak_ = 0;
    set_ = pf_init(map_, config_, rng_);
    info.reinitialized = true;
    try {
      auto upd = pf_update(set_, z, map_, sonar_);
      set_ = std::move(upd.set);
      info.eta = upd.eta;
    } catch (const DegenerateWeights&) {
    }
  }
  info.ess = effective_sample_size(set_);
  if (info.ess / static_cast<double>(set_.particles.size()) < config_.ess_threshold) {
    set_ = pf_resample(set_, config_, rng_);
    info.resampled = true;
  }
  return info;
}

}  // namespace inpipe
