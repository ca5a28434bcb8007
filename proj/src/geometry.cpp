#include "nvsim/geometry.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>

namespace nvsim {

namespace {

constexpr std::uint64_t kMcDomain = 0x67656f6dULL;    // per-average streams
constexpr std::uint64_t kBootDomain = 0x626f6f74ULL;  // bootstrap streams
constexpr std::uint64_t kMapDomain = 0x736d6170ULL;   // sign-map cell streams

/// (3 (rhat.axis)^2 - 1) / r^3 in 1/um^3; multiplied by the dipole scale
/// K = mu0/4pi * moment * 1e18 to give the projected field in tesla.
inline double projection_kernel(const Eigen::Vector3d& r_um, const Eigen::Vector3d& axis) {
  const double r2 = r_um.squaredNorm();
  const double c = r_um.dot(axis);
  const double inv_r2 = 1.0 / r2;
  return (3.0 * c * c * inv_r2 - 1.0) * inv_r2 / std::sqrt(r2);
}

inline Eigen::Vector3d sample_cylinder(const SensorCylinder& sensor, RngStream& stream) {
  const double radius = 0.5 * sensor.diameter_um * std::sqrt(stream.uniform());
  const double theta = 2.0 * M_PI * stream.uniform();
  const double z = -sensor.depth_um * stream.uniform();
  return {sensor.center_um.x() + radius * std::cos(theta),
          sensor.center_um.y() + radius * std::sin(theta), z};
}

inline Eigen::Vector3d sample_channel(const ChannelGeometry& channel, RngStream& stream) {
  return {(stream.uniform() - 0.5) * channel.length_um,
          (stream.uniform() - 0.5) * channel.width_um,
          channel.floor_offset_um + stream.uniform() * channel.height_um};
}

/// Mean over spins of the squared NV-volume-averaged projection kernel for
/// one independent draw (dimensionless; scale by K^2 for T^2).
///
/// The square of the volume average is estimated with the unbiased pairwise
/// form mean^2 - S^2/n (the U-statistic over distinct NV pairs). Squaring the
/// finite-sample mean directly would add a Var/n bias term whose spin-average
/// diverges for spins approaching the sensor face; the pairwise estimator
/// cancels single near-collision draws exactly.
double mean_square_kernel(const ChannelGeometry& channel, const SensorCylinder& sensor,
                          const Eigen::Vector3d& axis, int n_nv, int n_spins, RngStream& stream) {
  std::vector<Eigen::Vector3d> nv(static_cast<std::size_t>(n_nv));
  for (auto& p : nv) p = sample_cylinder(sensor, stream);
  const double n = static_cast<double>(n_nv);
  double acc = 0.0;
  for (int s = 0; s < n_spins; ++s) {
    const Eigen::Vector3d spin = sample_channel(channel, stream);
    double sum = 0.0, sum2 = 0.0;
    for (const auto& p : nv) {
      const double v = projection_kernel(p - spin, axis);
      sum += v;
      sum2 += v * v;
    }
    acc += (sum * sum - sum2) / (n * (n - 1.0));
  }
  return acc / static_cast<double>(n_spins);
}

void parallel_for(int n, int n_workers, const std::function<void(int)>& body) {
  if (n_workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      body(i);
    }
  };
  std::vector<std::thread> pool;
  const int k = std::min(n_workers, n);
  pool.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

double dipole_scale_um(const PhysicsConstants& constants, const std::string& species) {
  // mu0/4pi * m has units T*m^3; 1e18 converts the 1/um^3 kernel
  return constants.mu0_over_4pi * constants.moment_of(species) * 1e18;
}

}  // namespace

void ChannelGeometry::validate() const {
  if (!(length_um > 0) || !(width_um > 0) || !(height_um > 0))
    throw std::invalid_argument("channel dimensions must be > 0");
  if (floor_offset_um < 0) throw std::invalid_argument("channel floor offset must be >= 0");
}

void SensorCylinder::validate() const {
  if (!(diameter_um > 0)) throw std::invalid_argument("sensor diameter must be > 0");
  if (!(depth_um > 0)) throw std::invalid_argument("sensor depth must be > 0");
}

void McParams::validate() const {
  if (n_nv_samples < 2) throw std::invalid_argument("need >= 2 NV samples per average");
  if (n_spin_samples < 1 || n_averages < 1)
    throw std::invalid_argument("Monte Carlo counts must be >= 1");
}

Eigen::Vector3d dipolar_field(const Eigen::Vector3d& moment_j_per_t,
                              const Eigen::Vector3d& displacement_m, double mu0_over_4pi) {
  const double r2 = displacement_m.squaredNorm();
  if (!(r2 > 0)) throw std::invalid_argument("dipolar_field: zero displacement");
  const double r = std::sqrt(r2);
  const Eigen::Vector3d rhat = displacement_m / r;
  return mu0_over_4pi * (3.0 * rhat * moment_j_per_t.dot(rhat) - moment_j_per_t) / (r2 * r);
}

double projected_mean_field(const Eigen::Vector3d& spin_position_um, const SensorCylinder& sensor,
                            const Eigen::Vector3d& bias_axis, double moment_j_per_t,
                            double mu0_over_4pi, int n_nv_samples, RngStream& stream) {
  sensor.validate();
  if (n_nv_samples < 1) throw std::invalid_argument("need >= 1 NV sample");
  if (std::abs(bias_axis.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("bias axis must be a unit vector");
  if (spin_position_um.z() <= 0.0)
    throw std::invalid_argument("sample spin must lie above the diamond surface (z > 0), "
                                "outside the sensor volume");
  double m = 0.0;
  for (int i = 0; i < n_nv_samples; ++i) {
    const Eigen::Vector3d nv = sample_cylinder(sensor, stream);
    m += projection_kernel(nv - spin_position_um, bias_axis);
  }
  m /= static_cast<double>(n_nv_samples);
  return m * mu0_over_4pi * moment_j_per_t * 1e18;
}

EnsembleSignal rms_ensemble_signal(const ChannelGeometry& channel, const SensorCylinder& sensor,
                                   const McParams& mc, const PhysicsConstants& constants,
                                   const Eigen::Vector3d& bias_axis, const std::string& species,
                                   int n_workers, std::uint64_t point_index) {
  channel.validate();
  sensor.validate();
  mc.validate();
  if (std::abs(bias_axis.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("bias axis must be a unit vector");
  const double k_scale = dipole_scale_um(constants, species);
  const double k2 = k_scale * k_scale;

  std::vector<double> ms(static_cast<std::size_t>(mc.n_averages));
  parallel_for(mc.n_averages, n_workers, [&](int a) {
    RngStream stream(mc.seed, {kMcDomain, point_index, static_cast<std::uint64_t>(a)});
    ms[static_cast<std::size_t>(a)] =
        k2 * mean_square_kernel(channel, sensor, bias_axis, mc.n_nv_samples, mc.n_spin_samples,
                                stream);
  });

  double mean = 0.0;
  for (double v : ms) mean += v;
  mean /= static_cast<double>(mc.n_averages);
  double var = 0.0;
  for (double v : ms) var += (v - mean) * (v - mean);
  const int n = mc.n_averages;
  const double se_mean = n > 1 ? std::sqrt(var / (static_cast<double>(n) * (n - 1.0))) : 0.0;

  EnsembleSignal out;
  out.rms_t = std::sqrt(std::max(mean, 0.0));
  out.stderr_t = out.rms_t > 0 ? 0.5 * se_mean / out.rms_t : 0.0;
  out.per_average_t2 = std::move(ms);
  return out;
}

std::size_t SensitivityCurve::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].value > points[best].value) best = i;
  return best;
}

SensitivityCurve sensitivity_curve(const std::vector<double>& d_nv_grid_um,
                                   const ChannelGeometry& channel, double sensor_diameter_um,
                                   const McParams& mc, const PhysicsConstants& constants,
                                   const Eigen::Vector3d& bias_axis, const std::string& species,
                                   int n_workers, int n_bootstrap) {
  if (d_nv_grid_um.empty()) throw std::invalid_argument("empty d_NV grid");
  for (std::size_t i = 0; i < d_nv_grid_um.size(); ++i) {
    if (!(d_nv_grid_um[i] > 0)) throw std::invalid_argument("d_NV values must be > 0");
    if (i > 0 && !(d_nv_grid_um[i] > d_nv_grid_um[i - 1]))
      throw std::invalid_argument("d_NV grid must ascend");
  }
  if (n_bootstrap < 2) throw std::invalid_argument("need >= 2 bootstrap replicates");

  SensitivityCurve curve;
  curve.points.resize(d_nv_grid_um.size());
  const int n_avg = mc.n_averages;

  for (std::size_t gi = 0; gi < d_nv_grid_um.size(); ++gi) {
    const double d = d_nv_grid_um[gi];
    SensorCylinder sensor;
    sensor.diameter_um = sensor_diameter_um;
    sensor.depth_um = d;
    const EnsembleSignal sig = rms_ensemble_signal(channel, sensor, mc, constants, bias_axis,
                                                   species, n_workers, gi);

    SensitivityPoint& pt = curve.points[gi];
    pt.d_nv_um = d;
    pt.rms_t = sig.rms_t;
    pt.value = sig.rms_t * std::sqrt(d);

    // bootstrap over the per-average mean squares
    RngStream boot(mc.seed, {kBootDomain, gi});
    double bmean = 0.0, bm2 = 0.0;
    for (int b = 0; b < n_bootstrap; ++b) {
      double acc = 0.0;
      for (int a = 0; a < n_avg; ++a) {
        const auto idx = static_cast<std::size_t>(boot.uniform() * n_avg);
        acc += sig.per_average_t2[std::min(idx, sig.per_average_t2.size() - 1)];
      }
      const double rep = std::sqrt(std::max(acc / n_avg, 0.0)) * std::sqrt(d);
      const double delta = rep - bmean;
      bmean += delta / (b + 1);
      bm2 += delta * (rep - bmean);
    }
    pt.stderr_ = std::sqrt(bm2 / (n_bootstrap - 1));
  }

  double vmax = 0.0;
  for (const auto& pt : curve.points) vmax = std::max(vmax, pt.value);
  if (vmax > 0) {
    for (auto& pt : curve.points) {
      pt.value /= vmax;
      pt.stderr_ /= vmax;
    }
  }
  return curve;
}

SignMap sign_map(const ChannelGeometry& channel, const SensorCylinder& sensor, int nx, int nz,
                 int n_nv_samples, std::uint64_t seed, const PhysicsConstants& constants,
                 const Eigen::Vector3d& bias_axis, const std::string& species) {
  channel.validate();
  sensor.validate();
  if (nx < 2 || nz < 2) throw std::invalid_argument("sign map needs at least a 2x2 grid");

  SignMap map;
  map.nx = nx;
  map.nz = nz;
  map.dx_um = channel.length_um / nx;
  map.dz_um = channel.height_um / nz;
  map.x0_um = -0.5 * channel.length_um + 0.5 * map.dx_um;
  map.z0_um = channel.floor_offset_um + 0.5 * map.dz_um;
  map.signs.resize(static_cast<std::size_t>(nx) * nz);
  map.means.resize(static_cast<std::size_t>(nx) * nz);

  const double moment = constants.moment_of(species);
  for (int j = 0; j < nz; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Eigen::Vector3d cell{map.x0_um + i * map.dx_um, 0.0, map.z0_um + j * map.dz_um};
      RngStream stream(seed, {kMapDomain, static_cast<std::uint64_t>(i),
                              static_cast<std::uint64_t>(j)});
      const double m = projected_mean_field(cell, sensor, bias_axis, moment,
                                            constants.mu0_over_4pi, n_nv_samples, stream);
      const std::size_t idx = static_cast<std::size_t>(j) * nx + i;
      map.means[idx] = m;
      map.signs[idx] = (m > 0) - (m < 0);
    }
  }
  return map;
}

}  // namespace nvsim
