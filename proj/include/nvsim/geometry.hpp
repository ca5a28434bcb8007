#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nvsim/constants.hpp"
#include "nvsim/rng.hpp"

namespace nvsim {

constexpr double um_to_m(double um) { return um * 1e-6; }
constexpr double m_to_um(double m) { return m * 1e6; }

/// Axis-aligned microfluidic sample box. x spans the length, y the width,
/// z the height above the diamond surface (z = 0); floor_offset_um lifts the
/// channel floor off the surface (normally zero).
struct ChannelGeometry {
  double length_um = 1000.0;
  double width_um = 100.0;
  double height_um = 80.0;
  double floor_offset_um = 0.0;

  void validate() const;
};

/// Optically excited NV detection volume: a cylinder of the given diameter
/// descending depth_um below the diamond surface, centered at `center` in the
/// surface plane.
struct SensorCylinder {
  double diameter_um = 45.0;
  double depth_um = 50.0;
  Eigen::Vector2d center_um = Eigen::Vector2d::Zero();

  void validate() const;
};

struct McParams {
  int n_nv_samples = 40;
  int n_spin_samples = 32000;
  int n_averages = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Point-dipole field (T) of a moment (J/T) at `displacement_m` (meters) from
/// the dipole: B = mu0/4pi * (3 rhat (m.rhat) - m) / r^3.
Eigen::Vector3d dipolar_field(const Eigen::Vector3d& moment_j_per_t,
                              const Eigen::Vector3d& displacement_m,
                              double mu0_over_4pi = 1.0e-7);

/// Field of one sample spin (moment along bias_axis) projected onto
/// bias_axis, averaged over n_nv_samples uniform NV positions in the sensor
/// cylinder. Spin positions on or below the diamond surface are rejected.
double projected_mean_field(const Eigen::Vector3d& spin_position_um, const SensorCylinder& sensor,
                            const Eigen::Vector3d& bias_axis, double moment_j_per_t,
                            double mu0_over_4pi, int n_nv_samples, RngStream& stream);

struct EnsembleSignal {
  double rms_t = 0.0;
  double stderr_t = 0.0;
  /// Per-average mean-square projected field (T^2); basis for bootstrap.
  std::vector<double> per_average_t2;
};

/// RMS over sample-spin positions (uniform in the channel) of the
/// NV-volume-averaged projected field, averaged over mc.n_averages
/// independent draws. Spin and NV positions are re-drawn each average from
/// streams keyed by (seed, point index, average index), so the result is
/// bitwise independent of worker count.
EnsembleSignal rms_ensemble_signal(const ChannelGeometry& channel, const SensorCylinder& sensor,
                                   const McParams& mc, const PhysicsConstants& constants,
                                   const Eigen::Vector3d& bias_axis,
                                   const std::string& species = "1H", int n_workers = 1,
                                   std::uint64_t point_index = 0);

struct SensitivityPoint {
  double d_nv_um = 0.0;
  double value = 0.0;    // rms * sqrt(d_nv), normalized to curve max 1
  double stderr_ = 0.0;  // bootstrap standard error, same normalization
  double rms_t = 0.0;    // unnormalized per-spin RMS projected field
};

struct SensitivityCurve {
  std::vector<SensitivityPoint> points;

  std::size_t argmax() const;
};

/// Relative NMR sensitivity versus NV layer thickness: rms_ensemble_signal
/// at each d_NV weighted by sqrt(d_NV) (NV count grows with layer
/// thickness), normalized so the maximum is 1. Bootstrap errors resample the
/// per-average estimates.
SensitivityCurve sensitivity_curve(const std::vector<double>& d_nv_grid_um,
                                   const ChannelGeometry& channel, double sensor_diameter_um,
                                   const McParams& mc, const PhysicsConstants& constants,
                                   const Eigen::Vector3d& bias_axis,
                                   const std::string& species = "1H", int n_workers = 1,
                                   int n_bootstrap = 200);

struct SignMap {
  int nx = 0;
  int nz = 0;
  double x0_um = 0.0, dx_um = 0.0;  // cell centers at x0 + i*dx
  double z0_um = 0.0, dz_um = 0.0;
  std::vector<int> signs;     // row-major [j*nx + i], values -1/0/+1
  std::vector<double> means;  // projected mean field per cell (T)

  int sign_at(int i, int j) const { return signs[static_cast<std::size_t>(j * nx + i)]; }
  double mean_at(int i, int j) const { return means[static_cast<std::size_t>(j * nx + i)]; }
};

/// Sign of the projected mean field over the channel's length-height
/// cross-section (y = 0), for visualization of positive/negative signal
/// regions.
SignMap sign_map(const ChannelGeometry& channel, const SensorCylinder& sensor, int nx, int nz,
                 int n_nv_samples, std::uint64_t seed, const PhysicsConstants& constants,
                 const Eigen::Vector3d& bias_axis, const std::string& species = "1H");

}  // namespace nvsim
