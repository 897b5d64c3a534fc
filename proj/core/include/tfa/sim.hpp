#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tfa/dataset.hpp"
#include "tfa/types.hpp"

namespace tfa {

/// Replaceable contact tip pressed into the gel.
struct Indenter {
  enum class Shape { kSphere, kFlat, kRidge };

  std::string id;
  Shape shape = Shape::kSphere;
  double size_m = 3e-3;       // sphere/ridge curvature radius, flat half-width
  double stiffness = 2e7;     // Pa per meter of indentation
  double damping = 200.0;     // N*s/m, viscous normal term
  double friction = 0.6;      // dimensionless, in [0, 2]
};

/// Observable characteristics of one tactile sensor build.
struct SensorVariant {
  enum class MarkerGrid { kNone, k4x4, k7x7, k9x9, k7x9 };

  std::string id;
  MarkerGrid grid = MarkerGrid::kNone;
  double marker_radius_px = 1.3;
  double gain = 550.0;  // image intensity per meter of indentation
  std::array<bool, PressureMap::kTaxels> field_mask{};  // active taxels

  static std::array<bool, PressureMap::kTaxels> full_field();
  static std::array<bool, PressureMap::kTaxels> inset_field();  // outer ring off
};

/// Drives the press-and-perturb excitation. The Z channel modulates the
/// indentation depth; roll/pitch/yaw perturb the contact.
struct TrajectoryConfig {
  double duration_s = 2.0;
  double depth_offset_m = 7e-4;     // baseline indentation
  double z_amplitude_m = 3e-4;      // main depth oscillation amplitude
  double z_frequency_hz = 0.9;
  double depth_noise_std_m = 8e-5;  // band-limited additive depth noise
  double shear_limit_m = 2e-3;
  double yaw_rate_limit_dps = 40.0;
  double roll_pitch_limit_deg = 15.0;
  double raw_rate_hz = kDefaultForceRateHz;
  std::uint64_t seed = 0;
};

/// Instantaneous contact state along a trajectory. The tactile image is a
/// function of (d, shear, yaw) only; the wrench additionally sees the rates.
struct ContactState {
  double d = 0.0;      // indentation depth, meters, >= 0
  double d_dot = 0.0;  // depth rate, m/s
  Eigen::Vector2d shear = Eigen::Vector2d::Zero();  // meters
  double yaw = 0.0;       // radians
  double yaw_rate = 0.0;  // rad/s
  double roll = 0.0;      // radians, clipped to the config limit
  double pitch = 0.0;
};

// Sensor geometry shared by the pressure matrix and the image: both cover a
// 20 mm x 20 mm active region centered on the gel.
constexpr double kSensorHalfWidthM = 0.010;
constexpr double kRidgeHalfLengthM = 5e-3;
constexpr double kShearSaturationM = 1e-3;     // tanh scale for friction forces
constexpr double kFootprintShearCoupling = 0.5;  // contact patch drift per shear
constexpr double kYawTorqueCoeff = 300.0;        // tz per (rad/s * m^2)
constexpr double kMarkerValue = 0.9;

double taxel_area_m2();

std::vector<std::pair<double, ContactState>> press_and_perturb_trajectory(
    const TrajectoryConfig& cfg);

/// Indentation depth field of the indenter footprint at physical position
/// (x, y) meters from the sensor center.
double footprint_depth(const ContactState& state, const Indenter& ind, double x, double y);

std::pair<PressureMap, Wrench> contact_response(const ContactState& state, const Indenter& ind,
                                                const SensorVariant& sensor);

/// Marker dot centers in pixel coordinates (x=column, y=row) after shear and
/// yaw displacement. Empty for marker-free sensors.
std::vector<Eigen::Vector2d> marker_positions(const SensorVariant& sensor,
                                              const Eigen::Vector2d& shear, double yaw,
                                              int image_h = 32, int image_w = 32);

TactileImage render_tactile(const ContactState& state, const Indenter& ind,
                            const SensorVariant& sensor, int image_h = 32, int image_w = 32);

Episode simulate_episode(const TrajectoryConfig& cfg, const Indenter& ind,
                         const SensorVariant& sensor, std::uint64_t seed);

/// Adds zero-mean Gaussian noise (std = sigma_frac * per-channel training
/// std) to the wrench and active pressure taxels. Images are untouched.
Episode inject_label_noise(const Episode& episode, double sigma_frac, const Normalization& norm,
                           std::uint64_t seed);

/// 12 indenter presets: {sphere, flat, ridge} x {soft, hard} x {small, large}.
const std::vector<Indenter>& indenter_library();
const Indenter& indenter_by_id(const std::string& id);

/// 6 sensor presets: four full-field builds with different marker densities
/// plus two inset-field builds (one marker-free, one 7x9).
const std::vector<SensorVariant>& sensor_library();
const SensorVariant& sensor_by_id(const std::string& id);

/// Std of the viscous normal-force term c * d_dot over trajectories drawn
/// from cfg, estimated at the tactile rate with fresh seeds. This is the
/// irreducible single-frame force error scale used by the history ablation.
double viscous_force_std(const TrajectoryConfig& cfg, double damping, int n_trajectories,
                         std::uint64_t seed);

}  // namespace tfa
