#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tfa/common.hpp"

namespace tfa {

/// 6-axis force/torque state at the contact interface. Serialized as six
/// 64-bit floats in the order fx, fy, fz, tx, ty, tz.
struct Wrench {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();   // newtons
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();  // newton-meters

  Eigen::Matrix<double, 6, 1> vec6() const {
    Eigen::Matrix<double, 6, 1> v;
    v << force, torque;
    return v;
  }
  static Wrench from_vec6(const Eigen::Matrix<double, 6, 1>& v) {
    Wrench w;
    w.force = v.head<3>();
    w.torque = v.tail<3>();
    return w;
  }
  bool finite() const { return force.allFinite() && torque.allFinite(); }
};

/// Spatial normal-pressure distribution on the 12x12 matrix sensor.
/// Entries are pascals, stored in float32 (the container precision), row
/// major. Taxels outside the sensor's active field are exactly zero.
struct PressureMap {
  static constexpr int kGrid = 12;
  static constexpr int kTaxels = kGrid * kGrid;

  std::array<float, kTaxels> p{};
  double taxel_area = 0.0;  // square meters

  float& at(int row, int col) { return p[row * kGrid + col]; }
  float at(int row, int col) const { return p[row * kGrid + col]; }

  /// Taxel sum times area, accumulated in double from the stored float32
  /// values. For simulator output this equals the elastic part of Fz.
  double force_sum() const {
    double s = 0.0;
    for (float v : p) s += static_cast<double>(v);
    return s * taxel_area;
  }
};

/// Single-channel tactile image, values clamped to [0, 1], float32 storage.
struct TactileImage {
  int height = 32;
  int width = 32;
  std::vector<float> pixels;  // row major, height*width

  TactileImage() = default;
  TactileImage(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w, 0.0f) {}

  float& at(int row, int col) { return pixels[static_cast<size_t>(row) * width + col]; }
  float at(int row, int col) const { return pixels[static_cast<size_t>(row) * width + col]; }
};

/// One time-aligned record from the acquisition pipeline.
struct SyncedFrame {
  double t = 0.0;  // seconds
  TactileImage image;
  PressureMap pmap;
  Wrench wrench;
  std::string sensor_id;
};

/// An ordered run of frames captured with one sensor and one indenter.
/// Demonstration episodes produced by the policy tooling additionally carry
/// per-frame action chunks and proprioception rows; both stay empty for
/// plain contact data.
struct Episode {
  std::vector<SyncedFrame> frames;
  std::string indenter_id;
  std::string sensor_id;
  std::uint64_t seed = 0;
  int ctx_id = 0;

  Eigen::MatrixXf actions;   // frames x horizon, grip increments (demo sets)
  Eigen::MatrixXd proprio;   // frames x 2 (demo sets)

  int size() const { return static_cast<int>(frames.size()); }
};

/// A view of N consecutive frames inside one episode; the alignment unit.
struct WindowSample {
  const Episode* episode = nullptr;
  int start = 0;
  int length = 0;

  const SyncedFrame& frame(int j) const { return episode->frames[start + j]; }
  const SyncedFrame& last() const { return episode->frames[start + length - 1]; }
};

constexpr int kDefaultWindow = 5;

}  // namespace tfa
