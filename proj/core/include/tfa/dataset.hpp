#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tfa/types.hpp"

namespace tfa {

constexpr int kDatasetFormatVersion = 1;
constexpr double kTactileRateHz = 30.0;
constexpr double kDefaultForceRateHz = 300.0;
constexpr double kStdFloor = 1e-8;

/// Per-modality z-score statistics, computed on the training split only.
struct Normalization {
  Eigen::Matrix<double, 6, 1> wrench_mean = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> wrench_std = Eigen::Matrix<double, 6, 1>::Ones();
  double pmap_mean = 0.0;
  double pmap_std = 1.0;
  double image_mean = 0.0;
  double image_std = 1.0;
};

Normalization compute_normalization(std::span<const Episode> dataset);

/// Stats over a subset of episodes (by index), e.g. the training split.
Normalization compute_normalization(std::span<const Episode> dataset,
                                    std::span<const int> episode_ids);

/// Linear interpolation of an irregularly sampled vector signal onto the
/// tactile timestamp grid. Every query must lie inside the sampled support.
std::vector<Eigen::VectorXd> resample_to_tactile_rate(
    const std::vector<std::pair<double, Eigen::VectorXd>>& raw_signal,
    const std::vector<double>& tactile_timestamps);

/// Sliding windows over one episode; returns an empty list when the episode
/// is shorter than n.
std::vector<WindowSample> make_windows(const Episode& episode, int n, int stride);

struct ManifestEpisode {
  std::string file;
  int frames = 0;
  std::string sensor_id;
  std::string indenter_id;
  std::uint64_t seed = 0;
  double taxel_area = 0.0;
  int action_dim = 0;   // nonzero only for demonstration episodes
  int proprio_dim = 0;  // nonzero only for demonstration episodes
  int ctx_id = 0;
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  double tactile_hz = kTactileRateHz;
  double force_hz = kDefaultForceRateHz;
  int image_height = 32;
  int image_width = 32;
  std::optional<Normalization> normalization;
  std::vector<ManifestEpisode> episodes;
};

/// Container layout: `manifest.json` plus one binary blob per episode.
/// Blob order: images (float32), pressure maps (float32), wrenches
/// (float64), timestamps (float64), then for demonstration episodes the
/// action (float32) and proprioception (float64) arrays. All little endian,
/// row major.
void save_dataset(const DatasetManifest& manifest, std::span<const Episode> episodes,
                  const std::filesystem::path& dir);

std::pair<DatasetManifest, std::vector<Episode>> load_dataset(const std::filesystem::path& dir);

/// Builds manifest rows from in-memory episodes (file names ep_00000.bin ...).
DatasetManifest make_manifest(std::span<const Episode> episodes, double force_hz,
                              int image_height, int image_width);

}  // namespace tfa
