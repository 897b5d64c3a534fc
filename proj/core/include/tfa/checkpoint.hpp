#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace tfa {

constexpr std::uint32_t kCheckpointVersion = 1;

/// Flat named container for everything a run needs to resume or evaluate:
/// parameter matrices, codebooks, usage counts, normalization statistics,
/// and architecture tags. Binary little endian with a format version.
struct Blob {
  std::map<std::string, Eigen::MatrixXd> mats;
  std::map<std::string, std::vector<std::uint64_t>> counts;
  std::map<std::string, std::string> strings;

  double scalar(const std::string& name) const;
  void set_scalar(const std::string& name, double v);
  const Eigen::MatrixXd& mat(const std::string& name) const;
};

void save_blob(const Blob& blob, const std::filesystem::path& path);
Blob load_blob(const std::filesystem::path& path);

}  // namespace tfa
