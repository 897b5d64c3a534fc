#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tfa {

constexpr int kMetricsSchemaVersion = 1;

/// One append-only training/evaluation record. Named values are the
/// deterministic payload; wall_ms is informational and excluded from
/// reproducibility comparisons.
struct MetricsRecord {
  std::string run_id;
  int step = 0;
  std::vector<std::pair<std::string, double>> values;
  double wall_ms = 0.0;

  double value(const std::string& name) const;
};

void append_metrics(const std::filesystem::path& path, const MetricsRecord& rec);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

/// Deterministic-field equality (run id, step, named values).
bool records_match(const std::vector<MetricsRecord>& a, const std::vector<MetricsRecord>& b);

}  // namespace tfa
