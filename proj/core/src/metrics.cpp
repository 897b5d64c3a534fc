#include "tfa/metrics.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "tfa/common.hpp"

namespace tfa {

using nlohmann::json;

double MetricsRecord::value(const std::string& name) const {
  for (const auto& [k, v] : values) {
    if (k == name) return v;
  }
  throw Error("metrics: record has no value named " + name);
}

void append_metrics(const std::filesystem::path& path, const MetricsRecord& rec) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::app);
  if (!os) throw Error("metrics: cannot open " + path.string());
  json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["run_id"] = rec.run_id;
  j["step"] = rec.step;
  j["wall_ms"] = rec.wall_ms;
  json vals = json::object();
  for (const auto& [k, v] : rec.values) vals[k] = v;
  j["values"] = vals;
  os << j.dump() << "\n";
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("metrics: cannot open " + path.string());
  std::vector<MetricsRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    const int schema = j.value("schema_version", 0);
    if (schema != kMetricsSchemaVersion) {
      throw VersionError("metrics: schema_version " + std::to_string(schema) +
                         ", reader supports " + std::to_string(kMetricsSchemaVersion));
    }
    MetricsRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.step = j.at("step").get<int>();
    r.wall_ms = j.value("wall_ms", 0.0);
    for (const auto& [k, v] : j.at("values").items()) r.values.emplace_back(k, v.get<double>());
    out.push_back(std::move(r));
  }
  return out;
}

bool records_match(const std::vector<MetricsRecord>& a, const std::vector<MetricsRecord>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].run_id != b[i].run_id || a[i].step != b[i].step) return false;
    if (a[i].values != b[i].values) return false;
  }
  return true;
}

}  // namespace tfa
