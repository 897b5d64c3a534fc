#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tfa {

/// Plain declarative `key = value` documents: one assignment per line, `#`
/// comments, no sections, no environment expansion. Later assignments to
/// the same key win. Explicit CLI flags override file values.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::filesystem::path& path);
  static KeyValueConfig parse_string(const std::string& text);

  bool has(const std::string& key) const;
  std::string str(const std::string& key, const std::string& fallback) const;
  double num(const std::string& key, double fallback) const;
  int integer(const std::string& key, int fallback) const;
  std::uint64_t uinteger(const std::string& key, std::uint64_t fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<std::string> list(const std::string& key) const;  // comma separated
  std::vector<int> int_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, int value);
  void set(const std::string& key, std::uint64_t value);

  /// Writes the assignments in insertion order (the run's config snapshot).
  void save(const std::filesystem::path& path) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  const std::string* find(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace tfa
