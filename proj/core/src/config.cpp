#include "tfa/config.hpp"

#include <fstream>
#include <sstream>

#include "tfa/common.hpp"

namespace tfa {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_string(ss.str());
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(lineno) + " is not `key = value`");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("config: empty key at line " + std::to_string(lineno));
    cfg.set(key, trim(t.substr(eq + 1)));
  }
  return cfg;
}

const std::string* KeyValueConfig::find(const std::string& key) const {
  const std::string* hit = nullptr;
  for (const auto& [k, v] : entries_) {
    if (k == key) hit = &v;
  }
  return hit;
}

bool KeyValueConfig::has(const std::string& key) const { return find(key) != nullptr; }

std::string KeyValueConfig::str(const std::string& key, const std::string& fallback) const {
  const std::string* v = find(key);
  return v ? *v : fallback;
}

double KeyValueConfig::num(const std::string& key, double fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  try {
    size_t pos = 0;
    const double d = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key " + key + " is not a number: " + *v);
  }
}

int KeyValueConfig::integer(const std::string& key, int fallback) const {
  const double d = num(key, fallback);
  const int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) throw ConfigError("config: key " + key + " is not an integer");
  return i;
}

std::uint64_t KeyValueConfig::uinteger(const std::string& key, std::uint64_t fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  try {
    size_t pos = 0;
    const std::uint64_t u = std::stoull(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("trailing characters");
    return u;
  } catch (const std::exception&) {
    throw ConfigError("config: key " + key + " is not an unsigned integer: " + *v);
  }
}

bool KeyValueConfig::flag(const std::string& key, bool fallback) const {
  const std::string* v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("config: key " + key + " is not a boolean: " + *v);
}

std::vector<std::string> KeyValueConfig::list(const std::string& key) const {
  const std::string* v = find(key);
  std::vector<std::string> out;
  if (!v) return out;
  std::istringstream is(*v);
  std::string item;
  while (std::getline(is, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::vector<int> KeyValueConfig::int_list(const std::string& key) const {
  std::vector<int> out;
  for (const std::string& s : list(key)) {
    try {
      out.push_back(std::stoi(s));
    } catch (const std::exception&) {
      throw ConfigError("config: key " + key + " has a non-integer item: " + s);
    }
  }
  return out;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValueConfig::set(const std::string& key, double value) {
  std::ostringstream os;
  os.precision(17);
  os << value;
  set(key, os.str());
}

void KeyValueConfig::set(const std::string& key, int value) { set(key, std::to_string(value)); }
void KeyValueConfig::set(const std::string& key, std::uint64_t value) {
  set(key, std::to_string(value));
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("config: cannot write " + path.string());
  for (const auto& [k, v] : entries_) os << k << " = " << v << "\n";
}

}  // namespace tfa
