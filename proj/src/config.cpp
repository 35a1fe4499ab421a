#include "esm/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "esm/errors.hpp"

namespace esm {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0;
  size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

void parse_line(const std::string& raw, int line_no,
                std::map<std::string, std::string>& values) {
  std::string line = raw;
  const size_t hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  line = trim(line);
  if (line.empty()) return;
  const size_t eq = line.find('=');
  if (eq == std::string::npos) {
    throw ValidationError("config line " + std::to_string(line_no) +
                          ": expected `key = value`, got \"" + trim(raw) +
                          "\"");
  }
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  if (key.empty()) {
    throw ValidationError("config line " + std::to_string(line_no) +
                          ": empty key");
  }
  values[key] = value;
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

Config Config::from_string(const std::string& text) {
  Config config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    parse_line(line, ++line_no, config.values_);
  }
  return config;
}

void Config::apply_override(const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
    throw ValidationError("--set expects key=value, got \"" + assignment +
                          "\"");
  }
  values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

bool Config::has(const std::string& key) const {
  return values_.count(key) != 0;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw ValidationError("config is missing required key \"" + key + "\"");
  }
  return it->second;
}

long Config::get_int(const std::string& key, long fallback) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const char* begin = it->second.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw ValidationError("config key \"" + key + "\": cannot parse \"" +
                          it->second + "\" as an integer");
  }
  return v;
}

uint64_t Config::get_u64(const std::string& key, uint64_t fallback) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const char* begin = it->second.c_str();
  char* end = nullptr;
  const unsigned long long v = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0' || it->second.front() == '-') {
    throw ValidationError("config key \"" + key + "\": cannot parse \"" +
                          it->second + "\" as an unsigned integer");
  }
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const char* begin = it->second.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ValidationError("config key \"" + key + "\": cannot parse \"" +
                          it->second + "\" as a number");
  }
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config key \"" + key + "\": cannot parse \"" + v +
                        "\" as a boolean");
}

std::vector<int> Config::get_int_list(const std::string& key,
                                      const std::vector<int>& fallback) const {
  consumed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    const char* begin = item.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (item.empty() || end == begin || *end != '\0') {
      throw ValidationError("config key \"" + key + "\": cannot parse \"" +
                            it->second + "\" as a comma-separated int list");
    }
    out.push_back(static_cast<int>(v));
  }
  if (out.empty()) {
    throw ValidationError("config key \"" + key + "\": empty list");
  }
  return out;
}

void Config::check_all_consumed() const {
  for (const auto& [key, value] : values_) {
    if (!consumed_.count(key)) {
      throw ValidationError("unknown config key \"" + key + "\"");
    }
  }
}

}  // namespace esm
