#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace esm {

// Flat `key = value` config with dotted keys (net.widths = 10,128,64,1).
// '#' starts a comment; blank lines are skipped. Typed getters record which
// keys were read so check_all_consumed can reject typos loudly.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  // "key=value", as passed to --set; later overrides win.
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const;

  // Throws ValidationError naming the first key nothing ever read.
  void check_all_consumed() const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> consumed_;
};

}  // namespace esm
