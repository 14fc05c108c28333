#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace oel {

/// Flat `key = value` configuration with `#` comments and dotted namespaces.
/// Keys are validated against a schema before use: unknown keys are errors,
/// never silently ignored.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  /// Apply a `key=value` override (the --set flag form).
  void apply_override(const std::string& kv);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;

  /// Comma-separated list values.
  std::vector<std::string> get_list(const std::string& key) const;

  /// Throws when a key outside `allowed` is present.
  void validate_keys(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  /// Canonical `key = value` text, sorted by key.
  std::string resolved_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace oel
