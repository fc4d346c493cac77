#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tep/core.hpp"

namespace tep::config {

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

/// Flat key = value configuration. Lines starting with '#' are comments.
/// Getters record the value they resolve (including defaults), so the
/// resolved configuration can be written next to a run's outputs and fed back
/// in to reproduce it.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse(const std::string& text, const std::string& source = "<string>");
  static RunConfig from_file(const std::string& path);

  // Later calls win; used for command-line overrides.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  bool get_bool(const std::string& key, bool fallback);
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback);

  // Required string; throws ConfigError when absent.
  std::string require_string(const std::string& key);

  /// Every resolved key in sorted order, one key=value per line.
  std::string render_resolved() const;
  void write_resolved(const std::string& path) const;

  /// Throws ConfigError naming any supplied key no getter asked for.
  void reject_unknown() const;

 private:
  std::string raw(const std::string& key) const;
  void resolve(const std::string& key, const std::string& value);

  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> resolved_;
};

/// Formats a double so that parsing it back yields the same value.
std::string format_double(double v);

}  // namespace tep::config
