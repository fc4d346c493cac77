#include "tep/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tep::config {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(body.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = trim(body.substr(eq + 1));
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str(), path);
}

void RunConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::string RunConfig::raw(const std::string& key) const { return values_.at(key); }

void RunConfig::resolve(const std::string& key, const std::string& value) { resolved_[key] = value; }

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) {
  const auto v = has(key) ? raw(key) : fallback;
  resolve(key, v);
  return v;
}

std::string RunConfig::require_string(const std::string& key) {
  if (!has(key)) throw ConfigError("missing required config key '" + key + "'");
  return get_string(key, {});
}

double RunConfig::get_double(const std::string& key, double fallback) {
  const double v = has(key) ? to_double(key, raw(key)) : fallback;
  resolve(key, format_double(v));
  return v;
}

std::size_t RunConfig::get_size(const std::string& key, std::size_t fallback) {
  const auto v = has(key) ? static_cast<std::size_t>(to_u64(key, raw(key))) : fallback;
  resolve(key, std::to_string(v));
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key, std::uint64_t fallback) {
  const auto v = has(key) ? to_u64(key, raw(key)) : fallback;
  resolve(key, std::to_string(v));
  return v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) {
  bool v = fallback;
  if (has(key)) {
    const auto s = raw(key);
    if (s == "true" || s == "1" || s == "yes") {
      v = true;
    } else if (s == "false" || s == "0" || s == "no") {
      v = false;
    } else {
      throw ConfigError("config key '" + key + "': expected a boolean, got '" + s + "'");
    }
  }
  resolve(key, v ? "true" : "false");
  return v;
}

std::vector<double> RunConfig::get_doubles(const std::string& key, const std::vector<double>& fallback) {
  std::vector<double> v;
  if (has(key)) {
    std::istringstream in(raw(key));
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto t = trim(item);
      if (!t.empty()) v.push_back(to_double(key, t));
    }
    if (v.empty()) throw ConfigError("config key '" + key + "': empty list");
  } else {
    v = fallback;
  }
  std::string joined;
  for (std::size_t i = 0; i < v.size(); ++i) joined += (i ? "," : "") + format_double(v[i]);
  resolve(key, joined);
  return v;
}

std::string RunConfig::render_resolved() const {
  std::string out;
  for (const auto& [k, v] : resolved_) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::write_resolved(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write resolved config '" + path + "'");
  out << render_resolved();
}

void RunConfig::reject_unknown() const {
  for (const auto& [k, v] : values_) {
    if (resolved_.count(k) == 0) throw ConfigError("unknown config key '" + k + "'");
  }
}

}  // namespace tep::config
