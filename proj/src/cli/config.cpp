#include "ntks/cli/config.hpp"

#include <cmath>
#include <sstream>

#include "ntks/io.hpp"

namespace ntks::cli {

ConfigReader::ConfigReader(json cfg) : cfg_(std::move(cfg)) {
  require(cfg_.is_object(), ErrorCode::InvalidArgument, "config must be a JSON object");
}

bool ConfigReader::has(const std::string& key) const { return cfg_.contains(key); }

const json& ConfigReader::fetch(const std::string& key) {
  used_.insert(key);
  return cfg_.at(key);
}

double ConfigReader::number(const std::string& key, double fallback) {
  if (!has(key)) return fallback;
  const json& v = fetch(key);
  require(v.is_number(), ErrorCode::InvalidArgument, key + " must be a number");
  const double x = v.get<double>();
  require(std::isfinite(x), ErrorCode::InvalidArgument, key + " must be finite");
  return x;
}

long long ConfigReader::integer(const std::string& key, long long fallback) {
  if (!has(key)) return fallback;
  const json& v = fetch(key);
  if (v.is_number_integer()) return v.get<long long>();
  require(v.is_number_float() && std::floor(v.get<double>()) == v.get<double>() &&
              std::abs(v.get<double>()) < 9e15,
          ErrorCode::InvalidArgument, key + " must be an integer");
  return static_cast<long long>(v.get<double>());
}

bool ConfigReader::boolean(const std::string& key, bool fallback) {
  if (!has(key)) return fallback;
  const json& v = fetch(key);
  require(v.is_boolean(), ErrorCode::InvalidArgument, key + " must be true or false");
  return v.get<bool>();
}

std::string ConfigReader::text(const std::string& key, const std::string& fallback) {
  if (!has(key)) return fallback;
  const json& v = fetch(key);
  if (v.is_number()) return v.dump();
  require(v.is_string(), ErrorCode::InvalidArgument, key + " must be a string");
  return v.get<std::string>();
}

std::vector<double> ConfigReader::numbers(const std::string& key,
                                          const std::vector<double>& fallback) {
  if (!has(key)) return fallback;
  const json& v = fetch(key);
  require(v.is_array() && !v.empty(), ErrorCode::InvalidArgument,
          key + " must be a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    require(e.is_number() && std::isfinite(e.get<double>()), ErrorCode::InvalidArgument,
            key + " must contain finite numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<long long> ConfigReader::integers(const std::string& key,
                                              const std::vector<long long>& fallback) {
  if (!has(key)) return fallback;
  const json& v = fetch(key);
  require(v.is_array() && !v.empty(), ErrorCode::InvalidArgument,
          key + " must be a non-empty array of integers");
  std::vector<long long> out;
  for (const auto& e : v) {
    require(e.is_number_integer(), ErrorCode::InvalidArgument, key + " must contain integers");
    out.push_back(e.get<long long>());
  }
  return out;
}

std::uint64_t ConfigReader::seed() {
  require(has("seed"), ErrorCode::InvalidArgument, "seed is required");
  const json& v = fetch("seed");
  require(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0),
          ErrorCode::InvalidArgument, "seed must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

void ConfigReader::reject_unknown() const {
  std::string unknown;
  for (const auto& [key, value] : cfg_.items()) {
    (void)value;
    if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  require(unknown.empty(), ErrorCode::InvalidArgument, "unknown config keys: " + unknown);
}

void check_positive(const std::string& key, double v) {
  require(v > 0.0, ErrorCode::InvalidArgument, key + " must be positive");
}

void check_nonnegative(const std::string& key, double v) {
  require(v >= 0.0, ErrorCode::InvalidArgument, key + " must be nonnegative");
}

void check_range(const std::string& key, double v, double lo, double hi) {
  std::ostringstream msg;
  msg << key << " must lie in [" << lo << ", " << hi << "]";
  require(v >= lo && v <= hi, ErrorCode::InvalidArgument, msg.str());
}

void check_min(const std::string& key, long long v, long long lo) {
  require(v >= lo, ErrorCode::InvalidArgument, key + " must be >= " + std::to_string(lo));
}

void check_one_of(const std::string& key, const std::string& v,
                  const std::vector<std::string>& allowed) {
  std::string list;
  for (const auto& a : allowed) {
    if (a == v) return;
    list += (list.empty() ? "" : ", ") + a;
  }
  fail(ErrorCode::InvalidArgument, key + " must be one of: " + list);
}

json load_config_file(const std::string& path) {
  const std::string text = read_text_file(path);
  json cfg = json::parse(text, nullptr, false);
  require(!cfg.is_discarded(), ErrorCode::InvalidArgument, "config is not valid JSON: " + path);
  require(cfg.is_object(), ErrorCode::InvalidArgument, "config must be a JSON object");
  return cfg;
}

void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrorCode::InvalidArgument,
          "override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  cfg[key] = value.is_discarded() ? json(raw) : value;
}

}  // namespace ntks::cli
