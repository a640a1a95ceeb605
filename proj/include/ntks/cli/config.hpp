#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ntks/errors.hpp"

namespace ntks::cli {

using nlohmann::json;

// Typed, validated access to a flat JSON config object. Every key that is
// read is remembered so that leftover (misspelled) keys can be rejected.
class ConfigReader {
 public:
  explicit ConfigReader(json cfg);

  bool has(const std::string& key) const;
  double number(const std::string& key, double fallback);
  long long integer(const std::string& key, long long fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
  std::vector<long long> integers(const std::string& key, const std::vector<long long>& fallback);
  std::uint64_t seed();

  // Throws InvalidArgument naming any key that was never read.
  void reject_unknown() const;

 private:
  const json& fetch(const std::string& key);

  json cfg_;
  std::set<std::string> used_;
};

// Validation helpers; all throw InvalidArgument with the key in the message.
void check_positive(const std::string& key, double v);
void check_nonnegative(const std::string& key, double v);
void check_range(const std::string& key, double v, double lo, double hi);
void check_min(const std::string& key, long long v, long long lo);
void check_one_of(const std::string& key, const std::string& v,
                  const std::vector<std::string>& allowed);

json load_config_file(const std::string& path);

// "key=value": value is parsed as JSON when possible and kept as a string otherwise.
void apply_override(json& cfg, const std::string& assignment);

}  // namespace ntks::cli
