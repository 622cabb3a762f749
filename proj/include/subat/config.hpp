#pragma once

// Flat `key = value` run configuration. Lines starting with '#' are comments.
// Keys outside the fixed vocabulary are rejected, as are repeated keys.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace subat {

class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  static bool known_key(std::string_view key);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value);

  // Typed getters throw ConfigError naming the key on absent/malformed values.
  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  std::uint64_t u64(const std::string& key) const;
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) const;
  double real(const std::string& key) const;
  double real(const std::string& key, double fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<std::size_t> size_list(const std::string& key, std::vector<std::size_t> fallback) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  const std::string& raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

std::uint64_t parse_u64(std::string_view text, const std::string& key);
double parse_real(std::string_view text, const std::string& key);
std::vector<double> parse_real_list(std::string_view text, const std::string& key);

}  // namespace subat
