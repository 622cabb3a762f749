#include "subat/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "subat/error.hpp"

namespace subat {

namespace {

constexpr std::array<std::string_view, 42> kKeys = {
    "seed",           "model.hidden",     "data.kind",         "data.dim",
    "data.classes",   "data.per_class",   "data.margin",       "data.noise",
    "data.csv_path",  "data.split",       "attack.norm",       "attack.eps",
    "attack.alpha",   "attack.steps",     "attack.restarts",   "attack.rand_init",
    "eval.eps",       "eval.alpha",       "eval.steps",        "eval.restarts",
    "train.epochs",   "train.batch_size", "train.lr",          "train.schedule",
    "train.milestones", "train.decay",    "train.momentum",    "train.weight_decay",
    "sample.per_epoch", "sample.epochs",  "sample.truncate",   "sub.dim",
    "sub.lr",         "sub.epochs",       "sub.schedule",      "sub.milestones",
    "sub.decay",      "sub.batch_size",   "sub.eps",           "sub.alpha",
    "monitor.batch_size", "kernels",
};

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view text) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(trim(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

std::uint64_t parse_u64(std::string_view text, const std::string& key) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || p != text.data() + text.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

double parse_real(std::string_view text, const std::string& key) {
  text = trim(text);
  double v = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError(key, "expected a finite number, got '" + std::string(text) + "'");
  }
  return v;
}

std::vector<double> parse_real_list(std::string_view text, const std::string& key) {
  std::vector<double> out;
  for (std::string_view f : split_commas(text)) out.push_back(parse_real(f, key));
  return out;
}

bool Config::known_key(std::string_view key) {
  return std::find(kKeys.begin(), kKeys.end(), key) != kKeys.end();
}

Config Config::parse(std::string_view text) {
  Config cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(line), "line " + std::to_string(line_no) + " lacks '='");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (!known_key(key)) throw ConfigError(key, "unknown key");
    if (cfg.has(key)) throw ConfigError(key, "given more than once");
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Config::set(const std::string& key, std::string value) {
  if (!known_key(key)) throw ConfigError(key, "unknown key");
  values_[key] = std::move(value);
}

const std::string& Config::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "required key is missing");
  return it->second;
}

std::string Config::string(const std::string& key) const { return raw(key); }
std::string Config::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}
std::uint64_t Config::u64(const std::string& key) const { return parse_u64(raw(key), key); }
std::uint64_t Config::u64(const std::string& key, std::uint64_t fallback) const {
  return has(key) ? u64(key) : fallback;
}
double Config::real(const std::string& key) const { return parse_real(raw(key), key); }
double Config::real(const std::string& key, double fallback) const {
  return has(key) ? real(key) : fallback;
}

bool Config::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true/false, got '" + v + "'");
}

std::vector<std::size_t> Config::size_list(const std::string& key, std::vector<std::size_t> fallback) const {
  if (!has(key)) return fallback;
  std::vector<std::size_t> out;
  const std::string& v = raw(key);
  if (trim(v).empty()) return out;
  for (std::string_view f : split_commas(v)) out.push_back(parse_u64(f, key));
  return out;
}

}  // namespace subat
