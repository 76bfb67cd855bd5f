#include "attest/kv_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace attest {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

double parse_double(std::string_view text, std::string_view what) {
  text = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("cannot parse '" + std::string(text) + "' as a number for " +
                                std::string(what));
  }
  return value;
}

std::uint64_t parse_uint(std::string_view text, std::string_view what) {
  text = trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::invalid_argument("cannot parse '" + std::string(text) +
                                "' as an unsigned integer for " + std::string(what));
  }
  return value;
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    }
    if (cfg.has(key)) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": duplicate key '" + key + "'");
    }
    cfg.entries_.emplace_back(std::move(key), std::string(trim(line.substr(eq + 1))));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KeyValueConfig::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_string();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

bool KeyValueConfig::has(std::string_view key) const { return find(key).has_value(); }

void KeyValueConfig::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

std::optional<std::string> KeyValueConfig::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const std::string& KeyValueConfig::get_string(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw std::invalid_argument("missing required config key '" + std::string(key) + "'");
}

double KeyValueConfig::get_double(std::string_view key) const {
  return parse_double(get_string(key), key);
}

std::uint64_t KeyValueConfig::get_uint(std::string_view key) const {
  return parse_uint(get_string(key), key);
}

std::vector<double> KeyValueConfig::get_doubles(std::string_view key) const {
  std::vector<double> out;
  std::string_view rest = get_string(key);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    out.push_back(parse_double(rest.substr(0, comma), key));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (out.empty()) {
    throw std::invalid_argument("config key '" + std::string(key) + "' has no values");
  }
  return out;
}

}  // namespace attest
