#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace attest {

/// Flat "key = value" text. Blank lines and lines starting with '#' are
/// ignored; keys keep their file order so written files are stable.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void save(const std::filesystem::path& path) const;
  std::string to_string() const;

  bool has(std::string_view key) const;
  void set(std::string key, std::string value);

  /// Required lookups; throw std::invalid_argument naming the key when the
  /// key is missing or the value does not parse.
  const std::string& get_string(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;
  std::vector<double> get_doubles(std::string_view key) const;

  std::optional<std::string> find(std::string_view key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_uint(std::string_view text, std::string_view what);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace attest
