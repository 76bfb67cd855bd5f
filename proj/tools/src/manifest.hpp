#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "attest/kv_config.hpp"

namespace attest::cli {

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// One manifest per run, written as manifest.txt in the output directory.
/// Keys: command, seed, threads, config.*, input.*, output.*,
/// duration_seconds, checksum.<file relative to the output directory>.
struct RunManifest {
  std::string command;
  KeyValueConfig config;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::vector<std::pair<std::string, std::string>> inputs;
  std::vector<std::pair<std::string, std::string>> outputs;
  double duration_seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> checksums;

  /// Hashes every regular file below `dir` except manifest.txt.
  void checksum_directory(const std::filesystem::path& dir);
  void write(const std::filesystem::path& dir) const;
  static RunManifest read(const std::filesystem::path& dir);
};

/// Recomputes every recorded checksum. Throws std::runtime_error naming the
/// first missing or modified file.
RunManifest verify_manifest(const std::filesystem::path& dir);

}  // namespace attest::cli
