#include "manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace attest::cli {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 init failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

void RunManifest::checksum_directory(const fs::path& dir) {
  checksums.clear();
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.txt") continue;
    checksums.emplace_back(rel, sha256_file(entry.path()));
  }
  std::sort(checksums.begin(), checksums.end());
}

void RunManifest::write(const fs::path& dir) const {
  KeyValueConfig kv;
  kv.set("command", command);
  kv.set("seed", std::to_string(seed));
  kv.set("threads", std::to_string(threads));
  for (const auto& [k, v] : config.entries()) kv.set("config." + k, v);
  for (const auto& [k, v] : inputs) kv.set("input." + k, v);
  for (const auto& [k, v] : outputs) kv.set("output." + k, v);
  kv.set("duration_seconds", format_double(duration_seconds));
  for (const auto& [k, v] : checksums) kv.set("checksum." + k, v);
  kv.save(dir / "manifest.txt");
}

RunManifest RunManifest::read(const fs::path& dir) {
  const auto kv = KeyValueConfig::load(dir / "manifest.txt");
  RunManifest m;
  m.command = kv.get_string("command");
  m.seed = kv.get_uint("seed");
  m.threads = kv.get_uint("threads");
  m.duration_seconds = kv.get_double("duration_seconds");
  auto strip = [](const std::string& key, std::string_view prefix) {
    return key.substr(prefix.size());
  };
  for (const auto& [k, v] : kv.entries()) {
    if (k.starts_with("config.")) m.config.set(strip(k, "config."), v);
    else if (k.starts_with("input.")) m.inputs.emplace_back(strip(k, "input."), v);
    else if (k.starts_with("output.")) m.outputs.emplace_back(strip(k, "output."), v);
    else if (k.starts_with("checksum.")) m.checksums.emplace_back(strip(k, "checksum."), v);
  }
  return m;
}

RunManifest verify_manifest(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.txt")) {
    throw std::runtime_error("missing manifest in " + dir.string());
  }
  auto m = RunManifest::read(dir);
  for (const auto& [file, digest] : m.checksums) {
    const auto path = dir / file;
    if (!fs::exists(path)) throw std::runtime_error("manifest lists missing file " + path.string());
    if (sha256_file(path) != digest) {
      throw std::runtime_error("checksum mismatch for " + path.string());
    }
  }
  return m;
}

}  // namespace attest::cli
