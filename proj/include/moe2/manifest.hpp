#pragma once

// Provenance record written next to every CLI output: the effective config
// (verbatim), its digest, the seed, digests of the inputs, and the produced
// paths. Feeding a manifest back in as --config reproduces the data outputs
// byte for byte; only wall_seconds varies between such runs.

#include <cstdint>
#include <string>
#include <vector>

namespace moe2 {

inline constexpr const char* kToolVersion = "0.1.0";

struct FileDigest {
  std::string path;
  std::string digest;  // 16 hex chars
};

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::string config_hash;   // digest of config_json
  std::string config_json;   // effective config document
  std::vector<FileDigest> inputs;
  std::vector<std::string> outputs;
  double wall_seconds = 0.0;
};

// 64-bit FNV-1a of the bytes, as fixed-width hex.
std::string digest_hex(const std::string& bytes);

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);

// Serializes m (filling config_hash from config_json) and writes it to path.
void write_manifest(RunManifest m, const std::string& path);

}  // namespace moe2
