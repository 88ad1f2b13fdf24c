#include "moe2/manifest.hpp"

#include <stdexcept>

#include "json.hpp"
#include "moe2/serialize.hpp"

namespace moe2 {

namespace {

using nlohmann::json;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

std::string digest_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string manifest_to_json(const RunManifest& m) {
  json j{{"schema_version", kSchemaVersion},
         {"kind", "manifest"},
         {"command", m.command},
         {"seed", m.seed},
         {"tool_version", m.tool_version},
         {"config_hash", m.config_hash},
         {"config", json::parse(m.config_json)},
         {"wall_seconds", m.wall_seconds}};
  json inputs = json::array();
  for (const FileDigest& f : m.inputs)
    inputs.push_back(json{{"path", f.path}, {"digest", f.digest}});
  j["inputs"] = std::move(inputs);
  j["outputs"] = m.outputs;
  return j.dump(2) + "\n";
}

RunManifest manifest_from_json(const std::string& text) {
  const json j = json::parse(text);
  require(j.is_object(), "manifest must be a JSON object");
  require(j.contains("kind") && j.at("kind").get<std::string>() == "manifest",
          "expected a 'manifest' document");
  require(j.at("schema_version").get<int>() == kSchemaVersion, "unsupported schema_version");
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.config_json = j.at("config").dump(2) + "\n";
  for (const json& f : j.at("inputs"))
    m.inputs.push_back(FileDigest{f.at("path").get<std::string>(),
                                  f.at("digest").get<std::string>()});
  for (const json& o : j.at("outputs")) m.outputs.push_back(o.get<std::string>());
  m.wall_seconds = j.at("wall_seconds").get<double>();
  return m;
}

void write_manifest(RunManifest m, const std::string& path) {
  m.config_hash = digest_hex(m.config_json);
  write_text_file(path, manifest_to_json(m));
}

}  // namespace moe2
