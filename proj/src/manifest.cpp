#include "xpasc/cli.hpp"

#include "xpasc/common.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace xpasc::cli {

using nlohmann::json;

std::string manifest_to_json(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["config"] = m.config;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["seed"] = m.seed;
  j["tool_version"] = m.tool_version;
  return j.dump(2);
}

RunManifest manifest_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed run manifest: ") + e.what());
  }
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << manifest_to_json(m) << '\n';
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str());
}

std::filesystem::path manifest_path_for_file(const std::filesystem::path& out) {
  return std::filesystem::path(out.string() + ".manifest.json");
}

std::filesystem::path manifest_path_for_dir(const std::filesystem::path& dir) {
  return dir / "manifest.json";
}

}  // namespace xpasc::cli
