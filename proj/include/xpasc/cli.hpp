#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace xpasc::cli {

// Record written next to every command output. Re-running `argv` against
// inputs with the recorded digests reproduces the primary outputs byte for
// byte.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;                // arguments after the program name
  std::map<std::string, std::string> config;    // every flag, defaults included
  std::map<std::string, std::string> inputs;    // path -> sha256
  std::vector<std::string> outputs;
  std::string seed;                             // empty when the command has none
  std::string tool_version;
};

std::string manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const std::string& text);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

// Manifest path for a file output (`<out>.manifest.json`) or a directory
// output (`<dir>/manifest.json`).
std::filesystem::path manifest_path_for_file(const std::filesystem::path& out);
std::filesystem::path manifest_path_for_dir(const std::filesystem::path& dir);

// Entry point shared by the executable and the tests. `args` excludes the
// program name. Returns the process exit status: 0 on success, 1 on a
// runtime failure, 2 on a usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xpasc::cli
