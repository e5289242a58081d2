#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace shapeprior {

struct OutputRecord {
  std::string path; // relative to the manifest's directory
  std::uint64_t bytes = 0;
  std::uint32_t crc32 = 0;
};

// provenance record for one CLI command; duration_sec is the only field
// allowed to differ between reruns of an identical command
struct RunManifest {
  std::string command;
  std::string version = "1.0.0";
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::vector<std::string> inputs;
  std::vector<OutputRecord> outputs;
  double duration_sec = 0.0;
};

std::uint32_t file_crc32(const std::filesystem::path& path);
std::uint64_t file_bytes(const std::filesystem::path& path);

// scans the given relative paths under base_dir and fills bytes/crc32
std::vector<OutputRecord> collect_outputs(const std::filesystem::path& base_dir,
                                          std::vector<std::string> relative_paths);

void write_run_manifest(const std::filesystem::path& path, const RunManifest& m);

} // namespace shapeprior
