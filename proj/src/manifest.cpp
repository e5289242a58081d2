#include "shapeprior/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <zlib.h>

#include "json.hpp"

namespace shapeprior {

std::uint32_t file_crc32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  uLong crc = ::crc32(0L, Z_NULL, 0);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(buf),
                  static_cast<uInt>(in.gcount()));
    if (in.eof()) break;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint64_t file_bytes(const std::filesystem::path& path) {
  return static_cast<std::uint64_t>(std::filesystem::file_size(path));
}

std::vector<OutputRecord> collect_outputs(const std::filesystem::path& base_dir,
                                          std::vector<std::string> relative_paths) {
  std::sort(relative_paths.begin(), relative_paths.end());
  relative_paths.erase(
      std::unique(relative_paths.begin(), relative_paths.end()),
      relative_paths.end());
  std::vector<OutputRecord> out;
  for (const std::string& rel : relative_paths) {
    OutputRecord rec;
    rec.path = rel;
    rec.bytes = file_bytes(base_dir / rel);
    rec.crc32 = file_crc32(base_dir / rel);
    out.push_back(std::move(rec));
  }
  return out;
}

void write_run_manifest(const std::filesystem::path& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["config"] = m.config;
  j["inputs"] = m.inputs;
  nlohmann::ordered_json outs = nlohmann::ordered_json::array();
  for (const OutputRecord& rec : m.outputs) {
    nlohmann::ordered_json o;
    o["path"] = rec.path;
    o["bytes"] = rec.bytes;
    o["crc32"] = rec.crc32;
    outs.push_back(std::move(o));
  }
  j["outputs"] = std::move(outs);
  j["duration_sec"] = m.duration_sec;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out.flush()) throw std::runtime_error("write failed: " + path.string());
}

} // namespace shapeprior
