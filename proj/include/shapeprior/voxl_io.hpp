#pragma once

#include <filesystem>
#include <string>

#include "shapeprior/voxel.hpp"

namespace shapeprior {

// "VOXL1" volume container:
//   magic "VOXL", version u8=1, kind u8 (0=binary, 1=prob32),
//   dims 3 x u32 LE, spacing 3 x f32 LE (mm), group u8,
//   subject_id u32 LE byte length + UTF-8 bytes,
//   payload x-fastest (binary: one 0/1 byte per voxel; prob32: f32 LE per voxel)

void write_voxl(const std::filesystem::path& path, const VoxelGrid& g);
void write_voxl(const std::filesystem::path& path, const ProbGrid& p,
                const std::string& subject_id, Group group);

enum class VoxlKind : std::uint8_t { kBinary = 0, kProb32 = 1 };
VoxlKind peek_voxl_kind(const std::filesystem::path& path);

VoxelGrid read_voxl_binary(const std::filesystem::path& path);

struct ProbVolume {
  ProbGrid grid;
  std::string subject_id;
  Group group = Group::kSyntheticNormal;
};
ProbVolume read_voxl_prob(const std::filesystem::path& path);

} // namespace shapeprior
