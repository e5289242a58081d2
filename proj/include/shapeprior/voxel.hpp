#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "shapeprior/matrix.hpp"

namespace shapeprior {

enum class Group : std::uint8_t {
  kYoung = 0,
  kOldNonsarcopenic = 1,
  kSarcopenic = 2,
  kSyntheticNormal = 3,
  kSyntheticAnomalous = 4,
};

const char* group_name(Group g);
Group group_from_name(const std::string& name);

// Binary occupancy volume. Linear index is x-fastest: i + Dx*(j + Dy*k).
struct VoxelGrid {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  std::vector<std::uint8_t> occ; // 0/1 per voxel
  std::string subject_id;
  Group group = Group::kSyntheticNormal;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * k);
  }
  std::size_t occupied_count() const;
};

struct ProbGrid {
  std::array<int, 3> dims{0, 0, 0};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  std::vector<double> probs; // in [0,1], x-fastest

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
};

// voxel-center convention: c = -1 + (2*i + 1)/D, so centers are symmetric
// about 0 and strictly inside [-1, 1]
double normalize_coord(int i, int dim);

// one row (cx, cy, cz) per voxel in x-fastest linear order
Matrix normalized_coord_rows(const std::array<int, 3>& dims);

// occupied iff prob > threshold (strict)
VoxelGrid binarize(const ProbGrid& p, double threshold = 0.5);

// 2|A&B| / (|A|+|B|); both empty -> 1.0
double dice_score(const VoxelGrid& a, const VoxelGrid& b);

double volume_cm3(const VoxelGrid& g);

struct VolErr {
  double cm3 = 0.0;
  double pct = 0.0;
};
// throws when the ground-truth volume is zero (percentage undefined)
VolErr vol_err(const VoxelGrid& gt, const VoxelGrid& pred);

} // namespace shapeprior
