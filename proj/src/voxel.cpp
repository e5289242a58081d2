#include "shapeprior/voxel.hpp"

#include <cmath>
#include <stdexcept>

namespace shapeprior {

const char* group_name(Group g) {
  switch (g) {
    case Group::kYoung: return "young";
    case Group::kOldNonsarcopenic: return "old_nonsarcopenic";
    case Group::kSarcopenic: return "sarcopenic";
    case Group::kSyntheticNormal: return "synthetic_normal";
    case Group::kSyntheticAnomalous: return "synthetic_anomalous";
  }
  throw std::invalid_argument("group_name: bad enum value");
}

Group group_from_name(const std::string& name) {
  for (int g = 0; g <= 4; ++g)
    if (name == group_name(static_cast<Group>(g))) return static_cast<Group>(g);
  throw std::invalid_argument("unknown group label: " + name);
}

std::size_t VoxelGrid::occupied_count() const {
  std::size_t c = 0;
  for (const std::uint8_t b : occ) c += b;
  return c;
}

double normalize_coord(int i, int dim) {
  if (i < 0 || i >= dim) throw std::out_of_range("normalize_coord: index out of range");
  return -1.0 + (2.0 * i + 1.0) / dim;
}

Matrix normalized_coord_rows(const std::array<int, 3>& dims) {
  const auto [dx, dy, dz] = dims;
  Matrix m(dx * dy * dz, 3);
  std::size_t r = 0;
  for (int k = 0; k < dz; ++k) {
    const double cz = normalize_coord(k, dz);
    for (int j = 0; j < dy; ++j) {
      const double cy = normalize_coord(j, dy);
      for (int i = 0; i < dx; ++i, ++r) {
        m.v[r * 3 + 0] = normalize_coord(i, dx);
        m.v[r * 3 + 1] = cy;
        m.v[r * 3 + 2] = cz;
      }
    }
  }
  return m;
}

VoxelGrid binarize(const ProbGrid& p, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("binarize: threshold must be in (0,1)");
  VoxelGrid g;
  g.dims = p.dims;
  g.spacing_mm = p.spacing_mm;
  g.occ.resize(p.probs.size());
  for (std::size_t i = 0; i < p.probs.size(); ++i)
    g.occ[i] = p.probs[i] > threshold ? 1 : 0;
  return g;
}

double dice_score(const VoxelGrid& a, const VoxelGrid& b) {
  if (a.dims != b.dims) throw std::invalid_argument("dice_score: dims mismatch");
  std::size_t inter = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.occ.size(); ++i) {
    inter += a.occ[i] & b.occ[i];
    na += a.occ[i];
    nb += b.occ[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double volume_cm3(const VoxelGrid& g) {
  return static_cast<double>(g.occupied_count()) * g.spacing_mm[0] * g.spacing_mm[1] *
         g.spacing_mm[2] / 1000.0;
}

VolErr vol_err(const VoxelGrid& gt, const VoxelGrid& pred) {
  const double vg = volume_cm3(gt);
  const double vp = volume_cm3(pred);
  if (vg == 0.0)
    throw std::domain_error("vol_err: ground-truth volume is zero, percentage undefined");
  VolErr e;
  e.cm3 = std::abs(vg - vp);
  e.pct = 100.0 * e.cm3 / vg;
  return e;
}

} // namespace shapeprior
