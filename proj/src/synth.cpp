#include "shapeprior/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "shapeprior/rng.hpp"
#include "shapeprior/voxl_io.hpp"

namespace shapeprior {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Notch {
  double t0 = 0.0, phi0 = 0.0, st = 0.2, sphi = 0.5, depth = 0.3;
};

struct ShapeParams {
  double rx = 0.4, ry = 0.28, zl = 0.84;
  double taper = 0.3;
  double nexp = 2.5;
  double bx = 0.08, phx = 0.0, by = 0.08, phy = 0.0;
  double alpha = 0.0;
  double ox = 0.0, oy = 0.0, oz = 0.0;

  double squash_a = 0.0, squash_psi = 0.0;

  bool rough = false;
  double rough_amp = 0.0;
  int wave_lo = 0;
  std::vector<double> wave_c;
  std::vector<double> wave_psi;
  std::vector<Notch> notches;
  double radial_scale = 1.0;
};

ShapeParams draw_base_params(const PopulationSpec& spec, Rng& rng, bool cohort_b) {
  ShapeParams p;
  p.rx = rng.uniform(spec.r_major_min, spec.r_major_max);
  p.ry = rng.uniform(spec.r_minor_min, spec.r_minor_max);
  p.zl = rng.uniform(0.78, 0.90);
  p.taper = rng.uniform(spec.taper_min, spec.taper_max);
  p.nexp = rng.uniform(spec.superell_n_min, spec.superell_n_max);
  p.bx = rng.uniform(spec.bend_min, spec.bend_max);
  p.phx = rng.uniform(0.0, kTwoPi);
  p.by = rng.uniform(spec.bend_min, spec.bend_max);
  p.phy = rng.uniform(0.0, kTwoPi);
  p.alpha = rng.uniform(0.0, std::numbers::pi);
  p.ox = rng.uniform(-0.08, 0.08);
  p.oy = rng.uniform(-0.08, 0.08);
  p.oz = rng.uniform(-0.05, 0.05);
  if (cohort_b) {
    p.rx += 0.03;
    p.ry += 0.02;
    p.taper = std::max(0.12, p.taper - 0.10);
    p.nexp += 0.45;
    p.bx *= 0.6;
    p.by *= 0.6;
  }
  return p;
}

void draw_scan_squash(const PopulationSpec& spec, std::uint64_t subject_seed,
                      int scan_index, ShapeParams& p) {
  Rng rng(mix_seed(subject_seed, 0x5CA0u + static_cast<std::uint64_t>(scan_index)));
  p.squash_a = rng.uniform(0.0, spec.squash_amp);
  p.squash_psi = rng.uniform(0.0, std::numbers::pi);
}

void draw_anomaly_params(const PopulationSpec& spec, std::uint64_t subject_seed,
                         ShapeParams& p) {
  Rng rng(mix_seed(subject_seed, 0xA40));
  p.rough = true;
  p.rough_amp = rng.uniform(spec.rough_amp_min, spec.rough_amp_max);
  p.wave_lo = spec.rough_waves_min;
  double csum = 0.0;
  for (int j = spec.rough_waves_min; j <= spec.rough_waves_max; ++j) {
    p.wave_c.push_back(rng.uniform(0.4, 1.0));
    p.wave_psi.push_back(rng.uniform(0.0, kTwoPi));
    csum += p.wave_c.back();
  }
  for (double& c : p.wave_c) c /= csum;
  int n_notch = rng.uniform_int(spec.notch_min, spec.notch_max);
  for (int i = 0; i < n_notch; ++i) {
    Notch nt;
    nt.t0 = rng.uniform(-0.55, 0.55);
    nt.phi0 = rng.uniform(0.0, kTwoPi);
    nt.st = rng.uniform(0.14, 0.26);
    nt.sphi = rng.uniform(0.38, 0.65);
    nt.depth = rng.uniform(spec.notch_depth_min, spec.notch_depth_max);
    p.notches.push_back(nt);
  }
}

double boundary_multiplier(const ShapeParams& p, double phi, double t) {
  double mult = 1.0;
  const double envelope = 1.0 - t * t;
  double wave = 0.0;
  for (std::size_t w = 0; w < p.wave_c.size(); ++w) {
    const double j = static_cast<double>(p.wave_lo + static_cast<int>(w));
    wave += p.wave_c[w] * std::cos(j * phi + p.wave_psi[w]);
  }
  mult += p.rough_amp * envelope * wave;
  for (const Notch& nt : p.notches) {
    double dphi = std::fmod(phi - nt.phi0, kTwoPi);
    if (dphi > std::numbers::pi) dphi -= kTwoPi;
    if (dphi < -std::numbers::pi) dphi += kTwoPi;
    const double dt = t - nt.t0;
    const double e = dphi * dphi / (2.0 * nt.sphi * nt.sphi) +
                     dt * dt / (2.0 * nt.st * nt.st);
    mult *= 1.0 - nt.depth * std::exp(-e);
  }
  return std::clamp(mult, 0.30, 1.70);
}

VoxelGrid rasterize(const PopulationSpec& spec, const ShapeParams& p) {
  VoxelGrid g;
  g.dims = {spec.grid, spec.grid, spec.grid};
  g.spacing_mm = {spec.spacing_mm, spec.spacing_mm, spec.spacing_mm};
  g.occ.assign(g.voxel_count(), 0);

  const double cpsi = std::cos(p.squash_psi);
  const double spsi = std::sin(p.squash_psi);
  const double fu = 1.0 + p.squash_a;
  const double fw = 1.0 / (1.0 + 0.6 * p.squash_a);
  const double calpha = std::cos(p.alpha);
  const double salpha = std::sin(p.alpha);
  const int D = spec.grid;

  std::size_t idx = 0;
  for (int k = 0; k < D; ++k) {
    const double cz = normalize_coord(k, D);
    for (int j = 0; j < D; ++j) {
      const double cy = normalize_coord(j, D);
      for (int i = 0; i < D; ++i, ++idx) {
        const double cx = normalize_coord(i, D);

        // undo the per-scan squash in the xy plane
        double qx = cx - p.ox;
        double qy = cy - p.oy;
        const double u = (qx * cpsi + qy * spsi) / fu;
        const double w = (-qx * spsi + qy * cpsi) / fw;
        qx = u * cpsi - w * spsi;
        qy = u * spsi + w * cpsi;

        const double t = (cz - p.oz) / p.zl;
        if (std::abs(t) >= 0.999) continue;

        const double vx0 = qx - p.bx * std::sin(0.5 * std::numbers::pi * t + p.phx);
        const double vy0 = qy - p.by * std::sin(0.5 * std::numbers::pi * t + p.phy);
        const double vx = vx0 * calpha + vy0 * salpha;
        const double vy = -vx0 * salpha + vy0 * calpha;

        const double prof = std::pow(std::max(1.0 - t * t, 0.0), p.taper);
        double mult = 1.0;
        if (p.rough) mult = boundary_multiplier(p, std::atan2(vy, vx), t);
        const double rx = p.rx * prof * mult * p.radial_scale;
        const double ry = p.ry * prof * mult * p.radial_scale;
        if (rx <= 0.0 || ry <= 0.0) continue;

        const double s = std::pow(std::abs(vx / rx), p.nexp) +
                         std::pow(std::abs(vy / ry), p.nexp);
        if (s <= 1.0) g.occ[idx] = 1;
      }
    }
  }
  return g;
}

// keeps the largest 6-connected occupied component, zeroes the rest
std::size_t keep_largest_component(VoxelGrid& g) {
  const int dx = g.dims[0], dy = g.dims[1], dz = g.dims[2];
  const std::size_t n = g.occ.size();
  std::vector<std::int32_t> label(n, -1);
  std::vector<std::size_t> stack;
  std::int32_t next = 0;
  std::size_t best_size = 0;
  std::int32_t best_label = -1;

  for (std::size_t s = 0; s < n; ++s) {
    if (g.occ[s] == 0 || label[s] >= 0) continue;
    std::size_t size = 0;
    stack.push_back(s);
    label[s] = next;
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      ++size;
      const int i = static_cast<int>(cur % dx);
      const int j = static_cast<int>((cur / dx) % dy);
      const int k = static_cast<int>(cur / (static_cast<std::size_t>(dx) * dy));
      const int ni[6] = {i - 1, i + 1, i, i, i, i};
      const int nj[6] = {j, j, j - 1, j + 1, j, j};
      const int nk[6] = {k, k, k, k, k - 1, k + 1};
      for (int q = 0; q < 6; ++q) {
        if (ni[q] < 0 || ni[q] >= dx || nj[q] < 0 || nj[q] >= dy ||
            nk[q] < 0 || nk[q] >= dz)
          continue;
        const std::size_t ns = g.index(ni[q], nj[q], nk[q]);
        if (g.occ[ns] != 0 && label[ns] < 0) {
          label[ns] = next;
          stack.push_back(ns);
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_label = next;
    }
    ++next;
  }

  for (std::size_t s = 0; s < n; ++s)
    if (g.occ[s] != 0 && label[s] != best_label) g.occ[s] = 0;
  return best_size;
}

double occupancy_fraction(const VoxelGrid& g) {
  return static_cast<double>(g.occupied_count()) /
         static_cast<double>(g.voxel_count());
}

ShapeParams accepted_base_params(const PopulationSpec& spec,
                                 std::uint64_t subject_seed, bool cohort_b) {
  for (int attempt = 0; attempt < 16; ++attempt) {
    Rng rng(mix_seed(subject_seed,
                     0xA17Au + 0x101u * static_cast<std::uint64_t>(attempt)));
    ShapeParams p = draw_base_params(spec, rng, cohort_b);
    draw_scan_squash(spec, subject_seed, 0, p);
    VoxelGrid g = rasterize(spec, p);
    keep_largest_component(g);
    const double f = occupancy_fraction(g);
    if (f >= 0.03 && f <= 0.40) {
      p.squash_a = 0.0;
      p.squash_psi = 0.0;
      return p;
    }
  }
  throw std::runtime_error("synth: no admissible shape after 16 attempts (seed " +
                           std::to_string(subject_seed) + ")");
}

VoxelGrid finalize(const PopulationSpec& spec, VoxelGrid g) {
  keep_largest_component(g);
  const double f = occupancy_fraction(g);
  if (f < 0.03 || f > 0.40)
    throw std::runtime_error("synth: occupancy fraction " + std::to_string(f) +
                             " out of [0.03, 0.40]");
  (void)spec;
  return g;
}

} // namespace

void validate_spec(const PopulationSpec& spec) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("population spec: ") + what);
  };
  require(spec.n_normal >= 1, "n_normal must be >= 1");
  require(spec.n_anomalous >= 0, "n_anomalous must be >= 0");
  require(spec.scans_per_subject >= 1, "scans_per_subject must be >= 1");
  require(spec.grid >= 8 && spec.grid <= 256, "grid must be in [8, 256]");
  require(spec.spacing_mm > 0.0, "spacing_mm must be positive");
  require(spec.r_major_min > 0.0 && spec.r_major_min <= spec.r_major_max &&
              spec.r_major_max < 0.6,
          "r_major range invalid");
  require(spec.r_minor_min > 0.0 && spec.r_minor_min <= spec.r_minor_max &&
              spec.r_minor_max < 0.6,
          "r_minor range invalid");
  require(spec.taper_min > 0.0 && spec.taper_min <= spec.taper_max,
          "taper range invalid");
  require(spec.bend_min >= 0.0 && spec.bend_min <= spec.bend_max &&
              spec.bend_max <= 0.25,
          "bend range invalid");
  require(spec.superell_n_min >= 1.5 && spec.superell_n_min <= spec.superell_n_max,
          "superellipse exponent range invalid");
  require(spec.squash_amp >= 0.0 && spec.squash_amp <= 0.2, "squash_amp invalid");
  require(spec.rough_amp_min >= 0.0 && spec.rough_amp_min <= spec.rough_amp_max &&
              spec.rough_amp_max <= 0.5,
          "rough_amp range invalid");
  require(spec.rough_waves_min >= 2 && spec.rough_waves_min <= spec.rough_waves_max &&
              spec.rough_waves_max <= 24,
          "rough_waves range invalid");
  require(spec.notch_min >= 0 && spec.notch_min <= spec.notch_max &&
              spec.notch_max <= 8,
          "notch count range invalid");
  require(spec.notch_depth_min >= 0.0 && spec.notch_depth_min <= spec.notch_depth_max &&
              spec.notch_depth_max <= 0.6,
          "notch depth range invalid");
}

VoxelGrid gen_normal_shape(const PopulationSpec& spec, std::uint64_t subject_seed,
                           int scan_index, bool cohort_b) {
  validate_spec(spec);
  if (scan_index < 0 || scan_index >= spec.scans_per_subject)
    throw std::out_of_range("scan_index out of range");
  ShapeParams p = accepted_base_params(spec, subject_seed, cohort_b);
  draw_scan_squash(spec, subject_seed, scan_index, p);
  return finalize(spec, rasterize(spec, p));
}

VoxelGrid gen_anomalous_shape(const PopulationSpec& spec, std::uint64_t subject_seed,
                              int scan_index, bool cohort_b) {
  validate_spec(spec);
  if (scan_index < 0 || scan_index >= spec.scans_per_subject)
    throw std::out_of_range("scan_index out of range");
  ShapeParams base = accepted_base_params(spec, subject_seed, cohort_b);
  draw_scan_squash(spec, subject_seed, scan_index, base);

  VoxelGrid base_grid = rasterize(spec, base);
  keep_largest_component(base_grid);
  const double base_count = static_cast<double>(base_grid.occupied_count());
  if (base_count == 0.0) throw std::runtime_error("synth: empty anomaly base");

  ShapeParams anom = base;
  draw_anomaly_params(spec, subject_seed, anom);

  // radial rescale keeps the anomalous volume within a few percent of the
  // matched base; cross-section area scales with the square of the radii
  VoxelGrid out;
  for (int iter = 0; iter < 8; ++iter) {
    out = rasterize(spec, anom);
    keep_largest_component(out);
    const double ratio = static_cast<double>(out.occupied_count()) / base_count;
    if (ratio > 0.0 && std::abs(ratio - 1.0) <= 0.04) break;
    if (ratio <= 0.0)
      anom.radial_scale *= 1.15;
    else
      anom.radial_scale /= std::sqrt(ratio);
  }
  return finalize(spec, std::move(out));
}

double surface_area_mm2(const VoxelGrid& g) {
  const int dx = g.dims[0], dy = g.dims[1], dz = g.dims[2];
  const double ax = g.spacing_mm[1] * g.spacing_mm[2];
  const double ay = g.spacing_mm[0] * g.spacing_mm[2];
  const double az = g.spacing_mm[0] * g.spacing_mm[1];
  auto at = [&](int i, int j, int k) -> bool {
    if (i < 0 || i >= dx || j < 0 || j >= dy || k < 0 || k >= dz) return false;
    return g.occ[g.index(i, j, k)] != 0;
  };
  double area = 0.0;
  for (int k = 0; k < dz; ++k)
    for (int j = 0; j < dy; ++j)
      for (int i = 0; i < dx; ++i) {
        if (!at(i, j, k)) continue;
        if (!at(i - 1, j, k)) area += ax;
        if (!at(i + 1, j, k)) area += ax;
        if (!at(i, j - 1, k)) area += ay;
        if (!at(i, j + 1, k)) area += ay;
        if (!at(i, j, k - 1)) area += az;
        if (!at(i, j, k + 1)) area += az;
      }
  return area;
}

int component_count(const VoxelGrid& g) {
  const int dx = g.dims[0], dy = g.dims[1], dz = g.dims[2];
  const std::size_t n = g.occ.size();
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack;
  int count = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (g.occ[s] == 0 || seen[s]) continue;
    ++count;
    seen[s] = true;
    stack.push_back(s);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(cur % dx);
      const int j = static_cast<int>((cur / dx) % dy);
      const int k = static_cast<int>(cur / (static_cast<std::size_t>(dx) * dy));
      const int ni[6] = {i - 1, i + 1, i, i, i, i};
      const int nj[6] = {j, j, j - 1, j + 1, j, j};
      const int nk[6] = {k, k, k, k, k - 1, k + 1};
      for (int q = 0; q < 6; ++q) {
        if (ni[q] < 0 || ni[q] >= dx || nj[q] < 0 || nj[q] >= dy ||
            nk[q] < 0 || nk[q] >= dz)
          continue;
        const std::size_t ns = static_cast<std::size_t>(ni[q]) +
                               static_cast<std::size_t>(dx) *
                                   (static_cast<std::size_t>(nj[q]) +
                                    static_cast<std::size_t>(dy) * nk[q]);
        if (g.occ[ns] != 0 && !seen[ns]) {
          seen[ns] = true;
          stack.push_back(ns);
        }
      }
    }
  }
  return count;
}

FoldPlan make_folds(const std::vector<SubjectEntry>& subjects, int k,
                    std::uint64_t seed) {
  std::vector<std::string> normals;
  std::vector<std::string> anoms;
  for (const SubjectEntry& s : subjects) {
    if (s.anomalous)
      anoms.push_back(s.subject_id);
    else
      normals.push_back(s.subject_id);
  }
  if (k < 2) throw std::invalid_argument("make_folds: k must be >= 2");
  if (static_cast<int>(normals.size()) < k)
    throw std::invalid_argument("make_folds: fewer normal subjects than folds");

  std::vector<std::string> shuffled = normals;
  Rng rng(mix_seed(seed, 0xF));
  rng.shuffle(shuffled);
  std::sort(anoms.begin(), anoms.end());

  FoldPlan plan;
  plan.k = k;
  const int n = static_cast<int>(shuffled.size());
  const int base = n / k;
  const int extra = n % k;
  int offset = 0;
  for (int f = 0; f < k; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    std::vector<std::string> test(shuffled.begin() + offset,
                                  shuffled.begin() + offset + size);
    offset += size;
    std::sort(test.begin(), test.end());
    std::vector<std::string> train;
    for (const std::string& id : normals)
      if (std::find(test.begin(), test.end(), id) == test.end())
        train.push_back(id);
    std::sort(train.begin(), train.end());
    std::vector<std::string> test_all = test;
    test_all.insert(test_all.end(), anoms.begin(), anoms.end());
    plan.train_subjects.push_back(std::move(train));
    plan.test_subjects.push_back(std::move(test_all));
  }
  return plan;
}

std::vector<PopulationFile> generate_population(const PopulationSpec& spec,
                                                const std::filesystem::path& out_dir) {
  validate_spec(spec);
  std::filesystem::create_directories(out_dir);

  std::vector<PopulationFile> rows;
  char idbuf[32];
  int count_a = 0, count_b = 0;

  auto emit = [&](const std::string& id, Group group, std::uint64_t subject_seed,
                  bool cohort_b, bool anomalous) {
    for (int scan = 0; scan < spec.scans_per_subject; ++scan) {
      VoxelGrid g = anomalous
                        ? gen_anomalous_shape(spec, subject_seed, scan, cohort_b)
                        : gen_normal_shape(spec, subject_seed, scan, cohort_b);
      g.group = group;
      g.subject_id = id + "_s" + std::to_string(scan);
      const std::string fname = g.subject_id + ".voxl";
      write_voxl(out_dir / fname, g);
      PopulationFile row;
      row.subject_id = id;
      row.scan_index = scan;
      row.group = group;
      row.path = fname;
      row.volume_cm3 = volume_cm3(g);
      rows.push_back(std::move(row));
    }
  };

  for (int i = 0; i < spec.n_normal; ++i) {
    const bool cohort_b = (i % 2) == 1;
    if (cohort_b)
      std::snprintf(idbuf, sizeof idbuf, "nb%02d", ++count_b);
    else
      std::snprintf(idbuf, sizeof idbuf, "na%02d", ++count_a);
    emit(idbuf, Group::kSyntheticNormal,
         mix_seed(spec.seed, 0x5B0000u + static_cast<std::uint64_t>(i)),
         cohort_b, false);
  }
  for (int j = 0; j < spec.n_anomalous; ++j) {
    std::snprintf(idbuf, sizeof idbuf, "ax%02d", j + 1);
    emit(idbuf, Group::kSyntheticAnomalous,
         mix_seed(spec.seed, 0x5B0000u + 1000u + static_cast<std::uint64_t>(j)),
         (j % 2) == 1, true);
  }

  write_manifest_csv(out_dir / "manifest.csv", rows);
  return rows;
}

void write_manifest_csv(const std::filesystem::path& csv_path,
                        const std::vector<PopulationFile>& rows) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + csv_path.string());
  out << "subject_id,scan_index,group,path,volume_cm3\n";
  char buf[64];
  for (const PopulationFile& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", r.volume_cm3);
    out << r.subject_id << ',' << r.scan_index << ',' << group_name(r.group)
        << ',' << r.path << ',' << buf << '\n';
  }
  if (!out.flush()) throw std::runtime_error("write failed: " + csv_path.string());
}

std::vector<PopulationFile> load_manifest_csv(const std::filesystem::path& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + csv_path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty manifest: " + csv_path.string());
  if (line != "subject_id,scan_index,group,path,volume_cm3")
    throw std::runtime_error("bad manifest header: " + csv_path.string());
  std::vector<PopulationFile> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      std::stringstream ss(line);
      std::string field;
      PopulationFile r;
      if (!std::getline(ss, r.subject_id, ',')) continue;
      if (!std::getline(ss, field, ','))
        throw std::invalid_argument("missing scan_index");
      r.scan_index = std::stoi(field);
      if (!std::getline(ss, field, ','))
        throw std::invalid_argument("missing group");
      r.group = group_from_name(field);
      if (!std::getline(ss, r.path, ','))
        throw std::invalid_argument("missing path");
      if (!std::getline(ss, field)) throw std::invalid_argument("missing volume");
      r.volume_cm3 = std::stod(field);
      rows.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw std::runtime_error("bad manifest row: " + line + " (" + e.what() + ")");
    }
  }
  return rows;
}

} // namespace shapeprior
