#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shapeprior/voxel.hpp"

namespace shapeprior {

// Procedural muscle-like population. Normal shapes are smooth elongated
// superellipsoid solids (tapered along z, low-frequency bend, per-scan affine
// squash standing in for probe compression). Anomalous shapes reuse a matched
// normal base and add band-limited angular boundary roughness plus 1-3
// notches, rebalanced so their volume stays within a few percent of the base:
// volume alone must not separate the populations.
//
// Normal subjects split into two parameter cohorts ("na.." / "nb..") so the
// latent space has labeled normal subgroups to fit a discriminant on.
struct PopulationSpec {
  int n_normal = 25;
  int n_anomalous = 5;
  int scans_per_subject = 3;
  int grid = 48;
  double spacing_mm = 2.0;

  // normal shape family (normalized [-1,1] units)
  double r_major_min = 0.36, r_major_max = 0.46;
  double r_minor_min = 0.24, r_minor_max = 0.32;
  double taper_min = 0.20, taper_max = 0.45;
  double bend_min = 0.02, bend_max = 0.16;
  double superell_n_min = 2.2, superell_n_max = 3.2;
  double squash_amp = 0.06;

  // anomaly family
  double rough_amp_min = 0.12, rough_amp_max = 0.22;
  int rough_waves_min = 5, rough_waves_max = 9;
  int notch_min = 1, notch_max = 3;
  double notch_depth_min = 0.25, notch_depth_max = 0.45;

  std::uint64_t seed = 0;
};

void validate_spec(const PopulationSpec& spec);

// deterministic under (spec, subject_seed, scan_index); single 6-connected
// component with occupancy fraction in [0.03, 0.4]. cohort_b flips the
// subject into the second normal-parameter cohort.
VoxelGrid gen_normal_shape(const PopulationSpec& spec, std::uint64_t subject_seed,
                           int scan_index, bool cohort_b = false);
VoxelGrid gen_anomalous_shape(const PopulationSpec& spec, std::uint64_t subject_seed,
                              int scan_index, bool cohort_b = false);

// voxel-face surface area (exposed faces), in mm^2; oracle-friendly
double surface_area_mm2(const VoxelGrid& g);

// largest 6-connected occupied component count (diagnostics/tests)
int component_count(const VoxelGrid& g);

struct SubjectEntry {
  std::string subject_id;
  bool anomalous = false;
};

struct FoldPlan {
  int k = 0;
  std::vector<std::vector<std::string>> train_subjects; // normals only
  std::vector<std::vector<std::string>> test_subjects;  // fold normals + all anomalous
};

// seeded shuffle of the normal subjects, contiguous near-equal partition;
// anomalous subjects are test-only in every fold
FoldPlan make_folds(const std::vector<SubjectEntry>& subjects, int k,
                    std::uint64_t seed);

struct PopulationFile {
  std::string subject_id; // without scan suffix
  int scan_index = 0;
  Group group = Group::kSyntheticNormal;
  std::string path; // relative to the population directory
  double volume_cm3 = 0.0;
};

// writes <id>_s<scan>.voxl files plus manifest.csv into out_dir
std::vector<PopulationFile> generate_population(const PopulationSpec& spec,
                                                const std::filesystem::path& out_dir);

std::vector<PopulationFile> load_manifest_csv(const std::filesystem::path& csv_path);
void write_manifest_csv(const std::filesystem::path& csv_path,
                        const std::vector<PopulationFile>& rows);

} // namespace shapeprior
