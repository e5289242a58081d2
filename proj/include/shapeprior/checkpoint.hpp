#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shapeprior/mlp.hpp"

namespace shapeprior {

// "INRC1" checkpoint:
//   line 1: "INRC1"
//   line 2: one-line JSON header (version, d, hidden, layers, skip_index,
//           activations, ce_weight, lambda, seed, tensor table, param_count)
//   then:   param_count little-endian f32 values in tensor-table order
// Parameters are kept on the f32 grid in memory, so save -> load -> predict
// is bitwise identical to predicting before the save.
void save_checkpoint(const std::filesystem::path& path, const ShapePriorModel& m);
ShapePriorModel load_checkpoint(const std::filesystem::path& path);

// "LTAB1" latent table: line "LTAB1", u32 LE latent dimension, then records
// of (u32 LE id length, id bytes, d little-endian f32 values) until EOF.
struct LatentTable {
  int d = 0;
  std::vector<std::pair<std::string, std::vector<double>>> entries;

  const std::vector<double>& find(const std::string& subject_id) const;
};

void save_latents(const std::filesystem::path& path, const LatentTable& t);
// creates the file (with header) if missing; otherwise appends one record
void append_latent(const std::filesystem::path& path, int d,
                   const std::string& subject_id, std::span<const double> z);
LatentTable load_latents(const std::filesystem::path& path);

} // namespace shapeprior
