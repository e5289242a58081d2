#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "shapeprior/matrix.hpp"
#include "shapeprior/tape.hpp"
#include "shapeprior/voxel.hpp"

namespace shapeprior {

struct TensorView {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Conditional occupancy network f(coords, z) -> probability. Hidden layers are
// ReLU, the output is a single sigmoid unit; the configured skip layer's
// output is concatenated with the raw 3D coordinates before the next layer.
// Layer 1 consumes (coords | z); its weight is stored split into a coordinate
// part and a latent part so the per-voxel matmul never materializes a
// row-repeated z. Parameters live in one flat array, always snapped to
// f32-representable values, and are addressed through `tensors`.
struct ShapePriorModel {
  int d = 128;
  int hidden = 512;
  int layers = 8;
  int skip_index = 4; // output of this layer gets coords appended; 0 = no skip
  double ce_weight = 1.0;
  double lambda = 1e-4;
  std::uint64_t seed = 0;

  std::vector<TensorView> tensors;
  std::vector<double> params;

  const TensorView& tensor(std::string_view name) const;
  Matrix tensor_matrix(const TensorView& t) const;
  std::size_t param_count() const { return params.size(); }
};

// round-to-nearest f32 grid, kept in f64 storage
double snap_f32(double v);
void snap_f32(std::vector<double>& v);

ShapePriorModel model_init(int d, int hidden, std::uint64_t seed);
// layers >= 2; skip_index in [0, layers-1], 0 disables the skip
ShapePriorModel model_init_custom(int d, int hidden, int layers, int skip_index,
                                  std::uint64_t seed);

struct ForwardNodes {
  autodiff::Tape::NodeId logits = -1; // [M,1]
  autodiff::Tape::NodeId probs = -1;  // [M,1], sigmoid(logits)
  autodiff::Tape::NodeId z = -1;      // [1,d] leaf
  std::vector<autodiff::Tape::NodeId> theta; // aligned with model.tensors
};

ForwardNodes build_forward(autodiff::Tape& tape, const ShapePriorModel& model,
                           const std::vector<double>& z, const Matrix& coords,
                           bool theta_grad, bool z_grad);

// pure chunked evaluation; one probability in (0,1) per coordinate row
std::vector<double> predict_occupancy(const ShapePriorModel& model,
                                      const std::vector<double>& z,
                                      const Matrix& coords);

// evaluate at every voxel center of a grid
ProbGrid reconstruct(const ShapePriorModel& model, const std::vector<double>& z,
                     const std::array<int, 3>& dims,
                     const std::array<double, 3>& spacing_mm);

} // namespace shapeprior
