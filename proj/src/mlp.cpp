#include "shapeprior/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "shapeprior/rng.hpp"

namespace shapeprior {

double snap_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void snap_f32(std::vector<double>& v) {
  for (double& x : v) x = snap_f32(x);
}

const TensorView& ShapePriorModel::tensor(std::string_view name) const {
  for (const TensorView& t : tensors)
    if (t.name == name) return t;
  throw std::invalid_argument("model: no tensor named " + std::string(name));
}

Matrix ShapePriorModel::tensor_matrix(const TensorView& t) const {
  Matrix m(t.rows, t.cols);
  for (std::size_t i = 0; i < t.size(); ++i) m.v[i] = params[t.offset + i];
  return m;
}

namespace {

void add_tensor(ShapePriorModel& m, const std::string& name, int rows, int cols) {
  TensorView t;
  t.name = name;
  t.offset = m.params.size();
  t.rows = rows;
  t.cols = cols;
  m.params.resize(t.offset + t.size(), 0.0);
  m.tensors.push_back(std::move(t));
}

int layer_input_width(const ShapePriorModel& m, int layer) { // 2-based
  int w = m.hidden;
  if (m.skip_index != 0 && layer == m.skip_index + 1) w += 3;
  return w;
}

} // namespace

ShapePriorModel model_init_custom(int d, int hidden, int layers, int skip_index,
                                  std::uint64_t seed) {
  if (d < 1 || hidden < 1) throw std::invalid_argument("model_init: d, hidden >= 1");
  if (layers < 2) throw std::invalid_argument("model_init: at least 2 layers");
  if (skip_index < 0 || skip_index >= layers)
    throw std::invalid_argument("model_init: skip_index out of range");

  ShapePriorModel m;
  m.d = d;
  m.hidden = hidden;
  m.layers = layers;
  m.skip_index = skip_index;
  m.seed = seed;

  add_tensor(m, "w1_coord", 3, hidden);
  add_tensor(m, "w1_latent", d, hidden);
  add_tensor(m, "b1", 1, hidden);
  for (int l = 2; l <= layers; ++l) {
    const int in = layer_input_width(m, l);
    const int out = l == layers ? 1 : hidden;
    add_tensor(m, "w" + std::to_string(l), in, out);
    add_tensor(m, "b" + std::to_string(l), 1, out);
  }

  // fan-in-scaled normal init; layer-1 fan-in counts both parts (3 + d).
  // Draw order is tensor order, row-major, pinned by the seeded generator.
  Rng rng(mix_seed(seed, 0x1A17));
  for (const TensorView& t : m.tensors) {
    if (t.name[0] == 'b') continue; // biases start at zero
    int fan_in = t.rows;
    if (t.name == "w1_coord" || t.name == "w1_latent") fan_in = 3 + d;
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < t.size(); ++i)
      m.params[t.offset + i] = rng.normal(0.0, std);
  }
  snap_f32(m.params);
  return m;
}

ShapePriorModel model_init(int d, int hidden, std::uint64_t seed) {
  return model_init_custom(d, hidden, 8, 4, seed);
}

ForwardNodes build_forward(autodiff::Tape& tape, const ShapePriorModel& model,
                           const std::vector<double>& z, const Matrix& coords,
                           bool theta_grad, bool z_grad) {
  if (static_cast<int>(z.size()) != model.d)
    throw std::invalid_argument("build_forward: latent dimension mismatch");
  for (const double v : z)
    if (!std::isfinite(v)) throw std::invalid_argument("build_forward: non-finite latent");
  if (coords.rows < 1 || coords.cols != 3)
    throw std::invalid_argument("build_forward: coords must be a nonempty [M,3] batch");

  ForwardNodes out;
  out.theta.reserve(model.tensors.size());
  for (const TensorView& t : model.tensors)
    out.theta.push_back(tape.leaf(model.tensor_matrix(t), theta_grad));

  Matrix zrow(1, model.d);
  for (int i = 0; i < model.d; ++i) zrow.v[i] = z[i];
  out.z = tape.leaf(std::move(zrow), z_grad);

  const int coords_node = tape.constant(coords);

  auto theta_node = [&](std::string_view name) {
    for (std::size_t i = 0; i < model.tensors.size(); ++i)
      if (model.tensors[i].name == name) return out.theta[i];
    throw std::logic_error("build_forward: missing tensor");
  };

  // h1 = relu(coords*Wc + row_broadcast(z*Wz + b1))
  const int cw = tape.matmul(coords_node, theta_node("w1_coord"));
  const int zw = tape.matmul(out.z, theta_node("w1_latent"));
  const int zb = tape.add(zw, theta_node("b1"));
  int h = tape.relu(tape.add_row_broadcast(cw, zb));

  for (int l = 2; l <= model.layers; ++l) {
    if (model.skip_index != 0 && l == model.skip_index + 1)
      h = tape.concat_cols(h, coords_node);
    const int lin = tape.add_row_broadcast(
        tape.matmul(h, theta_node("w" + std::to_string(l))),
        theta_node("b" + std::to_string(l)));
    h = l == model.layers ? lin : tape.relu(lin);
  }

  out.logits = h;
  out.probs = tape.sigmoid(h);
  return out;
}

std::vector<double> predict_occupancy(const ShapePriorModel& model,
                                      const std::vector<double>& z,
                                      const Matrix& coords) {
  constexpr int kChunk = 8192;
  std::vector<double> probs(coords.rows);
  for (int r0 = 0; r0 < coords.rows; r0 += kChunk) {
    const int r1 = std::min(coords.rows, r0 + kChunk);
    Matrix part(r1 - r0, 3);
    for (std::size_t i = 0; i < part.size(); ++i)
      part.v[i] = coords.v[static_cast<std::size_t>(r0) * 3 + i];
    autodiff::Tape tape;
    const ForwardNodes f = build_forward(tape, model, z, part, false, false);
    const Matrix& p = tape.value(f.probs);
    for (int r = r0; r < r1; ++r) probs[r] = p.v[r - r0];
  }
  return probs;
}

ProbGrid reconstruct(const ShapePriorModel& model, const std::vector<double>& z,
                     const std::array<int, 3>& dims,
                     const std::array<double, 3>& spacing_mm) {
  for (const int d : dims)
    if (d < 1) throw std::invalid_argument("reconstruct: dims must be >= 1");
  ProbGrid p;
  p.dims = dims;
  p.spacing_mm = spacing_mm;
  p.probs = predict_occupancy(model, z, normalized_coord_rows(dims));
  return p;
}

} // namespace shapeprior
