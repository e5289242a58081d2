#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <vector>

#include "shapeprior/checkpoint.hpp"
#include "shapeprior/loss.hpp"
#include "shapeprior/mlp.hpp"
#include "shapeprior/rng.hpp"
#include "shapeprior/voxel.hpp"

using namespace shapeprior;

namespace {

std::vector<double> random_latent(int d, Rng& rng, double scale = 0.3) {
  std::vector<double> z(static_cast<std::size_t>(d));
  for (double& v : z) v = snap_f32(rng.uniform(-scale, scale));
  return z;
}

VoxelGrid sphere_grid(int dim, double radius) {
  VoxelGrid g;
  g.dims = {dim, dim, dim};
  g.spacing_mm = {1.0, 1.0, 1.0};
  g.occ.assign(g.voxel_count(), 0);
  std::size_t idx = 0;
  for (int k = 0; k < dim; ++k)
    for (int j = 0; j < dim; ++j)
      for (int i = 0; i < dim; ++i, ++idx) {
        const double x = normalize_coord(i, dim);
        const double y = normalize_coord(j, dim);
        const double z = normalize_coord(k, dim);
        g.occ[idx] = (x * x + y * y + z * z <= radius * radius) ? 1 : 0;
      }
  return g;
}

std::filesystem::path temp_file(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / "shapeprior_mlp_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

} // namespace

TEST_CASE("initialization is deterministic and shaped to the architecture") {
  const ShapePriorModel a = model_init(128, 512, 7);
  const ShapePriorModel b = model_init(128, 512, 7);
  REQUIRE(a.params.size() == b.params.size());
  CHECK(std::memcmp(a.params.data(), b.params.data(),
                    a.params.size() * sizeof(double)) == 0);
  const ShapePriorModel c = model_init(128, 512, 8);
  CHECK(std::memcmp(a.params.data(), c.params.data(),
                    a.params.size() * sizeof(double)) != 0);

  // layer 1 consumes (coords | z): split storage, combined fan-in 3+128
  CHECK(a.tensor("w1_coord").rows == 3);
  CHECK(a.tensor("w1_coord").cols == 512);
  CHECK(a.tensor("w1_latent").rows == 128);
  CHECK(a.tensor("w1_latent").cols == 512);
  // the layer after the skip concat consumes hidden + 3 inputs
  CHECK(a.skip_index == 4);
  CHECK(a.tensor("w5").rows == 512 + 3);
  CHECK(a.tensor("w5").cols == 512);
  // plain hidden layers and the scalar output head
  CHECK(a.tensor("w3").rows == 512);
  CHECK(a.tensor("w8").rows == 512);
  CHECK(a.tensor("w8").cols == 1);
  CHECK(a.tensor("b8").rows == 1);
  CHECK(a.tensor("b8").cols == 1);
  CHECK(a.layers == 8);

  // parameters are exactly representable in f32
  for (double p : a.params) CHECK(p == snap_f32(p));
}

TEST_CASE("all-zero parameters predict one half everywhere") {
  ShapePriorModel m = model_init(6, 10, 3);
  std::fill(m.params.begin(), m.params.end(), 0.0);
  const Matrix coords = normalized_coord_rows({3, 3, 3});
  const std::vector<double> z(6, 0.0);
  const std::vector<double> probs = predict_occupancy(m, z, coords);
  REQUIRE(probs.size() == 27);
  for (double p : probs) CHECK(p == 0.5);
}

TEST_CASE("predictions stay strictly inside the unit interval") {
  Rng rng(4242);
  const ShapePriorModel m = model_init(8, 24, 99);
  const Matrix coords = normalized_coord_rows({5, 5, 5});
  for (int rep = 0; rep < 5; ++rep) {
    const std::vector<double> z = random_latent(8, rng, 4.0);
    for (double p : predict_occupancy(m, z, coords)) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("prediction is pure and voxelwise independent") {
  Rng rng(31);
  const ShapePriorModel m = model_init(5, 16, 11);
  const std::vector<double> z = random_latent(5, rng);
  const Matrix coords = normalized_coord_rows({4, 3, 2});

  const std::vector<double> once = predict_occupancy(m, z, coords);
  const std::vector<double> twice = predict_occupancy(m, z, coords);
  CHECK(once == twice);

  // reversing the batch reverses the outputs bit for bit
  Matrix rev(coords.rows, 3);
  for (int r = 0; r < coords.rows; ++r)
    for (int c = 0; c < 3; ++c)
      rev.v[static_cast<std::size_t>(r) * 3 + c] =
          coords.v[static_cast<std::size_t>(coords.rows - 1 - r) * 3 + c];
  const std::vector<double> rev_probs = predict_occupancy(m, z, rev);
  for (std::size_t i = 0; i < once.size(); ++i)
    CHECK(rev_probs[i] == once[once.size() - 1 - i]);
}

TEST_CASE("non-finite or mis-sized latents are rejected") {
  const ShapePriorModel m = model_init(4, 8, 3);
  const Matrix coords = normalized_coord_rows({2, 2, 2});
  std::vector<double> z(4, 0.0);
  z[2] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(predict_occupancy(m, z, coords), std::invalid_argument);
  CHECK_THROWS_AS(predict_occupancy(m, std::vector<double>(3, 0.0), coords),
                  std::invalid_argument);
}

TEST_CASE("loss worked examples") {
  VoxelGrid target = sphere_grid(6, 0.6);
  REQUIRE(target.occupied_count() > 0);
  const std::size_t n = target.voxel_count();
  LossWeights w;
  w.lambda = 0.0;

  SUBCASE("probabilities equal to the target give vanishing dice and ce") {
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) probs[i] = target.occ[i] ? 1.0 : 0.0;
    const LossBreakdown lb = loss_from_probs(probs, target, {0.0, 0.0}, w);
    CHECK(std::abs(lb.soft_dice) <= 1e-9);
    CHECK(lb.cross_entropy <= 1e-12);
    CHECK(lb.latent_reg == 0.0);
  }
  SUBCASE("uniform one-half probabilities cost ln 2 of cross entropy") {
    const std::vector<double> probs(n, 0.5);
    const LossBreakdown lb = loss_from_probs(probs, target, {0.0, 0.0}, w);
    CHECK(lb.cross_entropy ==
          doctest::Approx(std::numbers::ln2).epsilon(1e-14));
  }
  SUBCASE("zero latent carries no regularization, nonzero does") {
    const std::vector<double> probs(n, 0.5);
    LossWeights wl;
    wl.lambda = 2.0;
    const LossBreakdown zero = loss_from_probs(probs, target, {0.0, 0.0, 0.0}, wl);
    CHECK(zero.latent_reg == 0.0);
    const LossBreakdown nz = loss_from_probs(probs, target, {0.5, -0.5}, wl);
    CHECK(nz.latent_reg == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(nz.total == doctest::Approx(nz.soft_dice + nz.cross_entropy +
                                      2.0 * nz.latent_reg)
                          .epsilon(1e-15));
  }
  SUBCASE("blending toward one half monotonically worsens the total") {
    std::vector<double> exact(n);
    for (std::size_t i = 0; i < n; ++i) exact[i] = target.occ[i] ? 1.0 : 0.0;
    double prev = -1.0;
    for (double blend : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      std::vector<double> probs(n);
      for (std::size_t i = 0; i < n; ++i)
        probs[i] = (1.0 - blend) * exact[i] + blend * 0.5;
      const LossBreakdown lb = loss_from_probs(probs, target, {}, w);
      CHECK(lb.total > prev);
      prev = lb.total;
    }
  }
}

TEST_CASE("tape loss agrees with the probability-only evaluation") {
  Rng rng(606);
  const ShapePriorModel m = model_init(4, 8, 21);
  const VoxelGrid target = sphere_grid(5, 0.7);
  const Matrix coords = normalized_coord_rows(target.dims);
  const std::vector<double> z = random_latent(4, rng);
  LossWeights w;
  w.ce_weight = 0.7;
  w.lambda = 3e-3;

  autodiff::Tape tape;
  const ForwardNodes f = build_forward(tape, m, z, coords, false, false);
  const LossNodes ln = build_loss(tape, f.logits, f.probs, f.z, target, w);
  const LossBreakdown on_tape = read_loss(tape, ln);

  const std::vector<double> probs = predict_occupancy(m, z, coords);
  const LossBreakdown direct = loss_from_probs(probs, target, z, w);

  CHECK(on_tape.soft_dice == doctest::Approx(direct.soft_dice).epsilon(1e-12));
  CHECK(on_tape.cross_entropy ==
        doctest::Approx(direct.cross_entropy).epsilon(1e-12));
  CHECK(on_tape.latent_reg == doctest::Approx(direct.latent_reg).epsilon(1e-12));
  CHECK(on_tape.total == doctest::Approx(direct.total).epsilon(1e-12));
}

TEST_CASE("full-model gradients match finite differences") {
  // downsized network: 2 layers, width 8, d=4, 6^3 grid
  Rng rng(1717);
  ShapePriorModel m = model_init_custom(4, 8, 2, 1, 5);
  const VoxelGrid target = sphere_grid(6, 0.65);
  const Matrix coords = normalized_coord_rows(target.dims);
  std::vector<double> z = random_latent(4, rng);
  LossWeights w;
  w.ce_weight = 1.0;
  w.lambda = 1e-4;

  auto eval = [&](std::vector<Matrix>* grads) -> double {
    autodiff::Tape tape;
    const ForwardNodes f = build_forward(tape, m, z, coords, grads != nullptr,
                                         grads != nullptr);
    const LossNodes ln = build_loss(tape, f.logits, f.probs, f.z, target, w);
    const double total = tape.scalar(ln.total);
    if (grads) {
      tape.backward(ln.total);
      grads->clear();
      for (const auto id : f.theta) grads->push_back(tape.grad(id));
      grads->push_back(tape.grad(f.z));
    }
    return total;
  };

  std::vector<Matrix> grads;
  eval(&grads);
  REQUIRE(grads.size() == m.tensors.size() + 1);

  const double h = 1e-4;
  const double tol = 1e-5;
  int checked = 0;
  for (std::size_t ti = 0; ti < m.tensors.size(); ++ti) {
    const TensorView& t = m.tensors[ti];
    REQUIRE(grads[ti].rows == t.rows);
    REQUIRE(grads[ti].cols == t.cols);
    for (std::size_t e = 0; e < t.size(); ++e) {
      double& p = m.params[t.offset + e];
      const double keep = p;
      p = keep + h;
      const double up = eval(nullptr);
      p = keep - h;
      const double dn = eval(nullptr);
      p = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double ad = grads[ti].v[e];
      const double rel =
          std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
      INFO("tensor ", t.name, " entry ", e, " ad=", ad, " fd=", fd);
      CHECK(rel <= tol);
      ++checked;
    }
  }
  for (std::size_t e = 0; e < z.size(); ++e) {
    const double keep = z[e];
    z[e] = keep + h;
    const double up = eval(nullptr);
    z[e] = keep - h;
    const double dn = eval(nullptr);
    z[e] = keep;
    const double fd = (up - dn) / (2.0 * h);
    const double ad = grads.back().v[e];
    const double rel =
        std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
    INFO("latent entry ", e);
    CHECK(rel <= tol);
    ++checked;
  }
  CHECK(checked == static_cast<int>(m.param_count() + z.size()));
}

TEST_CASE("frozen-weight forward skips weight gradients but not latent ones") {
  Rng rng(88);
  const ShapePriorModel m = model_init(4, 8, 77);
  const VoxelGrid target = sphere_grid(4, 0.7);
  const Matrix coords = normalized_coord_rows(target.dims);
  const std::vector<double> z = random_latent(4, rng);

  autodiff::Tape tape;
  const ForwardNodes f = build_forward(tape, m, z, coords, false, true);
  const LossNodes ln = build_loss(tape, f.logits, f.probs, f.z, target, {});
  tape.backward(ln.total);
  const Matrix& gz = tape.grad(f.z);
  REQUIRE(gz.v.size() == 4);
  bool any = false;
  for (double g : gz.v) any = any || g != 0.0;
  CHECK(any);
  // theta leaves were recorded without gradient tracking
  for (const auto id : f.theta) CHECK_THROWS_AS(tape.grad(id), std::logic_error);
}

TEST_CASE("checkpoint save, load, and predict are bitwise stable") {
  Rng rng(99);
  ShapePriorModel m = model_init(6, 12, 2024);
  m.ce_weight = 0.8;
  m.lambda = 5e-4;
  const std::vector<double> z = random_latent(6, rng);
  const Matrix coords = normalized_coord_rows({4, 4, 4});
  const std::vector<double> before = predict_occupancy(m, z, coords);

  const auto path = temp_file("model.inrc");
  save_checkpoint(path, m);
  const ShapePriorModel back = load_checkpoint(path);
  CHECK(back.d == m.d);
  CHECK(back.hidden == m.hidden);
  CHECK(back.layers == m.layers);
  CHECK(back.skip_index == m.skip_index);
  CHECK(back.ce_weight == m.ce_weight);
  CHECK(back.lambda == m.lambda);
  REQUIRE(back.params.size() == m.params.size());
  CHECK(std::memcmp(back.params.data(), m.params.data(),
                    m.params.size() * sizeof(double)) == 0);

  const std::vector<double> after = predict_occupancy(back, z, coords);
  REQUIRE(after.size() == before.size());
  CHECK(std::memcmp(after.data(), before.data(),
                    before.size() * sizeof(double)) == 0);
}

TEST_CASE("latent tables append and reload") {
  const auto path = temp_file("codes.ltab");
  std::filesystem::remove(path);
  LatentTable t;
  t.d = 3;
  t.entries = {{"s1", {0.25, -0.5, 1.0}}, {"s2", {0.0, 0.125, -2.0}}};
  save_latents(path, t);
  append_latent(path, 3, "s3", std::vector<double>{1.5, 0.75, -0.25});

  const LatentTable back = load_latents(path);
  CHECK(back.d == 3);
  REQUIRE(back.entries.size() == 3);
  CHECK(back.entries[2].first == "s3");
  CHECK(back.find("s2")[1] == 0.125);
  CHECK(back.find("s3")[0] == 1.5);
  CHECK_THROWS_AS(back.find("missing"), std::out_of_range);
}

TEST_CASE("corrupt checkpoints are rejected") {
  ShapePriorModel m = model_init(3, 6, 5);
  const auto path = temp_file("bad.inrc");
  save_checkpoint(path, m);

  SUBCASE("magic line") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XNRC1", 5);
    f.close();
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  }
}
