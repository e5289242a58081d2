#include "shapeprior/tape.hpp"

#include <cmath>
#include <stdexcept>

#include "shapeprior/kernels.hpp"

namespace shapeprior::autodiff {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void add_inplace(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

} // namespace

Tape::NodeId Tape::push(Node n) {
  check(!swept_, "tape: cannot record after backward()");
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Matrix& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grd.empty()) n.grd = Matrix(n.val.rows, n.val.cols);
  return n.grd;
}

Tape::NodeId Tape::leaf(Matrix m, bool needs_grad) {
  Node n;
  n.op = Op::kLeaf;
  n.is_leaf = true;
  n.needs = needs_grad;
  n.val = std::move(m);
  return push(std::move(n));
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Matrix& ma = nodes_[a].val;
  const Matrix& mb = nodes_[b].val;
  check(ma.cols == mb.rows, "matmul: inner dimensions differ");
  Node n;
  n.op = Op::kMatmul;
  n.a = a;
  n.b = b;
  n.needs = nodes_[a].needs || nodes_[b].needs;
  n.val = Matrix(ma.rows, mb.cols);
  kernels::active().gemm_nn(ma.data(), mb.data(), n.val.data(), ma.rows, ma.cols,
                            mb.cols);
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  const Matrix& ma = nodes_[a].val;
  const Matrix& mb = nodes_[b].val;
  check(ma.rows == mb.rows && ma.cols == mb.cols, "add: shape mismatch");
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.needs = nodes_[a].needs || nodes_[b].needs;
  n.val = ma;
  add_inplace(n.val.data(), mb.data(), mb.size());
  return push(std::move(n));
}

Tape::NodeId Tape::add_row_broadcast(NodeId x, NodeId r) {
  const Matrix& mx = nodes_[x].val;
  const Matrix& mr = nodes_[r].val;
  check(mr.rows == 1 && mr.cols == mx.cols, "add_row_broadcast: row shape mismatch");
  Node n;
  n.op = Op::kAddRow;
  n.a = x;
  n.b = r;
  n.needs = nodes_[x].needs || nodes_[r].needs;
  n.val = mx;
  for (int i = 0; i < mx.rows; ++i)
    add_inplace(n.val.data() + static_cast<std::size_t>(i) * mx.cols, mr.data(),
                mr.cols);
  return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId x) {
  const Matrix& mx = nodes_[x].val;
  Node n;
  n.op = Op::kRelu;
  n.a = x;
  n.needs = nodes_[x].needs;
  n.val = Matrix(mx.rows, mx.cols);
  kernels::active().relu_fwd(mx.data(), n.val.data(), mx.size());
  return push(std::move(n));
}

Tape::NodeId Tape::sigmoid(NodeId x) {
  const Matrix& mx = nodes_[x].val;
  Node n;
  n.op = Op::kSigmoid;
  n.a = x;
  n.needs = nodes_[x].needs;
  n.val = Matrix(mx.rows, mx.cols);
  kernels::active().sigmoid_fwd(mx.data(), n.val.data(), mx.size());
  return push(std::move(n));
}

Tape::NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Matrix& ma = nodes_[a].val;
  const Matrix& mb = nodes_[b].val;
  check(ma.rows == mb.rows, "concat_cols: row count mismatch");
  Node n;
  n.op = Op::kConcatCols;
  n.a = a;
  n.b = b;
  n.needs = nodes_[a].needs || nodes_[b].needs;
  n.val = Matrix(ma.rows, ma.cols + mb.cols);
  for (int i = 0; i < ma.rows; ++i) {
    double* row = n.val.data() + static_cast<std::size_t>(i) * n.val.cols;
    const double* ra = ma.data() + static_cast<std::size_t>(i) * ma.cols;
    const double* rb = mb.data() + static_cast<std::size_t>(i) * mb.cols;
    for (int j = 0; j < ma.cols; ++j) row[j] = ra[j];
    for (int j = 0; j < mb.cols; ++j) row[ma.cols + j] = rb[j];
  }
  return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  const Matrix& ma = nodes_[a].val;
  const Matrix& mb = nodes_[b].val;
  check(ma.rows == mb.rows && ma.cols == mb.cols, "mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.needs = nodes_[a].needs || nodes_[b].needs;
  n.val = Matrix(ma.rows, ma.cols);
  for (std::size_t i = 0; i < ma.size(); ++i) n.val.v[i] = ma.v[i] * mb.v[i];
  return push(std::move(n));
}

Tape::NodeId Tape::sum_all(NodeId x) {
  Node n;
  n.op = Op::kSumAll;
  n.a = x;
  n.needs = nodes_[x].needs;
  n.val = Matrix(1, 1);
  n.val.v[0] = kernels::active().reduce_sum(nodes_[x].val.data(), nodes_[x].val.size());
  return push(std::move(n));
}

Tape::NodeId Tape::sum_sq(NodeId x) {
  Node n;
  n.op = Op::kSumSq;
  n.a = x;
  n.needs = nodes_[x].needs;
  n.val = Matrix(1, 1);
  n.val.v[0] = kernels::active().sum_sq(nodes_[x].val.data(), nodes_[x].val.size());
  return push(std::move(n));
}

Tape::NodeId Tape::soft_dice(NodeId probs, const std::uint8_t* target, double eps) {
  const Matrix& mp = nodes_[probs].val;
  double sum_py = 0.0, sum_p = 0.0;
  kernels::active().dice_sums(mp.data(), target, mp.size(), &sum_py, &sum_p);
  double sum_y = 0.0;
  for (std::size_t i = 0; i < mp.size(); ++i) sum_y += target[i];
  Node n;
  n.op = Op::kSoftDice;
  n.a = probs;
  n.needs = nodes_[probs].needs;
  n.target = target;
  n.x0 = 2.0 * sum_py + eps;   // numerator
  n.x1 = sum_p + sum_y + eps;  // denominator
  n.val = Matrix(1, 1);
  n.val.v[0] = 1.0 - n.x0 / n.x1;
  return push(std::move(n));
}

Tape::NodeId Tape::bce_logits_mean(NodeId logits, const std::uint8_t* target) {
  const Matrix& ml = nodes_[logits].val;
  check(!ml.empty(), "bce_logits_mean: empty input");
  Node n;
  n.op = Op::kBceMean;
  n.a = logits;
  n.needs = nodes_[logits].needs;
  n.target = target;
  n.val = Matrix(1, 1);
  n.val.v[0] =
      kernels::active().bce_logits_sum(ml.data(), target, ml.size()) /
      static_cast<double>(ml.size());
  return push(std::move(n));
}

Tape::NodeId Tape::weighted_sum(const std::vector<NodeId>& xs,
                                const std::vector<double>& ws) {
  check(!xs.empty() && xs.size() == ws.size(), "weighted_sum: arity mismatch");
  Node n;
  n.op = Op::kWeightedSum;
  n.srcs = xs;
  n.ws = ws;
  n.val = Matrix(1, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    check(nodes_[xs[i]].val.size() == 1, "weighted_sum: inputs must be scalar");
    n.needs = n.needs || nodes_[xs[i]].needs;
    s += ws[i] * nodes_[xs[i]].val.v[0];
  }
  n.val.v[0] = s;
  return push(std::move(n));
}

const Matrix& Tape::grad(NodeId id) const {
  const Node& n = nodes_[id];
  check(n.is_leaf && n.needs, "grad: only tracked leaves keep gradients");
  static const Matrix kEmpty;
  return n.grd.empty() ? kEmpty : n.grd;
}

void Tape::backward(NodeId loss) {
  check(!swept_, "tape: backward() already ran");
  check(nodes_[loss].val.size() == 1, "backward: loss must be scalar");
  swept_ = true;
  const auto& kt = kernels::active();

  grad_buf(loss).v[0] = 1.0;

  for (int i = loss; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.grd.empty() && n.needs && !n.is_leaf) {
      const Matrix& gy = n.grd;
      switch (n.op) {
        case Op::kLeaf:
          break;
        case Op::kMatmul: {
          const Matrix& ma = nodes_[n.a].val;
          const Matrix& mb = nodes_[n.b].val;
          if (nodes_[n.a].needs)
            kt.gemm_nt(gy.data(), mb.data(), grad_buf(n.a).data(), ma.rows, mb.cols,
                       ma.cols);
          if (nodes_[n.b].needs)
            kt.gemm_tn(ma.data(), gy.data(), grad_buf(n.b).data(), ma.rows, ma.cols,
                       mb.cols);
          break;
        }
        case Op::kAdd:
          if (nodes_[n.a].needs) add_inplace(grad_buf(n.a).data(), gy.data(), gy.size());
          if (nodes_[n.b].needs) add_inplace(grad_buf(n.b).data(), gy.data(), gy.size());
          break;
        case Op::kAddRow:
          if (nodes_[n.a].needs) add_inplace(grad_buf(n.a).data(), gy.data(), gy.size());
          if (nodes_[n.b].needs)
            kt.col_sum(gy.data(), grad_buf(n.b).data(), gy.rows, gy.cols);
          break;
        case Op::kRelu:
          if (nodes_[n.a].needs)
            kt.relu_bwd(n.val.data(), gy.data(), grad_buf(n.a).data(), gy.size());
          break;
        case Op::kSigmoid:
          if (nodes_[n.a].needs)
            kt.sigmoid_bwd(n.val.data(), gy.data(), grad_buf(n.a).data(), gy.size());
          break;
        case Op::kConcatCols: {
          const int ca = nodes_[n.a].val.cols;
          const int cb = nodes_[n.b].val.cols;
          for (int which = 0; which < 2; ++which) {
            const int src = which == 0 ? n.a : n.b;
            if (!nodes_[src].needs) continue;
            Matrix& gs = grad_buf(src);
            const int off = which == 0 ? 0 : ca;
            const int w = which == 0 ? ca : cb;
            for (int r = 0; r < gy.rows; ++r) {
              const double* gr = gy.data() + static_cast<std::size_t>(r) * gy.cols + off;
              double* dr = gs.data() + static_cast<std::size_t>(r) * w;
              for (int j = 0; j < w; ++j) dr[j] += gr[j];
            }
          }
          break;
        }
        case Op::kMul: {
          const Matrix& ma = nodes_[n.a].val;
          const Matrix& mb = nodes_[n.b].val;
          if (nodes_[n.a].needs) {
            Matrix& ga = grad_buf(n.a);
            for (std::size_t j = 0; j < gy.size(); ++j) ga.v[j] += gy.v[j] * mb.v[j];
          }
          if (nodes_[n.b].needs) {
            Matrix& gb = grad_buf(n.b);
            for (std::size_t j = 0; j < gy.size(); ++j) gb.v[j] += gy.v[j] * ma.v[j];
          }
          break;
        }
        case Op::kSumAll:
          if (nodes_[n.a].needs) {
            Matrix& ga = grad_buf(n.a);
            const double g = gy.v[0];
            for (std::size_t j = 0; j < ga.size(); ++j) ga.v[j] += g;
          }
          break;
        case Op::kSumSq:
          if (nodes_[n.a].needs) {
            Matrix& ga = grad_buf(n.a);
            const Matrix& ma = nodes_[n.a].val;
            const double g2 = 2.0 * gy.v[0];
            for (std::size_t j = 0; j < ga.size(); ++j) ga.v[j] += g2 * ma.v[j];
          }
          break;
        case Op::kSoftDice:
          if (nodes_[n.a].needs)
            kt.dice_bwd(n.target, n.x0, n.x1, gy.v[0], grad_buf(n.a).data(),
                        grad_buf(n.a).size());
          break;
        case Op::kBceMean:
          if (nodes_[n.a].needs) {
            Matrix& ga = grad_buf(n.a);
            kt.bce_logits_bwd(nodes_[n.a].val.data(), n.target,
                              gy.v[0] / static_cast<double>(ga.size()), ga.data(),
                              ga.size());
          }
          break;
        case Op::kWeightedSum:
          for (std::size_t j = 0; j < n.srcs.size(); ++j)
            if (nodes_[n.srcs[j]].needs)
              grad_buf(n.srcs[j]).v[0] += n.ws[j] * gy.v[0];
          break;
      }
    }
    // all consumers (higher ids) and this node's own backward are done
    if (!n.is_leaf) {
      n.val = Matrix();
      n.grd = Matrix();
    } else if (!n.needs) {
      n.val = Matrix();
    } else if (n.grd.empty()) {
      n.grd = Matrix(n.val.rows, n.val.cols); // untouched leaf: zero gradient
    }
  }
}

} // namespace shapeprior::autodiff
