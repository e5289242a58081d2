#pragma once

#include <cstdint>
#include <vector>

#include "shapeprior/matrix.hpp"

namespace shapeprior::autodiff {

// Reverse-mode tape over dense matrices. Record ops forward, then call
// backward() once on a 1x1 loss node. Gradients of leaves created with
// needs_grad=true are kept; everything else (intermediate values and grads)
// is released during the reverse sweep, so peak memory stays near the
// forward-pass footprint. value() is only valid before backward().
//
// Gradient GEMMs for inputs that do not require gradients are skipped
// entirely, which is what makes frozen-weight latent optimization cheap.
class Tape {
 public:
  using NodeId = int;

  NodeId leaf(Matrix m, bool needs_grad);
  NodeId constant(Matrix m) { return leaf(std::move(m), false); }

  NodeId matmul(NodeId a, NodeId b);             // [m,k]x[k,n]
  NodeId add(NodeId a, NodeId b);                // same shape
  NodeId add_row_broadcast(NodeId x, NodeId r);  // [m,n] + [1,n]
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);                      // numerically stable
  NodeId concat_cols(NodeId a, NodeId b);        // [m,n1]|[m,n2]
  NodeId mul(NodeId a, NodeId b);                // elementwise

  // scalar-valued reductions (all return a 1x1 node)
  NodeId sum_all(NodeId x);
  NodeId sum_sq(NodeId x);
  // 1 - (2*sum(p*y)+eps)/(sum(p)+sum(y)+eps); target must outlive backward()
  NodeId soft_dice(NodeId probs, const std::uint8_t* target, double eps);
  // mean over entries of max(l,0) - l*y + log1p(exp(-|l|))
  NodeId bce_logits_mean(NodeId logits, const std::uint8_t* target);
  NodeId weighted_sum(const std::vector<NodeId>& xs, const std::vector<double>& ws);

  const Matrix& value(NodeId n) const { return nodes_[n].val; }
  double scalar(NodeId n) const { return nodes_[n].val.v[0]; }

  void backward(NodeId loss);

  // valid for needs_grad leaves after backward(); zero matrix if untouched
  const Matrix& grad(NodeId n) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kMatmul,
    kAdd,
    kAddRow,
    kRelu,
    kSigmoid,
    kConcatCols,
    kMul,
    kSumAll,
    kSumSq,
    kSoftDice,
    kBceMean,
    kWeightedSum,
  };

  struct Node {
    Op op = Op::kLeaf;
    int a = -1;
    int b = -1;
    bool needs = false;
    bool is_leaf = false;
    Matrix val;
    Matrix grd;
    double x0 = 0.0, x1 = 0.0;           // op-specific scalars
    const std::uint8_t* target = nullptr;
    std::vector<int> srcs;               // weighted_sum only
    std::vector<double> ws;
  };

  NodeId push(Node n);
  Matrix& grad_buf(int id); // lazily allocated, zero-filled

  std::vector<Node> nodes_;
  bool swept_ = false;
};

} // namespace shapeprior::autodiff
