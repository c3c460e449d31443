#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "elastoflow/tensor.hpp"

namespace elastoflow::ad {

/// Reverse-mode autodiff over Tensor. The graph is a DAG of shared nodes;
/// backward() runs a deterministic reverse-topological sweep. Recording can
/// be switched off (NoGradGuard), in which case ops compute values only and
/// the arithmetic is bit-identical to the recorded path.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily by backward()
  bool requires_grad = false;
  bool grad_ready = false;
  std::vector<NodePtr> parents;
  // Propagates this->grad into parents' grads.
  std::function<void(Node&)> backprop;
};

/// Value-semantics handle to a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  bool valid() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  double item() const { return node_->value[0]; }
  NodePtr node() const { return node_; }

 private:
  NodePtr node_;
};

/// While alive, ops compute values without recording the graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

Var leaf(Tensor value);      // requires_grad = true
Var constant(Tensor value);  // requires_grad = false
Var detach(const Var& v);    // value copy, no history

/// Accumulates d(root)/d(leaf) into every reachable requires_grad node.
/// root must be scalar (size 1).
void backward(const Var& root);

// ----- elementwise -----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double c);
/// a - b where b is a scalar (size-1) variable, broadcast over a.
Var sub_broadcast(const Var& a, const Var& b);
Var leaky_relu(const Var& a, double slope);
/// (x^2 + eps)^gamma, elementwise.
Var charbonnier(const Var& a, double gamma, double eps);

// ----- reductions -----
/// Mean over pixels where mask != 0; rank-2 input, scalar output.
/// Throws std::domain_error when the mask is empty.
Var masked_mean(const Var& a, const Mask& mask);

// ----- stencils (rank-2) -----
/// out(i,j) = a(i+1,j) - a(i,j), shape (A-1, L).
Var diff_axial(const Var& a);
/// out(i,j) = a(i,j+1) - a(i,j), shape (A, L-1).
Var diff_lateral(const Var& a);
/// out(i,j) = a(i+2,j) - 2 a(i+1,j) + a(i,j), centered at i+1; shape (A-2, L).
Var second_diff_axial(const Var& a);

// ----- sampling -----
/// image(x + flow(x)) with bilinear interpolation and edge clamping.
/// Differentiable in both the image and the two flow components.
Var warp_bilinear(const Var& image, const Var& flow_axial, const Var& flow_lateral);

/// Resample a rank-2 field to (rows, cols) with half-pixel-center bilinear
/// interpolation.
Var resize_bilinear(const Var& a, int64_t rows, int64_t cols);

/// Evaluate a control grid with node spacing (sa, sl) on a dense (rows, cols)
/// pixel grid; node (i,j) sits at pixel (i*sa, j*sl). Exact for constant and
/// bilinear fields.
Var control_grid_upsample(const Var& control, double sa, double sl, int64_t rows, int64_t cols);

// ----- conv / structure (rank-3 CHW, weights OIHW) -----
Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride, int pad);
Var concat_channels(const std::vector<Var>& parts);
Var channel(const Var& stack, int64_t c);                    // rank-3 -> rank-2
Var crop2d(const Var& a, int64_t r0, int64_t c0, int64_t rows, int64_t cols);

// plain-tensor helpers shared with the non-autodiff paths
Tensor reflect_pad2d(const Tensor& a, int64_t pad_rows, int64_t pad_cols);

}  // namespace elastoflow::ad
