#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "sorl/tensor.hpp"

namespace sorl::ad {

using NodeId = int32_t;

enum class Op : uint8_t {
  kConstant,
  kParam,
  kMatmul,
  kAddBias,
  kGelu,
  kLayerNorm,
  kConcatCols,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kAddConst,
  kMinimum,
  kAbs,
  kSum,
  kMean,
  kSumSq,
  kStopGrad,
};

// Reverse-mode tape over dense real64 tensors. A Graph is built forward by
// the ops below, consumed once by backward(), and reset() for the next
// iteration; value/grad buffers are pooled so a reused graph allocates
// nothing in steady state. Parameters enter as leaves that accumulate their
// gradients directly into externally owned buffers (see nn::param_node).
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves. constant() copies/moves the tensor in; constant_view() aliases
  // caller-owned storage that must outlive the graph's use; input() is a
  // tracked leaf whose gradient is retained for inspection after backward.
  NodeId constant(Tensor t);
  NodeId constant_view(const Tensor* t);
  NodeId input(Tensor t);
  // External parameter leaf: grad accumulates into *grad, and *ready_flag
  // (when given) is set once a gradient lands there.
  NodeId param(const Tensor* value, Tensor* grad, bool* ready_flag);

  NodeId matmul(NodeId x, NodeId w);               // [m,k] x [k,n]
  NodeId add_bias(NodeId x, NodeId b);             // rows of x plus vector b
  NodeId gelu(NodeId x);
  NodeId layer_norm(NodeId x, NodeId gain, NodeId shift, double eps);
  NodeId concat_cols(std::span<const NodeId> parts);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId divide(NodeId a, NodeId b);
  NodeId scale(NodeId x, double c);
  NodeId add_const(NodeId x, double c);
  NodeId minimum(NodeId a, NodeId b);              // ties take the first input's gradient
  NodeId absval(NodeId x);
  NodeId sum(NodeId x);                            // scalar
  NodeId mean(NodeId x);                           // scalar
  NodeId sum_sq(NodeId x);                         // scalar
  NodeId stop_grad(NodeId x);

  const Tensor& value(NodeId id) const;
  // Gradient of the last backward() w.r.t. a node (tracked input or any
  // interior node reached by the sweep). Throws if none was computed.
  const Tensor& grad_of(NodeId id) const;

  void backward(NodeId loss);  // loss must be scalar; single use per build
  void reset();                // drop nodes, keep buffer pool

  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  struct Node {
    Op op;
    NodeId p0 = -1, p1 = -1, p2 = -1;
    int list_begin = 0, list_count = 0;  // concat parents
    double c0 = 0.0;                     // scale factor / added constant / ln eps
    const Tensor* val = nullptr;
    Tensor* grad = nullptr;
    int aux0 = -1, aux1 = -1;            // pool ids: gelu dgelu, layernorm mean/rstd
    Tensor* ext_grad = nullptr;
    bool* ext_ready = nullptr;
    bool needs_grad = false;
  };

  NodeId push(Node n);
  int pool_alloc(const std::vector<int>& shape);
  Tensor& pool_at(int idx) { return pool_[idx]; }
  NodeId elementwise(Op op, NodeId a, NodeId b);
  NodeId reduction(Op op, NodeId x);
  void ensure_grad(Node& n);
  bool parents_need_grad(const Node& n) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> list_pool_;
  std::deque<Tensor> pool_;
  int pool_next_ = 0;
  bool consumed_ = false;
};

}  // namespace sorl::ad
