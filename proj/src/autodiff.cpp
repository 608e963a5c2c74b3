#include "sorl/autodiff.hpp"

#include <cmath>
#include <stdexcept>

#include "sorl/kernels.hpp"

namespace sorl::ad {

NodeId Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

int Graph::pool_alloc(const std::vector<int>& shape) {
  if (pool_next_ == static_cast<int>(pool_.size())) pool_.emplace_back();
  Tensor& t = pool_[pool_next_];
  t.reshape_to(shape);
  return pool_next_++;
}

bool Graph::parents_need_grad(const Node& n) const {
  for (NodeId p : {n.p0, n.p1, n.p2})
    if (p >= 0 && nodes_[p].needs_grad) return true;
  for (int i = 0; i < n.list_count; ++i)
    if (nodes_[list_pool_[n.list_begin + i]].needs_grad) return true;
  return false;
}

NodeId Graph::constant(Tensor t) {
  Node n{};
  n.op = Op::kConstant;
  const int slot = pool_alloc(t.shape);
  pool_[slot] = std::move(t);
  n.val = &pool_[slot];
  return push(std::move(n));
}

NodeId Graph::constant_view(const Tensor* t) {
  Node n{};
  n.op = Op::kConstant;
  n.val = t;
  return push(std::move(n));
}

NodeId Graph::input(Tensor t) {
  Node n{};
  n.op = Op::kConstant;
  const int slot = pool_alloc(t.shape);
  pool_[slot] = std::move(t);
  n.val = &pool_[slot];
  n.needs_grad = true;
  return push(std::move(n));
}

NodeId Graph::param(const Tensor* value, Tensor* grad, bool* ready_flag) {
  Node n{};
  n.op = Op::kParam;
  n.val = value;
  n.ext_grad = grad;
  n.ext_ready = ready_flag;
  n.needs_grad = true;
  return push(std::move(n));
}

NodeId Graph::matmul(NodeId x, NodeId w) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  if (xv.rank() != 2 || wv.rank() != 2 || xv.shape[1] != wv.shape[0])
    throw std::invalid_argument("matmul: shapes " + shape_str(xv.shape) + " x " +
                                shape_str(wv.shape));
  Node n{};
  n.op = Op::kMatmul;
  n.p0 = x;
  n.p1 = w;
  const int slot = pool_alloc({xv.shape[0], wv.shape[1]});
  Tensor& out = pool_[slot];
  kernels::active().gemm_nn(xv.ptr(), wv.ptr(), out.ptr(), xv.shape[0], xv.shape[1],
                            wv.shape[1], false);
  n.val = &out;
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::add_bias(NodeId x, NodeId b) {
  const Tensor& xv = value(x);
  const Tensor& bv = value(b);
  if (xv.rank() != 2 || bv.size() != xv.shape[1])
    throw std::invalid_argument("add_bias: bias length does not match columns");
  Node n{};
  n.op = Op::kAddBias;
  n.p0 = x;
  n.p1 = b;
  const int slot = pool_alloc(xv.shape);
  Tensor& out = pool_[slot];
  out.data = xv.data;
  kernels::active().add_row_vec(out.ptr(), bv.ptr(), xv.shape[0], xv.shape[1]);
  n.val = &out;
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::gelu(NodeId x) {
  const Tensor& xv = value(x);
  Node n{};
  n.op = Op::kGelu;
  n.p0 = x;
  const int slot = pool_alloc(xv.shape);
  n.aux0 = pool_alloc(xv.shape);  // d gelu / dx, consumed by the backward
  kernels::active().gelu_forward(xv.ptr(), pool_[slot].ptr(), pool_[n.aux0].ptr(), xv.size());
  n.val = &pool_[slot];
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::layer_norm(NodeId x, NodeId gain, NodeId shift, double eps) {
  const Tensor& xv = value(x);
  const Tensor& gv = value(gain);
  const Tensor& sv = value(shift);
  if (xv.rank() != 2 || gv.size() != xv.shape[1] || sv.size() != xv.shape[1])
    throw std::invalid_argument("layer_norm: gain/shift length does not match columns");
  Node n{};
  n.op = Op::kLayerNorm;
  n.p0 = x;
  n.p1 = gain;
  n.p2 = shift;
  n.c0 = eps;
  const int slot = pool_alloc(xv.shape);
  n.aux0 = pool_alloc({xv.shape[0]});  // mean
  n.aux1 = pool_alloc({xv.shape[0]});  // rstd
  kernels::active().layernorm_forward(xv.ptr(), gv.ptr(), sv.ptr(), pool_[slot].ptr(),
                                      pool_[n.aux0].ptr(), pool_[n.aux1].ptr(), xv.shape[0],
                                      xv.shape[1], eps);
  n.val = &pool_[slot];
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::concat_cols(std::span<const NodeId> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  const int rows = value(parts[0]).shape[0];
  int cols = 0;
  for (NodeId p : parts) {
    const Tensor& v = value(p);
    if (v.rank() != 2 || v.shape[0] != rows)
      throw std::invalid_argument("concat_cols: row mismatch");
    cols += v.shape[1];
  }
  Node n{};
  n.op = Op::kConcatCols;
  n.list_begin = static_cast<int>(list_pool_.size());
  n.list_count = static_cast<int>(parts.size());
  for (NodeId p : parts) list_pool_.push_back(p);
  const int slot = pool_alloc({rows, cols});
  Tensor& out = pool_[slot];
  int off = 0;
  for (NodeId p : parts) {
    const Tensor& v = value(p);
    const int pc = v.shape[1];
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < pc; ++c)
        out.data[static_cast<size_t>(r) * cols + off + c] =
            v.data[static_cast<size_t>(r) * pc + c];
    off += pc;
  }
  n.val = &out;
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::elementwise(Op op, NodeId a, NodeId b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("elementwise op: shape mismatch");
  Node n{};
  n.op = op;
  n.p0 = a;
  n.p1 = b;
  const int slot = pool_alloc(av.shape);
  Tensor& out = pool_[slot];
  const auto& k = kernels::active();
  switch (op) {
    case Op::kAdd: k.add(av.ptr(), bv.ptr(), out.ptr(), av.size()); break;
    case Op::kSub: k.sub(av.ptr(), bv.ptr(), out.ptr(), av.size()); break;
    case Op::kMul: k.mul(av.ptr(), bv.ptr(), out.ptr(), av.size()); break;
    case Op::kDiv:
      for (int64_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] / bv.data[i];
      break;
    case Op::kMinimum:
      for (int64_t i = 0; i < av.size(); ++i) out.data[i] = std::min(av.data[i], bv.data[i]);
      break;
    default: throw std::logic_error("elementwise: bad op");
  }
  n.val = &out;
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return elementwise(Op::kAdd, a, b); }
NodeId Graph::sub(NodeId a, NodeId b) { return elementwise(Op::kSub, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return elementwise(Op::kMul, a, b); }
NodeId Graph::divide(NodeId a, NodeId b) { return elementwise(Op::kDiv, a, b); }
NodeId Graph::minimum(NodeId a, NodeId b) { return elementwise(Op::kMinimum, a, b); }

NodeId Graph::scale(NodeId x, double c) {
  const Tensor& xv = value(x);
  Node n{};
  n.op = Op::kScale;
  n.p0 = x;
  n.c0 = c;
  const int slot = pool_alloc(xv.shape);
  kernels::active().scale(xv.ptr(), c, pool_[slot].ptr(), xv.size());
  n.val = &pool_[slot];
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::add_const(NodeId x, double c) {
  const Tensor& xv = value(x);
  Node n{};
  n.op = Op::kAddConst;
  n.p0 = x;
  n.c0 = c;
  const int slot = pool_alloc(xv.shape);
  Tensor& out = pool_[slot];
  for (int64_t i = 0; i < xv.size(); ++i) out.data[i] = xv.data[i] + c;
  n.val = &out;
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::absval(NodeId x) {
  const Tensor& xv = value(x);
  Node n{};
  n.op = Op::kAbs;
  n.p0 = x;
  const int slot = pool_alloc(xv.shape);
  Tensor& out = pool_[slot];
  for (int64_t i = 0; i < xv.size(); ++i) out.data[i] = std::fabs(xv.data[i]);
  n.val = &out;
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::reduction(Op op, NodeId x) {
  const Tensor& xv = value(x);
  Node n{};
  n.op = op;
  n.p0 = x;
  const int slot = pool_alloc({1});
  const auto& k = kernels::active();
  double v = 0;
  switch (op) {
    case Op::kSum: v = k.sum(xv.ptr(), xv.size()); break;
    case Op::kMean: v = k.sum(xv.ptr(), xv.size()) / static_cast<double>(xv.size()); break;
    case Op::kSumSq: v = k.sum_sq(xv.ptr(), xv.size()); break;
    default: throw std::logic_error("reduction: bad op");
  }
  pool_[slot].data[0] = v;
  n.val = &pool_[slot];
  n.needs_grad = parents_need_grad(n);
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) { return reduction(Op::kSum, x); }
NodeId Graph::mean(NodeId x) { return reduction(Op::kMean, x); }
NodeId Graph::sum_sq(NodeId x) { return reduction(Op::kSumSq, x); }

NodeId Graph::stop_grad(NodeId x) {
  Node n{};
  n.op = Op::kStopGrad;
  n.p0 = x;
  n.val = &value(x);
  n.needs_grad = false;  // blocks the sweep by construction
  return push(std::move(n));
}

const Tensor& Graph::value(NodeId id) const { return *nodes_.at(id).val; }

const Tensor& Graph::grad_of(NodeId id) const {
  const Node& n = nodes_.at(id);
  const Tensor* g = n.ext_grad != nullptr ? n.ext_grad : n.grad;
  if (g == nullptr) throw std::logic_error("grad_of: no gradient computed for node");
  return *g;
}

void Graph::ensure_grad(Node& n) {
  if (n.ext_grad != nullptr || n.grad != nullptr) return;
  const int slot = pool_alloc(n.val->shape);
  Tensor& g = pool_[slot];
  std::fill(g.data.begin(), g.data.end(), 0.0);
  n.grad = &g;
}

void Graph::backward(NodeId loss) {
  if (consumed_) throw std::logic_error("backward: graph already consumed; reset() first");
  consumed_ = true;
  Node& ln = nodes_.at(loss);
  if (ln.val->size() != 1) throw std::invalid_argument("backward: loss must be scalar");
  if (!ln.needs_grad) return;  // nothing differentiable below

  // Mark the ancestry of the loss so unrelated tape entries are skipped.
  std::vector<uint8_t> live(nodes_.size(), 0);
  live[loss] = 1;
  for (NodeId i = loss; i >= 0; --i) {
    if (!live[i] || !nodes_[i].needs_grad) continue;
    const Node& n = nodes_[i];
    for (NodeId p : {n.p0, n.p1, n.p2})
      if (p >= 0 && nodes_[p].needs_grad) live[p] = 1;
    for (int j = 0; j < n.list_count; ++j) {
      const NodeId p = list_pool_[n.list_begin + j];
      if (nodes_[p].needs_grad) live[p] = 1;
    }
  }
  for (NodeId i = 0; i <= loss; ++i)
    if (live[i] && nodes_[i].needs_grad) ensure_grad(nodes_[i]);

  auto gptr = [&](NodeId id) -> Tensor& {
    Node& n = nodes_[id];
    return n.ext_grad != nullptr ? *n.ext_grad : *n.grad;
  };
  auto wants = [&](NodeId id) { return id >= 0 && nodes_[id].needs_grad && live[id]; };

  gptr(loss).data[0] += 1.0;
  if (ln.ext_ready != nullptr) *ln.ext_ready = true;

  const auto& k = kernels::active();

  for (NodeId i = loss; i >= 0; --i) {
    if (!live[i] || !nodes_[i].needs_grad) continue;
    Node& n = nodes_[i];
    if (n.ext_ready != nullptr) *n.ext_ready = true;
    if (n.op == Op::kConstant || n.op == Op::kParam || n.op == Op::kStopGrad) continue;
    const Tensor& g = gptr(i);

    switch (n.op) {
      case Op::kMatmul: {
        const Tensor& xv = value(n.p0);
        const Tensor& wv = value(n.p1);
        if (wants(n.p0))
          k.gemm_nt(g.ptr(), wv.ptr(), gptr(n.p0).ptr(), xv.shape[0], wv.shape[1],
                    wv.shape[0], true);
        if (wants(n.p1))
          k.gemm_tn(xv.ptr(), g.ptr(), gptr(n.p1).ptr(), xv.shape[1], xv.shape[0],
                    wv.shape[1], true);
        break;
      }
      case Op::kAddBias: {
        if (wants(n.p0)) k.axpy(1.0, g.ptr(), gptr(n.p0).ptr(), g.size());
        if (wants(n.p1))
          k.col_sum_acc(g.ptr(), gptr(n.p1).ptr(), g.shape[0], g.shape[1]);
        break;
      }
      case Op::kGelu: {
        if (wants(n.p0))
          k.gelu_backward(pool_[n.aux0].ptr(), g.ptr(), gptr(n.p0).ptr(), g.size());
        break;
      }
      case Op::kLayerNorm: {
        const Tensor& xv = value(n.p0);
        // dgain/dshift accumulate even if only x needs grad; cheap and simple.
        Tensor dg_local, ds_local;
        Tensor* dgain = wants(n.p1) ? &gptr(n.p1) : (dg_local.reshape_to({xv.shape[1]}), &dg_local);
        Tensor* dshift = wants(n.p2) ? &gptr(n.p2) : (ds_local.reshape_to({xv.shape[1]}), &ds_local);
        Tensor dx_local;
        Tensor* dx = wants(n.p0) ? &gptr(n.p0) : (dx_local.reshape_to(xv.shape), &dx_local);
        k.layernorm_backward(xv.ptr(), pool_[n.aux0].ptr(), pool_[n.aux1].ptr(),
                             value(n.p1).ptr(), g.ptr(), dx->ptr(), dgain->ptr(), dshift->ptr(),
                             xv.shape[0], xv.shape[1]);
        break;
      }
      case Op::kConcatCols: {
        const int rows = n.val->shape[0];
        const int cols = n.val->shape[1];
        int off = 0;
        for (int j = 0; j < n.list_count; ++j) {
          const NodeId p = list_pool_[n.list_begin + j];
          const int pc = value(p).shape[1];
          if (wants(p)) {
            Tensor& pg = gptr(p);
            for (int r = 0; r < rows; ++r)
              for (int c = 0; c < pc; ++c)
                pg.data[static_cast<size_t>(r) * pc + c] +=
                    g.data[static_cast<size_t>(r) * cols + off + c];
          }
          off += pc;
        }
        break;
      }
      case Op::kAdd: {
        if (wants(n.p0)) k.axpy(1.0, g.ptr(), gptr(n.p0).ptr(), g.size());
        if (wants(n.p1)) k.axpy(1.0, g.ptr(), gptr(n.p1).ptr(), g.size());
        break;
      }
      case Op::kSub: {
        if (wants(n.p0)) k.axpy(1.0, g.ptr(), gptr(n.p0).ptr(), g.size());
        if (wants(n.p1)) k.axpy(-1.0, g.ptr(), gptr(n.p1).ptr(), g.size());
        break;
      }
      case Op::kMul: {
        if (wants(n.p0)) {
          Tensor& pg = gptr(n.p0);
          const Tensor& bv = value(n.p1);
          for (int64_t j = 0; j < g.size(); ++j) pg.data[j] += g.data[j] * bv.data[j];
        }
        if (wants(n.p1)) {
          Tensor& pg = gptr(n.p1);
          const Tensor& av = value(n.p0);
          for (int64_t j = 0; j < g.size(); ++j) pg.data[j] += g.data[j] * av.data[j];
        }
        break;
      }
      case Op::kDiv: {
        const Tensor& av = value(n.p0);
        const Tensor& bv = value(n.p1);
        if (wants(n.p0)) {
          Tensor& pg = gptr(n.p0);
          for (int64_t j = 0; j < g.size(); ++j) pg.data[j] += g.data[j] / bv.data[j];
        }
        if (wants(n.p1)) {
          Tensor& pg = gptr(n.p1);
          for (int64_t j = 0; j < g.size(); ++j)
            pg.data[j] -= g.data[j] * av.data[j] / (bv.data[j] * bv.data[j]);
        }
        break;
      }
      case Op::kScale: {
        if (wants(n.p0)) k.axpy(n.c0, g.ptr(), gptr(n.p0).ptr(), g.size());
        break;
      }
      case Op::kAddConst: {
        if (wants(n.p0)) k.axpy(1.0, g.ptr(), gptr(n.p0).ptr(), g.size());
        break;
      }
      case Op::kMinimum: {
        const Tensor& av = value(n.p0);
        const Tensor& bv = value(n.p1);
        for (int64_t j = 0; j < g.size(); ++j) {
          const bool take_a = av.data[j] <= bv.data[j];
          if (take_a && wants(n.p0)) gptr(n.p0).data[j] += g.data[j];
          if (!take_a && wants(n.p1)) gptr(n.p1).data[j] += g.data[j];
        }
        break;
      }
      case Op::kAbs: {
        if (wants(n.p0)) {
          const Tensor& xv = value(n.p0);
          Tensor& pg = gptr(n.p0);
          const double gs = g.data[0];
          (void)gs;
          for (int64_t j = 0; j < xv.size(); ++j) {
            const double s = xv.data[j] > 0 ? 1.0 : (xv.data[j] < 0 ? -1.0 : 0.0);
            pg.data[j] += g.data[j] * s;
          }
        }
        break;
      }
      case Op::kSum: {
        if (wants(n.p0)) {
          Tensor& pg = gptr(n.p0);
          const double gs = g.data[0];
          for (auto& x : pg.data) x += gs;
        }
        break;
      }
      case Op::kMean: {
        if (wants(n.p0)) {
          Tensor& pg = gptr(n.p0);
          const double gs = g.data[0] / static_cast<double>(pg.size());
          for (auto& x : pg.data) x += gs;
        }
        break;
      }
      case Op::kSumSq: {
        if (wants(n.p0))
          k.axpy(2.0 * g.data[0], value(n.p0).ptr(), gptr(n.p0).ptr(), value(n.p0).size());
        break;
      }
      default:
        throw std::logic_error("backward: unhandled op");
    }
  }
}

void Graph::reset() {
  nodes_.clear();
  list_pool_.clear();
  pool_next_ = 0;
  consumed_ = false;
}

}  // namespace sorl::ad
