#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tshint/tensor.hpp"

namespace tshint {

using NodeId = std::uint32_t;

// Gradients keyed by leaf node id. Leaves the loss never reaches report
// zeros of the leaf's shape.
class GradientMap {
 public:
  const Tensor& at(NodeId id) const;
  bool contains(NodeId id) const { return grads_.count(id) != 0; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Graph;
  std::unordered_map<NodeId, Tensor> grads_;
};

// Reverse-mode tape. Build a forward computation with the recording ops,
// then call backward(loss) for gradients of every parameter and marked
// input. Every op validates that its output is finite and throws
// otherwise. A graph is built and consumed by one logical thread;
// independent graphs are safe to use concurrently.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  NodeId constant(Tensor v);
  NodeId input(Tensor v);
  NodeId parameter(Tensor v);

  // elementwise, same shape
  NodeId add(NodeId a, NodeId b);
  // [m x n] + [1 x n], broadcast over rows
  NodeId add_row(NodeId a, NodeId row);
  NodeId scale(NodeId a, double c);
  NodeId matmul(NodeId a, NodeId b);
  NodeId transpose(NodeId a);
  NodeId reshape(NodeId a, std::vector<std::size_t> shape);
  NodeId relu(NodeId a);
  NodeId gelu(NodeId a);
  // row-wise softmax, stabilized by row-max subtraction
  NodeId softmax_rows(NodeId a);
  // per-row normalization with learnable gain/bias of shape [1 x n]
  NodeId layernorm(NodeId x, NodeId gain, NodeId bias, double eps = 1e-5);
  NodeId mean(NodeId a);
  NodeId sum(NodeId a);
  NodeId mse_loss(NodeId pred, NodeId target);
  NodeId concat_cols(const std::vector<NodeId>& parts);
  NodeId concat_rows(const std::vector<NodeId>& parts);
  // Gather overlapping patches from row `channel` of a [C x T] matrix.
  // Patch j covers timesteps [j*stride, j*stride + patch_len).
  NodeId patchify(NodeId series, std::size_t channel, std::size_t patch_len,
                  std::size_t stride);

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

  GradientMap backward(NodeId loss) const;

 private:
  enum class Op : std::uint8_t {
    Leaf,
    Add,
    AddRow,
    Scale,
    MatMul,
    Transpose,
    Reshape,
    Relu,
    Gelu,
    SoftmaxRows,
    LayerNorm,
    Mean,
    Sum,
    MseLoss,
    ConcatCols,
    ConcatRows,
    Patchify,
  };
  enum class Leaf : std::uint8_t { None, Constant, Input, Parameter };

  struct Node {
    Op op = Op::Leaf;
    Leaf leaf = Leaf::None;
    bool needs_grad = false;
    std::vector<NodeId> parents;
    Tensor value;
    double scalar = 0.0;  // Scale factor / LayerNorm eps
    std::size_t patch_len = 0, stride = 0, channel = 0;
  };

  NodeId push(Node n, const char* op_name);
  const Node& node(NodeId id) const { return nodes_[id]; }

  std::vector<Node> nodes_;
};

// Max over coordinates of |analytic - central_difference| /
// (|analytic| + |central_difference| + 1e-12) for scalar f evaluated
// around x.
double max_rel_err_vs_fd(const std::function<double(const Tensor&)>& f,
                         const Tensor& x, const Tensor& analytic, double eps);

// Convenience: build the graph via `build` (given a fresh Graph and the
// input node for x), take the tape gradient, and compare against central
// finite differences.
double grad_check(const std::function<NodeId(Graph&, NodeId)>& build,
                  const Tensor& x, double eps = 1e-5);

}  // namespace tshint
