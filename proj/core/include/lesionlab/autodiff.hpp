#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "lesionlab/tensor.hpp"

namespace lesionlab {

/// Index of a trainable tensor inside a ParameterStore.
using ParamId = std::size_t;

/// Per-parameter gradients keyed by ParamId.
using Gradients = std::map<ParamId, Tensor>;

/// Handle to a node recorded in a Graph.
struct Var {
  std::uint32_t id = 0;
};

/// Contiguous block of rows that attends causally only within itself.
struct Segment {
  std::size_t start = 0;
  std::size_t length = 0;
};

/// Tape-based reverse-mode differentiation over dense tensors.
///
/// Nodes are appended in evaluation order, so the tape is already a
/// topological order; backward walks it once in reverse. Parameter leaves
/// hold a pointer to caller-owned tensors, which must outlive the graph.
/// A graph is single-threaded; separate graphs over the same read-only
/// parameters may run concurrently.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var parameter(ParamId id, const Tensor& value);
  Var constant(Tensor value);

  const Tensor& value(Var v) const;
  std::size_t node_count() const noexcept { return nodes_.size(); }

  Var matmul(Var a, Var b);
  /// Same shape, or `b` a vector broadcast over the rows of `a`.
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var gelu(Var a);
  /// Row-wise softmax.
  Var softmax(Var a);
  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
  Var embedding(Var table, std::span<const int> ids);
  /// Mean token cross-entropy of `logits` rows against `targets`.
  Var cross_entropy(Var logits, std::span<const int> targets);
  /// Dense gate matrix: softmax over the k largest logits of each row, zero
  /// elsewhere. Selection indices are constants; ties go to the lower index.
  Var topk_gates(Var logits, std::size_t k);
  Var sum(Var a);
  Var gather_rows(Var a, std::span<const std::size_t> rows);
  /// out[i,:] = a[i,:] * gates[rows[i], column]
  Var scale_rows_by_gate(Var a, Var gates, std::span<const std::size_t> rows, std::size_t column);
  /// Sum of row blocks scattered into an `n_rows` x `cols` zero matrix.
  Var scatter_sum(std::size_t n_rows, std::size_t cols,
                  std::span<const std::pair<Var, std::vector<std::size_t>>> parts);
  /// Multi-head causal self-attention over packed sequences.
  Var causal_attention(Var q, Var k, Var v, std::size_t heads, std::span<const Segment> segments);

  /// Runs reverse accumulation from a scalar loss. Every registered
  /// parameter receives an entry (zeros when it has no path to the loss).
  /// A graph may be differentiated once; call reset() to reuse it.
  Gradients backward(Var loss);

  void reset();

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool requires_grad = false;
    bool is_parameter = false;
    ParamId param = 0;
    std::vector<std::uint32_t> inputs;
    std::function<void(Graph&, std::uint32_t)> backward;
  };

  Var push(Tensor value, std::vector<std::uint32_t> inputs, const char* op,
           std::function<void(Graph&, std::uint32_t)> backward);
  Node& node(Var v);
  const Node& node(Var v) const;
  const Tensor& val(std::uint32_t id) const;
  /// Gradient buffer of `id`, zero-initialized on first access.
  Tensor& grad(std::uint32_t id);
  bool needs_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  std::vector<Node> nodes_;
  bool differentiated_ = false;
};

}  // namespace lesionlab
