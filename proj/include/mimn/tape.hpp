#pragma once

#include <map>
#include <string>
#include <vector>

#include "mimn/tensor.hpp"

namespace mimn {

// Gradients keyed by parameter name. Shapes always match the parameter.
using GradientSet = std::map<std::string, Tensor>;

// The closed set of differentiable primitives. The whole model is expressed
// in these; the backward pass handles each one explicitly.
enum class OpKind {
  kLeaf,
  kMatmul,      // {r,k}x{k,c} -> {r,c},  {r,k}x{k} -> {r}
  kAdd,
  kSub,
  kMul,         // elementwise, same shape
  kScale,       // x * alpha
  kAddConst,    // x + alpha
  kSoftmax,     // vector
  kSigmoid,
  kTanh,
  kCosine,      // cosine similarity of two vectors, norms padded by kNormEps
  kConcat,      // vectors -> vector
  kSlice,       // contiguous vector range
  kReduceSum,   // -> scalar
  kSumRows,     // {m,d} -> {d}, sum over rows
  kOuter,       // {m} x {d} -> {m,d}
  kRow,         // {m,d}, i -> {d}
  kStackRows,   // n vectors of width d -> {n,d}
  kBroadcast,   // scalar -> {n}
  kSoftmaxXent, // logits, class index -> scalar cross-entropy
};

const char* op_name(OpKind k);

// Epsilon added to each norm in cosine similarity so zero-initialized memory
// slots address without dividing by zero.
inline constexpr double kNormEps = 1e-8;

// Record of a forward computation. Node values are materialized eagerly;
// backward() walks the record in exact reverse order. Replaying the record
// forward reproduces every node value bit-identically.
class Tape {
 public:
  using NodeId = int;

  // -- graph construction ---------------------------------------------------
  NodeId leaf(Tensor value);
  // Leaf tied to a named trainable parameter; grads() collects these.
  NodeId param(const std::string& name, const Tensor& value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double alpha);
  NodeId add_const(NodeId a, double alpha);
  NodeId softmax(NodeId v);
  NodeId sigmoid(NodeId a);
  NodeId tanh_(NodeId a);
  NodeId cosine(NodeId a, NodeId b);
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId slice(NodeId v, int start, int len);
  NodeId reduce_sum(NodeId a);
  NodeId sum_rows(NodeId m);
  NodeId outer(NodeId u, NodeId v);
  NodeId row(NodeId m, int i);
  NodeId stack_rows(const std::vector<NodeId>& rows);
  NodeId broadcast(NodeId scalar, int n);
  NodeId softmax_xent(NodeId logits, int label);

  // -- access ---------------------------------------------------------------
  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

  // -- backward -------------------------------------------------------------
  // Accumulates d loss / d node for every node. loss must be scalar.
  void backward(NodeId loss);
  // Zero tensor of the node's shape when the node is off the loss path.
  Tensor grad(NodeId id) const;
  // Gradients of all named parameter leaves, keyed by name.
  GradientSet grads() const;
  // Adds named-leaf gradients into an existing set (allocating zero entries
  // on first use); avoids per-sample copies in the training loop.
  void accumulate_grads(GradientSet& into) const;

  // Re-executes every recorded op from the stored leaf values and verifies
  // the outputs are bit-identical to the first pass. Returns false on any
  // mismatch (which would indicate a nondeterministic primitive).
  bool replay_matches();

 private:
  struct Node {
    OpKind kind;
    int a = -1, b = -1;          // binary/unary inputs
    std::vector<int> inputs;     // concat / stack_rows
    double alpha = 0.0;          // scale / add_const
    int i0 = 0, i1 = 0;          // slice start/len, row index, class label
    Tensor value;
    std::string name;            // named parameter leaves only
  };

  NodeId push(Node n);
  Tensor compute(const Node& n) const;
  const Node& at(NodeId id) const { return nodes_[static_cast<size_t>(id)]; }

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  bool has_grads_ = false;
};

}  // namespace mimn
