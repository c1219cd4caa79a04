#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "imda/matrix.hpp"
#include "imda/parameters.hpp"

namespace imda {

enum class OpKind {
  kInput,
  kParameter,
  kAffine,           // x W + b, W stored (in x out), b (1 x out)
  kRelu,
  kLogSoftmax,       // row-wise
  kPick,             // y_i = x(i, label_i), labels from an input node
  kAbs,
  kDropout,          // x * mask, mask from an input node
  kMean,             // mean of all entries -> 1x1
  kScale,
  kAdd,
  kReverseGradient,  // identity forward, adjoint * -lambda backward
};

const char* op_name(OpKind kind);

struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

// Static computation graph with reverse-mode differentiation.
//
// Nodes are created in topological order. Values are (re)computed by
// forward() from the bound inputs and parameter blocks; backward() then
// propagates adjoints from a chosen output. Parameters live in blocks, each
// described by a Layout, so one graph can span u, v and v' at once.
class Graph {
 public:
  std::size_t add_block(Layout layout);
  const Layout& block_layout(std::size_t block) const { return blocks_.at(block); }
  std::size_t num_blocks() const { return blocks_.size(); }

  NodeId input(std::string name);
  NodeId parameter(std::size_t block, std::size_t entry);

  NodeId affine(NodeId x, NodeId weight, NodeId bias, std::string name = {});
  NodeId relu(NodeId x, std::string name = {});
  NodeId log_softmax(NodeId x, std::string name = {});
  NodeId pick(NodeId x, NodeId labels, std::string name = {});
  NodeId abs(NodeId x, std::string name = {});
  NodeId dropout(NodeId x, NodeId mask, std::string name = {});
  NodeId mean(NodeId x, std::string name = {});
  NodeId scale(NodeId x, double factor, std::string name = {});
  NodeId add(NodeId a, NodeId b, std::string name = {});
  NodeId reverse_gradient(NodeId x, double lambda, std::string name = {});

  void set_input(NodeId node, Matrix value);

  // Evaluates every node. `blocks` must match the registered layouts.
  void forward(std::span<const ParameterVector> blocks);

  // Gradient of the seeded output with respect to every parameter block.
  // A 1x1 output may omit the seed (defaults to 1).
  std::vector<ParameterVector> backward(NodeId output,
                                        const std::optional<Matrix>& seed = std::nullopt);

  const Matrix& value(NodeId node) const;
  // Adjoint of a node after the last backward(); zero-sized when the node
  // did not receive any.
  const Matrix& adjoint(NodeId node) const;

  OpKind kind(NodeId node) const { return nodes_.at(node.index).kind; }
  const std::string& name(NodeId node) const { return nodes_.at(node.index).name; }
  std::size_t size() const { return nodes_.size(); }
  bool forwarded() const { return forwarded_; }

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    std::string name;
    double scalar = 0.0;
    std::size_t block = 0;
    std::size_t entry = 0;
    Matrix value;
    Matrix adjoint;
    bool has_value = false;
  };

  NodeId push(OpKind kind, std::vector<std::size_t> inputs, std::string name,
              double scalar = 0.0);
  void check_node(NodeId node) const;
  void evaluate(Node& node);
  [[noreturn]] void fail(const Node& node, const std::string& what) const;

  std::vector<Layout> blocks_;
  std::vector<Node> nodes_;
  bool forwarded_ = false;
  bool backwarded_ = false;
};

// Max over parameter coordinates of
//   |analytic - central| / (|analytic| + |central| + 1e-12)
// for the scalar `output`. Leaves the graph forwarded at `blocks`.
double finite_diff_check(Graph& graph, NodeId output, std::span<const ParameterVector> blocks,
                         double step);

}  // namespace imda
