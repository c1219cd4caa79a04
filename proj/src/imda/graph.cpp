#include "imda/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "imda/error.hpp"

namespace imda {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kAffine: return "affine";
    case OpKind::kRelu: return "relu";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kPick: return "pick";
    case OpKind::kAbs: return "abs";
    case OpKind::kDropout: return "dropout";
    case OpKind::kMean: return "mean";
    case OpKind::kScale: return "scale";
    case OpKind::kAdd: return "add";
    case OpKind::kReverseGradient: return "reverse_gradient";
  }
  return "unknown";
}

std::size_t Graph::add_block(Layout layout) {
  blocks_.push_back(std::move(layout));
  forwarded_ = false;
  return blocks_.size() - 1;
}

NodeId Graph::push(OpKind kind, std::vector<std::size_t> inputs, std::string name,
                   double scalar) {
  for (auto i : inputs)
    if (i >= nodes_.size()) throw ShapeError("graph: input node does not exist");
  if (name.empty()) name = std::string(op_name(kind)) + "#" + std::to_string(nodes_.size());
  Node node{kind, std::move(inputs), std::move(name), scalar, 0, 0, Matrix{}, Matrix{}, false};
  nodes_.push_back(std::move(node));
  forwarded_ = false;
  return NodeId{nodes_.size() - 1};
}

void Graph::check_node(NodeId node) const {
  if (node.index >= nodes_.size()) throw ShapeError("graph: unknown node");
}

NodeId Graph::input(std::string name) { return push(OpKind::kInput, {}, std::move(name)); }

NodeId Graph::parameter(std::size_t block, std::size_t entry) {
  if (block >= blocks_.size()) throw ShapeError("graph: unknown parameter block");
  const auto& e = blocks_[block].entry(entry);
  auto id = push(OpKind::kParameter, {}, "block" + std::to_string(block) + "." + e.name);
  nodes_.back().block = block;
  nodes_.back().entry = entry;
  return id;
}

NodeId Graph::affine(NodeId x, NodeId weight, NodeId bias, std::string name) {
  return push(OpKind::kAffine, {x.index, weight.index, bias.index}, std::move(name));
}
NodeId Graph::relu(NodeId x, std::string name) {
  return push(OpKind::kRelu, {x.index}, std::move(name));
}
NodeId Graph::log_softmax(NodeId x, std::string name) {
  return push(OpKind::kLogSoftmax, {x.index}, std::move(name));
}
NodeId Graph::pick(NodeId x, NodeId labels, std::string name) {
  return push(OpKind::kPick, {x.index, labels.index}, std::move(name));
}
NodeId Graph::abs(NodeId x, std::string name) {
  return push(OpKind::kAbs, {x.index}, std::move(name));
}
NodeId Graph::dropout(NodeId x, NodeId mask, std::string name) {
  return push(OpKind::kDropout, {x.index, mask.index}, std::move(name));
}
NodeId Graph::mean(NodeId x, std::string name) {
  return push(OpKind::kMean, {x.index}, std::move(name));
}
NodeId Graph::scale(NodeId x, double factor, std::string name) {
  return push(OpKind::kScale, {x.index}, std::move(name), factor);
}
NodeId Graph::add(NodeId a, NodeId b, std::string name) {
  return push(OpKind::kAdd, {a.index, b.index}, std::move(name));
}
NodeId Graph::reverse_gradient(NodeId x, double lambda, std::string name) {
  return push(OpKind::kReverseGradient, {x.index}, std::move(name), lambda);
}

void Graph::set_input(NodeId node, Matrix value) {
  check_node(node);
  auto& n = nodes_[node.index];
  if (n.kind != OpKind::kInput) fail(n, "set_input on a non-input node");
  n.value = std::move(value);
  n.has_value = true;
  forwarded_ = false;
}

void Graph::fail(const Node& node, const std::string& what) const {
  throw ShapeError("node '" + node.name + "' (" + op_name(node.kind) + "): " + what);
}

void Graph::evaluate(Node& node) {
  auto in = [&](std::size_t i) -> const Matrix& { return nodes_[node.inputs[i]].value; };
  switch (node.kind) {
    case OpKind::kInput:
      if (!node.has_value) fail(node, "input was never set");
      return;
    case OpKind::kParameter:
      return;  // filled by forward()
    case OpKind::kAffine: {
      const Matrix& x = in(0);
      const Matrix& w = in(1);
      const Matrix& b = in(2);
      if (x.cols() != w.rows())
        fail(node, "input " + x.shape_string() + " does not match weight " + w.shape_string());
      if (b.rows() != 1 || b.cols() != w.cols())
        fail(node, "bias " + b.shape_string() + " does not match weight " + w.shape_string());
      Matrix y = matmul(x, w);
      for (std::size_t r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        for (std::size_t c = 0; c < y.cols(); ++c) row[c] += b(0, c);
      }
      node.value = std::move(y);
      return;
    }
    case OpKind::kRelu: {
      Matrix y = in(0);
      for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
      node.value = std::move(y);
      return;
    }
    case OpKind::kLogSoftmax: {
      Matrix y = in(0);
      if (y.cols() == 0) fail(node, "log-softmax over zero columns");
      for (std::size_t r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - mx);
        const double lse = mx + std::log(s);
        for (double& v : row) v -= lse;
      }
      node.value = std::move(y);
      return;
    }
    case OpKind::kPick: {
      const Matrix& x = in(0);
      const Matrix& labels = in(1);
      if (labels.rows() != x.rows() || labels.cols() != 1)
        fail(node, "labels " + labels.shape_string() + " do not match " + x.shape_string());
      Matrix y(x.rows(), 1);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        const double l = labels(r, 0);
        if (l < 0 || l >= static_cast<double>(x.cols()) || l != std::floor(l))
          fail(node, "label " + std::to_string(l) + " outside [0, " +
                         std::to_string(x.cols()) + ")");
        y(r, 0) = x(r, static_cast<std::size_t>(l));
      }
      node.value = std::move(y);
      return;
    }
    case OpKind::kAbs: {
      Matrix y = in(0);
      for (double& v : y.values()) v = std::fabs(v);
      node.value = std::move(y);
      return;
    }
    case OpKind::kDropout: {
      const Matrix& x = in(0);
      const Matrix& mask = in(1);
      if (mask.rows() != x.rows() || mask.cols() != x.cols())
        fail(node, "mask " + mask.shape_string() + " does not match " + x.shape_string());
      Matrix y = x;
      for (std::size_t i = 0; i < y.size(); ++i) y.values()[i] *= mask.values()[i];
      node.value = std::move(y);
      return;
    }
    case OpKind::kMean: {
      const Matrix& x = in(0);
      if (x.empty()) fail(node, "mean of an empty matrix");
      double s = 0.0;
      for (double v : x.values()) s += v;
      node.value = Matrix(1, 1, s / static_cast<double>(x.size()));
      return;
    }
    case OpKind::kScale: {
      Matrix y = in(0);
      for (double& v : y.values()) v *= node.scalar;
      node.value = std::move(y);
      return;
    }
    case OpKind::kAdd: {
      const Matrix& a = in(0);
      const Matrix& b = in(1);
      if (a.rows() != b.rows() || a.cols() != b.cols())
        fail(node, "operands " + a.shape_string() + " and " + b.shape_string());
      Matrix y = a;
      for (std::size_t i = 0; i < y.size(); ++i) y.values()[i] += b.values()[i];
      node.value = std::move(y);
      return;
    }
    case OpKind::kReverseGradient:
      node.value = in(0);
      return;
  }
}

void Graph::forward(std::span<const ParameterVector> blocks) {
  if (blocks.size() != blocks_.size())
    throw ShapeError("forward: expected " + std::to_string(blocks_.size()) +
                     " parameter blocks, got " + std::to_string(blocks.size()));
  for (std::size_t b = 0; b < blocks.size(); ++b)
    if (!(blocks[b].layout() == blocks_[b]))
      throw ShapeError("forward: parameter block " + std::to_string(b) +
                       " does not match the graph layout");
  for (auto& node : nodes_) {
    if (node.kind == OpKind::kParameter) {
      node.value = blocks[node.block].matrix(node.entry);
      node.has_value = true;
    } else {
      evaluate(node);
    }
  }
  forwarded_ = true;
  backwarded_ = false;
}

const Matrix& Graph::value(NodeId node) const {
  check_node(node);
  if (!forwarded_) throw NumericError("value: graph has not been forwarded");
  return nodes_[node.index].value;
}

const Matrix& Graph::adjoint(NodeId node) const {
  check_node(node);
  if (!backwarded_) throw NumericError("adjoint: backward has not been run");
  return nodes_[node.index].adjoint;
}

namespace {

void accumulate(Matrix& target, const Matrix& contribution) {
  if (target.empty()) {
    target = contribution;
    return;
  }
  for (std::size_t i = 0; i < target.size(); ++i) target.values()[i] += contribution.values()[i];
}

}  // namespace

std::vector<ParameterVector> Graph::backward(NodeId output, const std::optional<Matrix>& seed) {
  check_node(output);
  if (!forwarded_) throw NumericError("backward called before forward");
  for (auto& node : nodes_) node.adjoint = Matrix();

  Node& out = nodes_[output.index];
  if (seed) {
    if (seed->rows() != out.value.rows() || seed->cols() != out.value.cols())
      fail(out, "seed " + seed->shape_string() + " does not match output " +
                    out.value.shape_string());
    out.adjoint = *seed;
  } else {
    if (out.value.rows() != 1 || out.value.cols() != 1)
      fail(out, "backward without a seed needs a scalar output");
    out.adjoint = Matrix(1, 1, 1.0);
  }

  std::vector<ParameterVector> grads;
  grads.reserve(blocks_.size());
  for (const auto& layout : blocks_) grads.emplace_back(layout);

  for (std::size_t idx = output.index + 1; idx-- > 0;) {
    Node& node = nodes_[idx];
    if (node.adjoint.empty()) continue;
    const Matrix& dy = node.adjoint;
    auto give = [&](std::size_t slot, const Matrix& d) { accumulate(nodes_[node.inputs[slot]].adjoint, d); };
    auto in = [&](std::size_t i) -> const Matrix& { return nodes_[node.inputs[i]].value; };

    switch (node.kind) {
      case OpKind::kInput:
        break;
      case OpKind::kParameter: {
        auto dst = grads[node.block].entry_values(node.entry);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += dy.values()[i];
        break;
      }
      case OpKind::kAffine: {
        const Matrix& x = in(0);
        const Matrix& w = in(1);
        give(0, matmul_nt(dy, w));
        give(1, matmul_tn(x, dy));
        Matrix db(1, dy.cols());
        for (std::size_t r = 0; r < dy.rows(); ++r)
          for (std::size_t c = 0; c < dy.cols(); ++c) db(0, c) += dy(r, c);
        give(2, db);
        break;
      }
      case OpKind::kRelu: {
        const Matrix& x = in(0);
        Matrix dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
          if (!(x.values()[i] > 0.0)) dx.values()[i] = 0.0;
        give(0, dx);
        break;
      }
      case OpKind::kLogSoftmax: {
        const Matrix& y = node.value;
        Matrix dx = dy;
        for (std::size_t r = 0; r < dx.rows(); ++r) {
          double s = 0.0;
          for (double v : dy.row(r)) s += v;
          auto row = dx.row(r);
          const auto yr = y.row(r);
          for (std::size_t c = 0; c < row.size(); ++c) row[c] -= std::exp(yr[c]) * s;
        }
        give(0, dx);
        break;
      }
      case OpKind::kPick: {
        const Matrix& x = in(0);
        const Matrix& labels = in(1);
        Matrix dx(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r)
          dx(r, static_cast<std::size_t>(labels(r, 0))) = dy(r, 0);
        give(0, dx);
        break;
      }
      case OpKind::kAbs: {
        const Matrix& x = in(0);
        Matrix dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) {
          const double v = x.values()[i];
          dx.values()[i] *= v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
        }
        give(0, dx);
        break;
      }
      case OpKind::kDropout: {
        const Matrix& mask = in(1);
        Matrix dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] *= mask.values()[i];
        give(0, dx);
        break;
      }
      case OpKind::kMean: {
        const Matrix& x = in(0);
        give(0, Matrix(x.rows(), x.cols(), dy(0, 0) / static_cast<double>(x.size())));
        break;
      }
      case OpKind::kScale: {
        Matrix dx = dy;
        for (double& v : dx.values()) v *= node.scalar;
        give(0, dx);
        break;
      }
      case OpKind::kAdd:
        give(0, dy);
        give(1, dy);
        break;
      case OpKind::kReverseGradient: {
        Matrix dx = dy;
        for (double& v : dx.values()) v *= -node.scalar;
        give(0, dx);
        break;
      }
    }
  }
  backwarded_ = true;
  return grads;
}

double finite_diff_check(Graph& graph, NodeId output, std::span<const ParameterVector> blocks,
                         double step) {
  graph.forward(blocks);
  const Matrix& out = graph.value(output);
  if (out.rows() != 1 || out.cols() != 1)
    throw ShapeError("finite_diff_check: output '" + graph.name(output) + "' is " +
                     out.shape_string() + ", not scalar");
  const auto analytic = graph.backward(output);

  std::vector<ParameterVector> probe(blocks.begin(), blocks.end());
  double worst = 0.0;
  for (std::size_t b = 0; b < probe.size(); ++b) {
    auto values = probe[b].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      graph.forward(probe);
      const double plus = graph.value(output)(0, 0);
      values[i] = original - step;
      graph.forward(probe);
      const double minus = graph.value(output)(0, 0);
      values[i] = original;
      const double central = (plus - minus) / (2.0 * step);
      const double a = analytic[b].values()[i];
      const double err = std::fabs(a - central) / (std::fabs(a) + std::fabs(central) + 1e-12);
      worst = std::max(worst, err);
    }
  }
  graph.forward(blocks);
  return worst;
}

}  // namespace imda
