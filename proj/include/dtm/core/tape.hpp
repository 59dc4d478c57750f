#pragma once

#include <span>
#include <vector>

#include "dtm/core/dense.hpp"
#include "dtm/core/params.hpp"

namespace dtm {

struct NodeId {
  int index = -1;
  friend bool operator==(NodeId, NodeId) = default;
};

// Reverse-mode tape over the handful of vector primitives the regression
// heads are built from. Every recording call evaluates eagerly and caches
// whatever its backward rule needs. Parameters are read through the ParamSet
// the tape was constructed with; it must outlive the tape.
class Tape {
 public:
  enum class Op {
    Input,
    Param,
    Linear,
    Outer,
    LayerNorm,
    Concat,
    Add,
    Sub,
    Scale,
    MulScalar,
    SquaredError,
  };

  struct Node {
    Op op;
    std::vector<int> args;
    ParamId p0{}, p1{};
    real constant = 0;
    Vec value;
    Vec aux;  // LayerNorm core
    real aux_scalar = 0;  // LayerNorm rstd
  };

  struct Gradients {
    GradMap params;
    std::vector<Vec> nodes;
    const Vec& wrt(NodeId id) const { return nodes.at(static_cast<std::size_t>(id.index)); }
  };

  explicit Tape(const ParamSet& params) : params_(&params) {}

  NodeId input(Vec value);
  NodeId param(ParamId id);
  NodeId linear(NodeId x, ParamId W, ParamId b);
  NodeId outer_flatten(NodeId u, NodeId v);
  NodeId layernorm(NodeId x, ParamId gamma, ParamId beta, real eps);
  NodeId concat(std::span<const NodeId> parts);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId a, real c);
  // x * s where s is a length-1 node
  NodeId mul_scalar(NodeId x, NodeId s);
  // sum_i (y_i - target)^2, a length-1 node
  NodeId squared_error(NodeId y, real target);

  const Vec& value(NodeId id) const { return node(id).value; }
  real scalar(NodeId id) const;
  const Node& node(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  const ParamSet& params() const { return *params_; }

  // Propagates `seed` from the scalar node `output` back through every
  // recorded operation in reverse order. Parameters not reached get zeros.
  Gradients backward(NodeId output, real seed = 1.0) const;

 private:
  NodeId push(Node n);

  const ParamSet* params_;
  std::vector<Node> nodes_;
};

}  // namespace dtm
