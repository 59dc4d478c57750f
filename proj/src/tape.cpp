#include "dtm/core/tape.hpp"

#include <cmath>

namespace dtm {

namespace {

void accumulate(Vec& slot, const Vec& g) {
  if (slot.size() == 0) {
    slot = g;
  } else {
    slot += g;
  }
}

}  // namespace

const Tape::Node& Tape::node(NodeId id) const {
  if (id.index < 0 || static_cast<std::size_t>(id.index) >= nodes_.size()) {
    throw StateError("tape: node " + std::to_string(id.index) + " was never recorded");
  }
  return nodes_[static_cast<std::size_t>(id.index)];
}

real Tape::scalar(NodeId id) const {
  const Vec& v = value(id);
  if (v.size() != 1) throw ConfigError("tape: node is not scalar: " + shape_of(v));
  return v[0];
}

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return {static_cast<int>(nodes_.size()) - 1};
}

NodeId Tape::input(Vec value) {
  Node n{Op::Input, {}, {}, {}, 0, std::move(value), {}, 0};
  return push(std::move(n));
}

NodeId Tape::param(ParamId id) {
  Node n{Op::Param, {}, id, {}, 0, Vec(params_->vector(id)), {}, 0};
  return push(std::move(n));
}

NodeId Tape::linear(NodeId x, ParamId W, ParamId b) {
  Vec y = linear_forward<real>(value(x), params_->value(W), Vec(params_->vector(b)));
  return push({Op::Linear, {x.index}, W, b, 0, std::move(y), {}, 0});
}

NodeId Tape::outer_flatten(NodeId u, NodeId v) {
  Vec y = dtm::outer_flatten<real>(value(u), value(v));
  return push({Op::Outer, {u.index, v.index}, {}, {}, 0, std::move(y), {}, 0});
}

NodeId Tape::layernorm(NodeId x, ParamId gamma, ParamId beta, real eps) {
  const Vec g = params_->vector(gamma);
  const Vec b = params_->vector(beta);
  const Vec& xv = value(x);
  if (g.size() != xv.size() || b.size() != xv.size()) {
    throw ConfigError("layernorm: affine " + shape_of(g) + " incompatible with input " +
                      shape_of(xv));
  }
  auto cache = layernorm_core<real>(xv, eps);
  Vec y = g.cwiseProduct(cache.core) + b;
  return push({Op::LayerNorm, {x.index}, gamma, beta, eps, std::move(y), std::move(cache.core),
               cache.rstd});
}

NodeId Tape::concat(std::span<const NodeId> parts) {
  if (parts.empty()) throw ConfigError("concat: empty part list");
  std::vector<Vec> values;
  std::vector<int> args;
  for (NodeId p : parts) {
    values.push_back(value(p));
    args.push_back(p.index);
  }
  Vec y = dtm::concat<real>(std::span<const Vec>(values));
  return push({Op::Concat, std::move(args), {}, {}, 0, std::move(y), {}, 0});
}

NodeId Tape::add(NodeId a, NodeId b) {
  if (value(a).size() != value(b).size()) {
    throw ConfigError("add: " + shape_of(value(a)) + " vs " + shape_of(value(b)));
  }
  Vec y = value(a) + value(b);
  return push({Op::Add, {a.index, b.index}, {}, {}, 0, std::move(y), {}, 0});
}

NodeId Tape::sub(NodeId a, NodeId b) {
  if (value(a).size() != value(b).size()) {
    throw ConfigError("sub: " + shape_of(value(a)) + " vs " + shape_of(value(b)));
  }
  Vec y = value(a) - value(b);
  return push({Op::Sub, {a.index, b.index}, {}, {}, 0, std::move(y), {}, 0});
}

NodeId Tape::scale(NodeId a, real c) {
  Vec y = c * value(a);
  return push({Op::Scale, {a.index}, {}, {}, c, std::move(y), {}, 0});
}

NodeId Tape::mul_scalar(NodeId x, NodeId s) {
  const real sv = scalar(s);
  Vec y = sv * value(x);
  return push({Op::MulScalar, {x.index, s.index}, {}, {}, 0, std::move(y), {}, 0});
}

NodeId Tape::squared_error(NodeId y, real target) {
  Vec out(1);
  out[0] = (value(y).array() - target).square().sum();
  return push({Op::SquaredError, {y.index}, {}, {}, target, std::move(out), {}, 0});
}

Tape::Gradients Tape::backward(NodeId output, real seed) const {
  if (nodes_.empty()) throw StateError("backward called before any forward operation was recorded");
  const Node& out = node(output);
  if (out.value.size() != 1) {
    throw StateError("backward requires a scalar output, got " + shape_of(out.value));
  }

  Gradients g;
  g.params = params_->zeros_like();
  g.nodes.assign(nodes_.size(), Vec());
  g.nodes[static_cast<std::size_t>(output.index)] = Vec::Constant(1, seed);

  for (int i = output.index; i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    Vec& gy_slot = g.nodes[static_cast<std::size_t>(i)];
    if (gy_slot.size() == 0) continue;  // not on any path to the output
    const Vec gy = gy_slot;
    auto arg = [&](std::size_t k) -> Vec& { return g.nodes[static_cast<std::size_t>(n.args[k])]; };
    auto arg_value = [&](std::size_t k) -> const Vec& {
      return nodes_[static_cast<std::size_t>(n.args[k])].value;
    };

    switch (n.op) {
      case Op::Input:
        break;
      case Op::Param:
        g.params[n.p0.index].col(0) += gy;
        break;
      case Op::Linear: {
        // Same rule as linear_backward, accumulated in place: W can be d x d^2.
        const Mat& W = params_->value(n.p0);
        g.params[n.p0.index].noalias() += gy * arg_value(0).transpose();
        g.params[n.p1.index].col(0) += gy;
        accumulate(arg(0), W.transpose() * gy);
        break;
      }
      case Op::Outer: {
        auto [gu, gv] = outer_flatten_backward<real>(arg_value(0), arg_value(1), gy);
        accumulate(arg(0), gu);
        accumulate(arg(1), gv);
        break;
      }
      case Op::LayerNorm: {
        const Vec gamma = params_->vector(n.p0);
        auto lg = layernorm_backward<real>({n.aux, n.aux_scalar}, gamma, gy);
        g.params[n.p0.index].col(0) += lg.gamma;
        g.params[n.p1.index].col(0) += lg.beta;
        accumulate(arg(0), lg.x);
        break;
      }
      case Op::Concat: {
        Eigen::Index at = 0;
        for (std::size_t k = 0; k < n.args.size(); ++k) {
          const Eigen::Index len = arg_value(k).size();
          accumulate(arg(k), gy.segment(at, len));
          at += len;
        }
        break;
      }
      case Op::Add:
        accumulate(arg(0), gy);
        accumulate(arg(1), gy);
        break;
      case Op::Sub:
        accumulate(arg(0), gy);
        accumulate(arg(1), -gy);
        break;
      case Op::Scale:
        accumulate(arg(0), n.constant * gy);
        break;
      case Op::MulScalar: {
        const real s = arg_value(1)[0];
        Vec gs(1);
        gs[0] = gy.dot(arg_value(0));
        accumulate(arg(0), s * gy);
        accumulate(arg(1), gs);
        break;
      }
      case Op::SquaredError: {
        const Vec d = 2.0 * (arg_value(0).array() - n.constant).matrix();
        accumulate(arg(0), gy[0] * d);
        break;
      }
    }
  }

  // Nodes not on a path to the output get explicit zeros.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (g.nodes[i].size() == 0) g.nodes[i] = Vec::Zero(nodes_[i].value.size());
  }
  return g;
}

}  // namespace dtm
