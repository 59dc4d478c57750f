#include "dtm/heads/heads.hpp"

#include <cmath>

#include "dtm/error.hpp"

namespace dtm {

std::string_view head_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::Head1Outer: return "head1";
    case HeadKind::Head2LNDiff: return "head2";
    case HeadKind::MutConcat: return "mut_concat";
    case HeadKind::MutLinComb: return "mut_lincomb";
    case HeadKind::ClsLinComb: return "cls_lincomb";
    case HeadKind::AvgPoolLinComb: return "avg_lincomb";
  }
  return "unknown";
}

HeadKind head_from_name(std::string_view name) {
  for (HeadKind k : kAllHeadKinds) {
    if (head_name(k) == name) return k;
  }
  throw ConfigError("unknown head kind '" + std::string(name) +
                    "' (expected head1, head2, mut_concat, mut_lincomb, cls_lincomb, avg_lincomb)");
}

void ModelConfig::validate() const {
  if (heads.empty() || heads.size() > 2) throw ConfigError("model needs one or two heads");
  if (heads.size() == 2 && heads[0] == heads[1]) throw ConfigError("ensemble heads must differ");
  if (d_raw < 1) throw ConfigError("d_raw must be >= 1");
  if (d_proj < 1) throw ConfigError("d_proj must be >= 1");
  if (!learned_projection && d_proj != d_raw) {
    throw ConfigError("identity projection requires d_proj == d_raw (" + std::to_string(d_proj) +
                      " vs " + std::to_string(d_raw) + ")");
  }
  if (!(ln_eps > 0)) throw ConfigError("ln_eps must be positive");
}

// ---------------------------------------------------------------------------

ParamId ParamBuilder::lookup(const std::string& name, int rows, int cols) {
  ++touched_;
  auto id = params_->find(name);
  if (!id) throw FormatError("checkpoint is missing parameter " + name);
  const Mat& m = params_->value(*id);
  if (m.rows() != rows || m.cols() != cols) {
    throw FormatError("parameter " + name + " has shape " + shape_of(m) + ", expected " +
                      shape_str(rows, cols));
  }
  return *id;
}

ParamId ParamBuilder::weight(const std::string& name, int rows, int cols) {
  if (!rng_) return lookup(name, rows, cols);
  ++touched_;
  const real bound = 1.0 / std::sqrt(static_cast<real>(cols));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng_->uniform(-bound, bound);
  return params_->add(name, std::move(m));
}

ParamId ParamBuilder::constant(const std::string& name, int n, real value) {
  if (!rng_) return lookup(name, n, 1);
  ++touched_;
  return params_->add_vector(name, Vec::Constant(n, value));
}

// ---------------------------------------------------------------------------

TrackProjection::TrackProjection(const ModelConfig& cfg, ParamBuilder& builder, bool with_avg)
    : d_proj_(cfg.d_proj), d_raw_(cfg.d_raw), learned_(cfg.learned_projection) {
  auto add_layer = [&](const std::string& track, TrackRole cls, TrackRole pos) {
    Layer layer{cls, pos, std::nullopt, std::nullopt};
    if (learned_) {
      layer.W = builder.weight("proj." + track + ".W", d_proj_, d_raw_);
      layer.b = builder.constant("proj." + track + ".b", d_proj_, 0.0);
    }
    layers_.push_back(layer);
  };
  add_layer("seq", TrackRole::SeqCls, TrackRole::SeqPos);
  if (cfg.tracks == TrackSet::SeqStruct) add_layer("struct", TrackRole::StructCls, TrackRole::StructPos);
  if (with_avg && learned_) {
    avg_W_ = builder.weight("proj.avg.W", d_proj_, d_raw_);
    avg_b_ = builder.constant("proj.avg.b", d_proj_, 0.0);
  }
}

NodeId TrackProjection::project(Tape& tape, const Vec& raw, const std::optional<ParamId>& W,
                                const std::optional<ParamId>& b) const {
  if (raw.size() != d_raw_) {
    throw DataError("embedding width " + std::to_string(raw.size()) + " != model d_raw " +
                    std::to_string(d_raw_));
  }
  const NodeId x = tape.input(raw);
  return learned_ ? tape.linear(x, *W, *b) : x;
}

FusedFeatures TrackProjection::record(Tape& tape, const EmbeddingBundle& wt,
                                      const EmbeddingBundle& mut, Needs needs) const {
  for (TrackRole role : kAllRoles) {
    if (wt.has(role) != mut.has(role)) {
      const auto& lacking = wt.has(role) ? mut : wt;
      throw DataError("track sets differ: " + lacking.variant_id + " lacks " +
                      std::string(role_name(role)));
    }
  }
  FusedFeatures f;
  auto fuse = [&](const EmbeddingBundle& b, bool cls) {
    std::vector<NodeId> parts;
    for (const auto& layer : layers_) {
      parts.push_back(project(tape, b.track(cls ? layer.cls_role : layer.pos_role), layer.W, layer.b));
    }
    return parts.size() == 1 ? parts.front() : tape.concat(parts);
  };
  if (needs.cls) {
    f.cls_w = fuse(wt, true);
    f.cls_m = fuse(mut, true);
  }
  if (needs.pos) {
    f.a_w = fuse(wt, false);
    f.a_m = fuse(mut, false);
  }
  if (needs.avg) {
    f.avg_w = project(tape, wt.track(TrackRole::Avg), avg_W_, avg_b_);
    f.avg_m = project(tape, mut.track(TrackRole::Avg), avg_W_, avg_b_);
  }
  return f;
}

// ---------------------------------------------------------------------------

TrackProjection::Needs Head::needs() const {
  switch (kind) {
    case HeadKind::Head1Outer:
    case HeadKind::MutConcat:
    case HeadKind::MutLinComb: return {false, true, false};
    case HeadKind::Head2LNDiff: return {true, true, false};
    case HeadKind::ClsLinComb: return {true, false, false};
    case HeadKind::AvgPoolLinComb: return {false, false, true};
  }
  return {};
}

Head make_head(HeadKind kind, int fused_width, int avg_width, ParamBuilder& builder,
               std::string prefix) {
  Head h;
  h.kind = kind;
  h.prefix = std::move(prefix);
  const int d = fused_width;
  int out_in = d;
  switch (kind) {
    case HeadKind::Head1Outer:
      h.kernel = {builder.weight(h.prefix + ".W", d, d * d), builder.constant(h.prefix + ".bW", d, 0.0)};
      break;
    case HeadKind::Head2LNDiff:
      h.kernel = {builder.constant(h.prefix + ".ln_cls.gamma", d, 1.0),
                  builder.constant(h.prefix + ".ln_cls.beta", d, 0.0),
                  builder.constant(h.prefix + ".ln_pos.gamma", d, 1.0),
                  builder.constant(h.prefix + ".ln_pos.beta", d, 0.0)};
      out_in = 2 * d;
      break;
    case HeadKind::MutConcat:
      out_in = 2 * d;
      break;
    case HeadKind::AvgPoolLinComb:
      out_in = avg_width;
      [[fallthrough]];
    case HeadKind::MutLinComb:
    case HeadKind::ClsLinComb:
      // starts as the plain difference x_w - x_m
      h.kernel = {builder.constant(h.prefix + ".mix_w", 1, 1.0),
                  builder.constant(h.prefix + ".mix_m", 1, -1.0)};
      break;
  }
  h.out_W = builder.weight(h.prefix + ".N.W", 1, out_in);
  h.out_b = builder.constant(h.prefix + ".N.b", 1, 0.0);
  return h;
}

NodeId Head::record(Tape& tape, const FusedFeatures& f, real ln_eps) const {
  auto need = [&](const std::optional<NodeId>& n, const char* what) {
    if (!n) throw DataError(std::string(head_name(kind)) + " head requires " + what + " features");
    return *n;
  };
  auto lincomb = [&](NodeId w, NodeId m) {
    const NodeId mixed = tape.add(tape.mul_scalar(w, tape.param(kernel[0])),
                                  tape.mul_scalar(m, tape.param(kernel[1])));
    return tape.linear(mixed, out_W, out_b);
  };

  switch (kind) {
    case HeadKind::Head1Outer: {
      const NodeId flat = tape.outer_flatten(need(f.a_m, "a_m"), need(f.a_w, "a_w"));
      return tape.linear(tape.linear(flat, kernel[0], kernel[1]), out_W, out_b);
    }
    case HeadKind::Head2LNDiff: {
      const NodeId cls = tape.layernorm(tape.sub(need(f.cls_w, "cls_w"), need(f.cls_m, "cls_m")),
                                        kernel[0], kernel[1], ln_eps);
      const NodeId pos = tape.layernorm(tape.sub(need(f.a_w, "a_w"), need(f.a_m, "a_m")),
                                        kernel[2], kernel[3], ln_eps);
      const NodeId parts[] = {cls, pos};
      return tape.linear(tape.concat(parts), out_W, out_b);
    }
    case HeadKind::MutConcat: {
      const NodeId parts[] = {need(f.a_w, "a_w"), need(f.a_m, "a_m")};
      return tape.linear(tape.concat(parts), out_W, out_b);
    }
    case HeadKind::MutLinComb: return lincomb(need(f.a_w, "a_w"), need(f.a_m, "a_m"));
    case HeadKind::ClsLinComb: return lincomb(need(f.cls_w, "cls_w"), need(f.cls_m, "cls_m"));
    case HeadKind::AvgPoolLinComb: return lincomb(need(f.avg_w, "avg_w"), need(f.avg_m, "avg_m"));
  }
  throw ConfigError("unhandled head kind");
}

real head_predict(const Head& head, const ParamSet& params, const HeadInputs& in, real ln_eps) {
  Tape tape(params);
  FusedFeatures f;
  auto maybe = [&](const Vec& v) -> std::optional<NodeId> {
    if (v.size() == 0) return std::nullopt;
    return tape.input(v);
  };
  f.cls_w = maybe(in.cls_w);
  f.cls_m = maybe(in.cls_m);
  f.a_w = maybe(in.a_w);
  f.a_m = maybe(in.a_m);
  f.avg_w = maybe(in.avg_w);
  f.avg_m = maybe(in.avg_m);
  return tape.scalar(head.record(tape, f, ln_eps));
}

// ---------------------------------------------------------------------------

std::size_t Model::build(Rng* rng) {
  cfg_.validate();
  ParamBuilder builder(params_, rng);
  bool with_avg = false;
  for (HeadKind k : cfg_.heads) with_avg |= k == HeadKind::AvgPoolLinComb;
  projection_ = TrackProjection(cfg_, builder, with_avg);
  heads_.clear();
  for (HeadKind k : cfg_.heads) {
    heads_.push_back(make_head(k, projection_.fused_width(), cfg_.d_proj, builder,
                               std::string(head_name(k))));
  }
  return builder.touched();
}

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
  Model m;
  m.cfg_ = cfg;
  Rng rng(seed);
  m.build(&rng);
  return m;
}

Model Model::from_params(const ModelConfig& cfg, ParamSet params) {
  Model m;
  m.cfg_ = cfg;
  m.params_ = std::move(params);
  const std::size_t bound = m.build(nullptr);
  if (bound != m.params_.size()) {
    throw FormatError("checkpoint holds " + std::to_string(m.params_.size()) +
                      " parameters, model layout uses " + std::to_string(bound));
  }
  return m;
}

Model::Outputs Model::record(Tape& tape, const EmbeddingBundle& wt, const EmbeddingBundle& mut) const {
  TrackProjection::Needs needs;
  for (const auto& h : heads_) {
    const auto n = h.needs();
    needs.cls |= n.cls;
    needs.pos |= n.pos;
    needs.avg |= n.avg;
  }
  const FusedFeatures f = projection_.record(tape, wt, mut, needs);
  Outputs out;
  for (const auto& h : heads_) out.heads.push_back(h.record(tape, f, cfg_.ln_eps));
  out.combined = out.heads.size() == 1 ? out.heads.front()
                                       : tape.scale(tape.add(out.heads[0], out.heads[1]), 0.5);
  return out;
}

Prediction Model::predict(const EmbeddingBundle& wt, const EmbeddingBundle& mut) const {
  Tape tape(params_);
  const auto out = record(tape, wt, mut);
  Prediction p;
  for (NodeId h : out.heads) p.heads.push_back(tape.scalar(h));
  p.value = tape.scalar(out.combined);
  return p;
}

std::vector<std::pair<std::string, std::size_t>> Model::parameter_report() const {
  std::vector<std::pair<std::string, std::size_t>> out;
  auto count_prefix = [&](const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& p : params_) {
      if (p.name.rfind(prefix + ".", 0) == 0) n += static_cast<std::size_t>(p.value.size());
    }
    return n;
  };
  out.emplace_back("projection", count_prefix("proj"));
  for (const auto& h : heads_) out.emplace_back(h.prefix, count_prefix(h.prefix));
  out.emplace_back("total", params_.scalar_count());
  return out;
}

}  // namespace dtm
