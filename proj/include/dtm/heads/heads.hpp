#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dtm/core/params.hpp"
#include "dtm/core/tape.hpp"
#include "dtm/data/bundle.hpp"
#include "dtm/data/synth.hpp"
#include "dtm/util/rng.hpp"

namespace dtm {

enum class HeadKind {
  Head1Outer,      // W * flatten(a_m (x) a_w), then linear -> scalar
  Head2LNDiff,     // LN(cls_w - cls_m) ++ LN(a_w - a_m), then linear -> scalar
  MutConcat,       // linear(a_w ++ a_m)
  MutLinComb,      // linear(alpha a_w + beta a_m)
  ClsLinComb,      // linear(alpha cls_w + beta cls_m)
  AvgPoolLinComb,  // linear(alpha avg_w + beta avg_m)
};

inline constexpr HeadKind kAllHeadKinds[] = {HeadKind::Head1Outer,  HeadKind::Head2LNDiff,
                                             HeadKind::MutConcat,   HeadKind::MutLinComb,
                                             HeadKind::ClsLinComb,  HeadKind::AvgPoolLinComb};

std::string_view head_name(HeadKind kind);
// Accepts the names produced by head_name. Throws ConfigError otherwise.
HeadKind head_from_name(std::string_view name);

struct ModelConfig {
  // One head, or two heads whose predictions are averaged. The default pair
  // is the outer-product / LayerNorm-difference ensemble.
  std::vector<HeadKind> heads{HeadKind::Head1Outer, HeadKind::Head2LNDiff};
  TrackSet tracks = TrackSet::Seq;
  int d_raw = 32;
  int d_proj = 128;
  // Identity projection requires d_proj == d_raw and adds no parameters.
  bool learned_projection = true;
  real ln_eps = 1e-5;

  bool is_ensemble() const { return heads.size() == 2; }
  void validate() const;
};

// Creates parameters (fresh init) or looks them up by name with a shape
// check (checkpoint restore), so both paths share one layout definition.
class ParamBuilder {
 public:
  ParamBuilder(ParamSet& params, Rng* rng) : params_(&params), rng_(rng) {}

  // Uniform in +-1/sqrt(cols).
  ParamId weight(const std::string& name, int rows, int cols);
  ParamId constant(const std::string& name, int n, real value);
  std::size_t touched() const { return touched_; }

 private:
  ParamId lookup(const std::string& name, int rows, int cols);
  ParamSet* params_;
  Rng* rng_;  // null when binding
  std::size_t touched_ = 0;
};

// Projected, track-fused features of one (wild-type, mutant) pair as tape
// nodes. Widths: cls/pos k * d_proj for k tracks, avg d_proj.
struct FusedFeatures {
  std::optional<NodeId> cls_w, cls_m, a_w, a_m, avg_w, avg_m;
};

// Per-track linear layers. The same layer maps the CLS and mutated-position
// vectors of its track; an extra layer maps the average-pool track when a
// head needs it.
class TrackProjection {
 public:
  TrackProjection() = default;
  TrackProjection(const ModelConfig& cfg, ParamBuilder& builder, bool with_avg);

  struct Needs {
    bool cls = false, pos = false, avg = false;
  };
  FusedFeatures record(Tape& tape, const EmbeddingBundle& wt, const EmbeddingBundle& mut,
                       Needs needs) const;

  int fused_width() const { return static_cast<int>(layers_.size()) * d_proj_; }
  int d_proj() const { return d_proj_; }

 private:
  struct Layer {
    TrackRole cls_role, pos_role;
    std::optional<ParamId> W, b;
  };
  NodeId project(Tape& tape, const Vec& raw, const std::optional<ParamId>& W,
                 const std::optional<ParamId>& b) const;

  std::vector<Layer> layers_;
  std::optional<ParamId> avg_W_, avg_b_;
  int d_proj_ = 0;
  int d_raw_ = 0;
  bool learned_ = true;
};

// One regression head: its kind and the parameters it owns.
struct Head {
  HeadKind kind = HeadKind::Head1Outer;
  std::string prefix;
  // Head1: kernel W (d x d^2) + bias. Head2: LayerNorm pairs. LinComb: the
  // two mixing scalars (1-vectors).
  std::vector<ParamId> kernel;
  ParamId out_W{}, out_b{};

  TrackProjection::Needs needs() const;
  NodeId record(Tape& tape, const FusedFeatures& f, real ln_eps) const;
};

Head make_head(HeadKind kind, int fused_width, int avg_width, ParamBuilder& builder,
               std::string prefix);

// Already-projected head inputs; unused members may stay empty.
struct HeadInputs {
  Vec cls_w, cls_m, a_w, a_m, avg_w, avg_m;
};

// Evaluates one head directly on projected features.
real head_predict(const Head& head, const ParamSet& params, const HeadInputs& in,
                  real ln_eps = 1e-5);

struct Prediction {
  std::vector<real> heads;  // one entry per head
  real value = 0;           // mean of the heads (or the single head)
};

// Projection plus one or two heads over a shared ParamSet.
class Model {
 public:
  static Model init(const ModelConfig& cfg, std::uint64_t seed);
  // Takes ownership of parameters restored from disk; validates names/shapes.
  static Model from_params(const ModelConfig& cfg, ParamSet params);

  const ModelConfig& config() const { return cfg_; }
  const ParamSet& params() const { return params_; }
  ParamSet& params() { return params_; }
  const std::vector<Head>& heads() const { return heads_; }
  const TrackProjection& projection() const { return projection_; }

  struct Outputs {
    std::vector<NodeId> heads;
    NodeId combined;
  };
  Outputs record(Tape& tape, const EmbeddingBundle& wt, const EmbeddingBundle& mut) const;
  Prediction predict(const EmbeddingBundle& wt, const EmbeddingBundle& mut) const;

  // (component, scalar parameter count) for the projection and each head.
  std::vector<std::pair<std::string, std::size_t>> parameter_report() const;

 private:
  Model() = default;
  std::size_t build(Rng* rng);

  ModelConfig cfg_;
  ParamSet params_;
  TrackProjection projection_;
  std::vector<Head> heads_;
};

}  // namespace dtm
