#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtm/heads/heads.hpp"
#include "dtm/train/trainer.hpp"

namespace dtm {

// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3): a relative error
// that turns into an absolute 1e-7 floor (at tolerance 1e-4) near zero.
real gradient_rel_error(real analytic, real numeric);

struct GradCheckEntry {
  std::string param;
  Eigen::Index index = 0;
  real analytic = 0;
  real numeric = 0;
  real rel_err = 0;
};

struct GradCheckResult {
  std::size_t checked = 0;
  real max_rel_err = 0;
  GradCheckEntry worst;

  bool passed(real tol = 1e-4) const { return max_rel_err < tol; }
  void merge(const GradCheckResult& other);
};

// Central differences (step h) of `loss` against `analytic` for every entry
// of every parameter. `loss` re-evaluates the objective from `params`.
GradCheckResult check_param_gradients(ParamSet& params, const GradMap& analytic,
                                      const std::function<real()>& loss, real h = 1e-4);

// Batch-objective check for a whole model: tape gradients of
// record_batch_loss vs central differences.
GradCheckResult gradcheck_model(Model& model, std::span<const Sample> batch, const TrainConfig& cfg,
                                real h = 1e-4);

struct GradCheckCase {
  std::vector<HeadKind> heads;  // one kind, or two for the ensemble objective
  int d_proj = 8;
  std::uint64_t seed = 0;
  TrackSet tracks = TrackSet::SeqStruct;
  int batch = 4;
};

// Random model (parameters jittered off their initial values) and random
// embeddings/labels, then gradcheck_model.
GradCheckResult run_gradcheck(const GradCheckCase& c);

}  // namespace dtm
