#pragma once

#include <cstdint>

#include "dtm/core/params.hpp"

namespace dtm {

struct ClipConfig {
  real max_norm = 0.1;
};

struct ClipResult {
  real pre_norm = 0;
  real post_norm = 0;
  bool clipped = false;
};

// Scales every gradient by max_norm / ||g|| when the global L2 norm over all
// tensors exceeds max_norm. The scale is nudged down until the recomputed
// norm is <= max_norm, which makes clipping exactly idempotent. Throws
// NumericError naming the first non-finite parameter gradient.
ClipResult clip_global_norm(GradMap& grads, const ClipConfig& cfg, const ParamSet* names = nullptr);

struct AdamConfig {
  real beta1 = 0.9;
  real beta2 = 0.999;
  real eps = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<Mat> m, v;

  static AdamState zeros_like(const ParamSet& params);
};

// Bias-corrected Adam, no weight decay:
//   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
//   p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, const AdamConfig& cfg,
               real lr);

struct OneCycleSchedule {
  real max_lr = 1e-5;
  std::int64_t total_steps = 1;
  real pct_start = 0.3;
  real div_factor = 25.0;
  real final_div_factor = 1e4;

  std::int64_t peak_step() const;
  real initial_lr() const { return max_lr / div_factor; }
  real final_lr() const { return max_lr / final_div_factor; }
  void validate() const;
};

// Steps run 0 .. total_steps-1; peak = floor(pct_start * (total_steps-1)).
// Cosine warm-up from max_lr/div_factor to max_lr over [0, peak], then cosine
// anneal to max_lr/final_div_factor over [peak, total_steps-1], so the last
// optimizer step uses the final rate. Endpoints are returned exactly.
real onecycle_lr(std::int64_t step, const OneCycleSchedule& sched);

}  // namespace dtm
