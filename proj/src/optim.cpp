#include "dtm/optim/optim.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "dtm/error.hpp"

namespace dtm {

ClipResult clip_global_norm(GradMap& grads, const ClipConfig& cfg, const ParamSet* names) {
  if (!(cfg.max_norm > 0)) throw ConfigError("clip max_norm must be positive");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!all_finite(grads[i])) {
      const std::string who =
          names && i < names->size() ? (*names)[i].name : "#" + std::to_string(i);
      throw NumericError("non-finite gradient for parameter " + who);
    }
  }
  ClipResult r;
  r.pre_norm = global_norm(grads);
  r.post_norm = r.pre_norm;
  if (r.pre_norm <= cfg.max_norm) return r;

  const GradMap original = grads;
  real scale = cfg.max_norm / r.pre_norm;
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (std::size_t i = 0; i < grads.size(); ++i) grads[i] = original[i] * scale;
    r.post_norm = global_norm(grads);
    if (r.post_norm <= cfg.max_norm) break;
    scale = std::nextafter(scale, 0.0);
  }
  r.clipped = true;
  return r;
}

AdamState AdamState::zeros_like(const ParamSet& params) {
  return {0, params.zeros_like(), params.zeros_like()};
}

void adam_step(ParamSet& params, const GradMap& grads, AdamState& state, const AdamConfig& cfg,
               real lr) {
  if (!(lr > 0)) throw ConfigError("adam: learning rate must be positive");
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ConfigError("adam: " + std::to_string(grads.size()) + " gradients / " +
                      std::to_string(state.m.size()) + " moments for " +
                      std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Mat& p = params[i].value;
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() ||
        state.m[i].rows() != p.rows() || state.m[i].cols() != p.cols()) {
      throw ConfigError("adam: shape mismatch for " + params[i].name + ": parameter " +
                        shape_of(p) + ", gradient " + shape_of(grads[i]));
    }
  }

  ++state.step;
  const real t = static_cast<real>(state.step);
  const real bc1 = 1.0 - std::pow(cfg.beta1, t);
  const real bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i].array();
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * (g * g);
    params[i].value.array() -= lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
  }
}

std::int64_t OneCycleSchedule::peak_step() const {
  return static_cast<std::int64_t>(std::floor(pct_start * static_cast<real>(total_steps - 1)));
}

void OneCycleSchedule::validate() const {
  if (!(max_lr > 0)) throw ConfigError("onecycle: max_lr must be positive");
  if (total_steps < 1) throw ConfigError("onecycle: total_steps must be >= 1");
  if (!(pct_start > 0 && pct_start < 1)) throw ConfigError("onecycle: pct_start must be in (0, 1)");
  if (!(div_factor > 0) || !(final_div_factor > 0)) {
    throw ConfigError("onecycle: division factors must be positive");
  }
}

namespace {

// a at p = 0, b at p = 1, cosine in between.
real cosine_interp(real a, real b, real p) {
  if (p <= 0) return a;
  if (p >= 1) return b;
  return a + (b - a) * 0.5 * (1.0 - std::cos(std::numbers::pi * p));
}

}  // namespace

real onecycle_lr(std::int64_t step, const OneCycleSchedule& sched) {
  sched.validate();
  const std::int64_t last = sched.total_steps - 1;
  if (step < 0 || step > last) {
    throw ConfigError("onecycle: step " + std::to_string(step) + " outside [0, " + std::to_string(last) + "]");
  }
  const std::int64_t peak = sched.peak_step();
  if (step <= peak) {
    if (peak == 0) return sched.max_lr;
    return cosine_interp(sched.initial_lr(), sched.max_lr,
                         static_cast<real>(step) / static_cast<real>(peak));
  }
  return cosine_interp(sched.max_lr, sched.final_lr(),
                       static_cast<real>(step - peak) / static_cast<real>(last - peak));
}

}  // namespace dtm
