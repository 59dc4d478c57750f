#include "dtm/train/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dtm/util/rng.hpp"

namespace dtm {

real gradient_rel_error(real analytic, real numeric) {
  const real scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / scale;
}

void GradCheckResult::merge(const GradCheckResult& other) {
  if (checked == 0 || other.max_rel_err > max_rel_err) {
    max_rel_err = other.max_rel_err;
    worst = other.worst;
  }
  checked += other.checked;
}

GradCheckResult check_param_gradients(ParamSet& params, const GradMap& analytic,
                                      const std::function<real()>& loss, real h) {
  GradCheckResult r;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Mat& value = params[p].value;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const real saved = value.data()[i];
      value.data()[i] = saved + h;
      const real up = loss();
      value.data()[i] = saved - h;
      const real down = loss();
      value.data()[i] = saved;
      const real numeric = (up - down) / (2 * h);
      const real a = analytic[p].data()[i];
      const real err = gradient_rel_error(a, numeric);
      if (r.checked == 0 || err > r.max_rel_err) {
        r.max_rel_err = err;
        r.worst = {params[p].name, i, a, numeric, err};
      }
      ++r.checked;
    }
  }
  return r;
}

GradCheckResult gradcheck_model(Model& model, std::span<const Sample> batch, const TrainConfig& cfg,
                                real h) {
  GradMap analytic;
  {
    Tape tape(model.params());
    const auto loss = record_batch_loss(tape, model, batch, cfg);
    analytic = tape.backward(loss.total).params;
  }
  auto objective = [&] {
    Tape tape(model.params());
    return tape.scalar(record_batch_loss(tape, model, batch, cfg).total);
  };
  return check_param_gradients(model.params(), analytic, objective, h);
}

GradCheckResult run_gradcheck(const GradCheckCase& c) {
  TrainConfig cfg;
  cfg.model.heads = c.heads;
  cfg.model.tracks = c.tracks;
  cfg.model.d_proj = c.d_proj;
  cfg.model.d_raw = c.d_proj + 2;
  cfg.seed = c.seed;
  cfg.validate();

  Model model = Model::init(cfg.model, c.seed);
  Rng rng(c.seed ^ 0xc0ffee);
  // move off the structured initial values (gamma = 1, beta = 0, mix = +-1)
  for (std::size_t p = 0; p < model.params().size(); ++p) {
    Mat& v = model.params()[p].value;
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] += 0.2 * rng.uniform(-1.0, 1.0);
  }

  std::vector<MutationRecord> records;
  BundleMap bundles;
  for (int s = 0; s < c.batch; ++s) {
    MutationRecord r;
    r.protein_id = "G" + std::to_string(s);
    r.wt_sequence = "MKILV";
    r.mutation = {3, 'I', 'A'};
    r.dtm = 2.0 * rng.normal();
    records.push_back(r);
    for (Variant v : {Variant::WildType, Variant::Mutant}) {
      EmbeddingBundle b;
      b.variant_id = v == Variant::WildType ? wt_variant_id(r.protein_id, 3) : mut_variant_id(r);
      for (TrackRole role : kAllRoles) {
        if (c.tracks == TrackSet::Seq && (role == TrackRole::StructCls || role == TrackRole::StructPos)) {
          continue;
        }
        Vec x(cfg.model.d_raw);
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
        b.tracks[role] = x;
      }
      bundles[b.variant_id] = b;
    }
  }
  const auto samples = resolve_samples(records, bundles);
  return gradcheck_model(model, samples, cfg);
}

}  // namespace dtm
