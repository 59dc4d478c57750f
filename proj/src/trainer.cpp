#include "dtm/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dtm/error.hpp"
#include "dtm/util/hash.hpp"
#include "dtm/util/rng.hpp"
#include "json.hpp"

namespace dtm {

using nlohmann::json;

void TrainConfig::validate() const {
  model.validate();
  if (!(max_lr > 0)) throw ConfigError("max_lr must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  if (w_head1 < 0 || w_head2 < 0 || w_ensemble < 0) throw ConfigError("loss weights must be >= 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) || !(adam.eps > 0)) {
    throw ConfigError("adam hyperparameters out of range");
  }
  schedule(1).validate();
}

OneCycleSchedule TrainConfig::schedule(std::int64_t total_steps) const {
  return {max_lr, total_steps, pct_start, div_factor, final_div_factor};
}

namespace {

std::string_view tracks_name(TrackSet t) { return t == TrackSet::Seq ? "seq" : "seq+struct"; }

TrackSet tracks_from_name(const std::string& s) {
  if (s == "seq") return TrackSet::Seq;
  if (s == "seq+struct") return TrackSet::SeqStruct;
  throw ConfigError("unknown track set '" + s + "' (expected seq or seq+struct)");
}

json to_json(const TrainConfig& c) {
  json heads = json::array();
  for (HeadKind k : c.model.heads) heads.push_back(std::string(head_name(k)));
  return json{
      {"heads", heads},
      {"tracks", std::string(tracks_name(c.model.tracks))},
      {"d_raw", c.model.d_raw},
      {"d_proj", c.model.d_proj},
      {"learned_projection", c.model.learned_projection},
      {"ln_eps", c.model.ln_eps},
      {"max_lr", c.max_lr},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"clip_norm", c.clip_norm},
      {"seed", c.seed},
      {"w_head1", c.w_head1},
      {"w_head2", c.w_head2},
      {"w_ensemble", c.w_ensemble},
      {"adam_beta1", c.adam.beta1},
      {"adam_beta2", c.adam.beta2},
      {"adam_eps", c.adam.eps},
      {"pct_start", c.pct_start},
      {"div_factor", c.div_factor},
      {"final_div_factor", c.final_div_factor},
  };
}

}  // namespace

std::string config_to_json(const TrainConfig& cfg) { return to_json(cfg).dump(2); }

TrainConfig config_from_json(std::string_view text, TrainConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    if (j.contains("heads")) {
      c.model.heads.clear();
      for (const auto& h : j.at("heads")) c.model.heads.push_back(head_from_name(h.get<std::string>()));
    }
    if (j.contains("tracks")) c.model.tracks = tracks_from_name(j.at("tracks").get<std::string>());
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    take("d_raw", c.model.d_raw);
    take("d_proj", c.model.d_proj);
    take("learned_projection", c.model.learned_projection);
    take("ln_eps", c.model.ln_eps);
    take("max_lr", c.max_lr);
    take("epochs", c.epochs);
    take("batch_size", c.batch_size);
    take("clip_norm", c.clip_norm);
    take("seed", c.seed);
    take("w_head1", c.w_head1);
    take("w_head2", c.w_head2);
    take("w_ensemble", c.w_ensemble);
    take("adam_beta1", c.adam.beta1);
    take("adam_beta2", c.adam.beta2);
    take("adam_eps", c.adam.eps);
    take("pct_start", c.pct_start);
    take("div_factor", c.div_factor);
    take("final_div_factor", c.final_div_factor);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  return c;
}

std::string config_hash(const TrainConfig& cfg) { return hex64(fnv1a64(to_json(cfg).dump())); }

// ---------------------------------------------------------------------------

LossBreakdown compute_losses(real y1, real y2, real y_ens, real label) {
  if (!std::isfinite(y1) || !std::isfinite(y2) || !std::isfinite(y_ens) || !std::isfinite(label)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "non-finite prediction: y1=%g y2=%g y_ens=%g label=%g", y1, y2,
                  y_ens, label);
    throw NumericError(buf);
  }
  LossBreakdown l;
  l.head1 = (y1 - label) * (y1 - label);
  l.head2 = (y2 - label) * (y2 - label);
  l.ensemble = 0.5 * (y_ens - label) * (y_ens - label);
  l.total = l.head1 + l.head2 + l.ensemble;
  return l;
}

std::vector<Sample> resolve_samples(std::span<const MutationRecord> records, const BundleMap& bundles) {
  std::vector<Sample> out;
  std::vector<std::string> missing;
  for (const auto& r : records) {
    const auto wt_id = wt_variant_id(r.protein_id, r.mutation.position);
    const auto mut_id = mut_variant_id(r);
    auto wt = bundles.find(wt_id);
    auto mut = bundles.find(mut_id);
    if (wt == bundles.end()) missing.push_back(wt_id);
    if (mut == bundles.end()) missing.push_back(mut_id);
    if (wt != bundles.end() && mut != bundles.end()) out.push_back({&r, &wt->second, &mut->second});
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " bundle(s) missing:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw DataError(msg);
  }
  return out;
}

BatchLoss record_batch_loss(Tape& tape, const Model& model, std::span<const Sample> batch,
                            const TrainConfig& cfg) {
  if (batch.empty()) throw ConfigError("empty batch");
  const real inv_n = 1.0 / static_cast<real>(batch.size());
  BatchLoss out;
  std::optional<NodeId> sum;
  for (const Sample& s : batch) {
    const real label = s.record->dtm;
    const auto y = model.record(tape, *s.wt, *s.mut);
    NodeId total;
    if (!model.config().is_ensemble()) {
      total = tape.squared_error(y.heads[0], label);
      const real l = tape.scalar(total);
      if (!std::isfinite(l)) throw NumericError("non-finite loss for " + s.record->key());
      out.mean.head1 += l;
      out.mean.total += l;
    } else {
      const LossBreakdown l = compute_losses(tape.scalar(y.heads[0]), tape.scalar(y.heads[1]),
                                             tape.scalar(y.combined), label);
      const NodeId l1 = tape.squared_error(y.heads[0], label);
      const NodeId l2 = tape.squared_error(y.heads[1], label);
      const NodeId le = tape.scale(tape.squared_error(y.combined, label), 0.5);
      total = tape.add(tape.add(tape.scale(l1, cfg.w_head1), tape.scale(l2, cfg.w_head2)),
                       tape.scale(le, cfg.w_ensemble));
      out.mean.head1 += l.head1;
      out.mean.head2 += l.head2;
      out.mean.ensemble += l.ensemble;
      out.mean.total += tape.scalar(total);
    }
    const real d = tape.scalar(y.combined) - label;
    out.mse += d * d;
    sum = sum ? tape.add(*sum, total) : total;
  }
  out.total = tape.scale(*sum, inv_n);
  out.mean.head1 *= inv_n;
  out.mean.head2 *= inv_n;
  out.mean.ensemble *= inv_n;
  out.mean.total *= inv_n;
  out.mse *= inv_n;
  return out;
}

// ---------------------------------------------------------------------------

TrainResult train(std::span<const MutationRecord> train_set, std::span<const MutationRecord> val_set,
                  const BundleMap& bundles, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  // Full pre-validation: every bundle must exist before any step is taken.
  const std::vector<Sample> samples = resolve_samples(train_set, bundles);
  const std::vector<Sample> val_samples = resolve_samples(val_set, bundles);

  const auto n = static_cast<std::int64_t>(samples.size());
  const std::int64_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_steps = batches * cfg.epochs;
  const OneCycleSchedule sched = cfg.schedule(total_steps);
  sched.validate();

  TrainResult result{Model::init(cfg.model, cfg.seed), {}, {}, 0, total_steps};
  Model& model = result.model;
  result.adam = AdamState::zeros_like(model.params());
  const ClipConfig clip{cfg.clip_norm};
  Rng order_rng(splitmix64(cfg.seed ^ 0x5eed0fba7c4e5ULL));
  std::vector<std::size_t> order(samples.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(std::span<std::size_t>(order));

    EpochRecord rec;
    rec.epoch = epoch;
    real grad_norm_sum = 0;
    std::vector<Sample> batch;
    for (std::int64_t b = 0; b < batches; ++b) {
      batch.clear();
      const auto lo = static_cast<std::size_t>(b * cfg.batch_size);
      const auto hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = lo; i < hi; ++i) batch.push_back(samples[order[i]]);

      Tape tape(model.params());
      const BatchLoss loss = record_batch_loss(tape, model, batch, cfg);
      auto grads = tape.backward(loss.total).params;
      const ClipResult c = clip_global_norm(grads, clip, &model.params());
      const real lr = onecycle_lr(result.steps, sched);
      adam_step(model.params(), grads, result.adam, cfg.adam, lr);
      ++result.steps;

      const real w = static_cast<real>(batch.size());
      rec.train.head1 += w * loss.mean.head1;
      rec.train.head2 += w * loss.mean.head2;
      rec.train.ensemble += w * loss.mean.ensemble;
      rec.train.total += w * loss.mean.total;
      rec.train_mse += w * loss.mse;
      grad_norm_sum += c.pre_norm;
      rec.last_lr = lr;
    }
    const real inv = 1.0 / static_cast<real>(n);
    rec.train.head1 *= inv;
    rec.train.head2 *= inv;
    rec.train.ensemble *= inv;
    rec.train.total *= inv;
    rec.train_mse *= inv;
    rec.mean_grad_norm = grad_norm_sum / static_cast<real>(batches);
    rec.steps = result.steps;

    if (!val_set.empty()) {
      try {
        rec.val = evaluate(model, val_set, bundles).metrics;
      } catch (const Error& e) {
        rec.val_note = e.what();
      }
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec, model, result.adam);
  }
  return result;
}

// ---------------------------------------------------------------------------

EvalResult evaluate(std::span<const Model* const> models, std::span<const MutationRecord> records,
                    const BundleMap& bundles) {
  if (models.empty()) throw ConfigError("evaluate: no models");
  EvalResult out;
  for (const auto& r : records) {
    const auto wt_id = wt_variant_id(r.protein_id, r.mutation.position);
    const auto mut_id = mut_variant_id(r);
    auto wt = bundles.find(wt_id);
    auto mut = bundles.find(mut_id);
    if (wt == bundles.end() || mut == bundles.end()) {
      if (wt == bundles.end()) out.missing.push_back(wt_id);
      if (mut == bundles.end()) out.missing.push_back(mut_id);
      continue;
    }
    SamplePrediction row{r.protein_id, format_mutation(r.mutation), r.dtm, {}};
    if (models.size() == 1) {
      row.pred = models[0]->predict(wt->second, mut->second);
    } else {
      // seed ensemble: average head outputs and model outputs across members
      for (const Model* m : models) {
        const Prediction p = m->predict(wt->second, mut->second);
        if (row.pred.heads.empty()) row.pred.heads.assign(p.heads.size(), 0.0);
        if (p.heads.size() != row.pred.heads.size()) {
          throw ConfigError("evaluate: ensemble members have different head counts");
        }
        for (std::size_t h = 0; h < p.heads.size(); ++h) row.pred.heads[h] += p.heads[h];
        row.pred.value += p.value;
      }
      const real k = static_cast<real>(models.size());
      for (auto& h : row.pred.heads) h /= k;
      row.pred.value /= k;
    }
    out.rows.push_back(std::move(row));
  }
  std::vector<real> pred, label;
  for (const auto& row : out.rows) {
    pred.push_back(row.pred.value);
    label.push_back(row.label);
  }
  if (out.rows.empty()) throw DataError("evaluate: no record has both bundles");
  if (out.rows.size() < 2) throw DataError("evaluate: need at least two scored records");
  out.metrics = evaluate_metrics(pred, label);
  return out;
}

EvalResult evaluate(const Model& model, std::span<const MutationRecord> records, const BundleMap& bundles) {
  const Model* one[] = {&model};
  return evaluate(std::span<const Model* const>(one), records, bundles);
}

std::string format_predictions(const EvalResult& result) {
  std::ostringstream out;
  out << "protein_id\tmutation\tlabel\ty1\ty2\ty_ens\n";
  char buf[64];
  auto num = [&](real v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : result.rows) {
    out << r.protein_id << '\t' << r.mutation << '\t' << num(r.label) << '\t' << num(r.pred.heads.at(0))
        << '\t' << (r.pred.heads.size() > 1 ? num(r.pred.heads[1]) : std::string("-")) << '\t'
        << num(r.pred.value) << '\n';
  }
  return out.str();
}

}  // namespace dtm
