#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtm/data/bundle.hpp"
#include "dtm/data/dataset.hpp"
#include "dtm/heads/heads.hpp"
#include "dtm/metrics/metrics.hpp"
#include "dtm/optim/optim.hpp"

namespace dtm {

struct TrainConfig {
  ModelConfig model;
  real max_lr = 1e-5;
  int epochs = 10;
  int batch_size = 8;
  real clip_norm = 0.1;
  std::uint64_t seed = 0;
  // total = w_head1 * L_head1 + w_head2 * L_head2 + w_ensemble * L_ensemble
  real w_head1 = 1.0;
  real w_head2 = 1.0;
  real w_ensemble = 1.0;
  AdamConfig adam;
  real pct_start = 0.3;
  real div_factor = 25.0;
  real final_div_factor = 1e4;

  void validate() const;
  OneCycleSchedule schedule(std::int64_t total_steps) const;
};

// Canonical JSON (sorted keys); the config hash is FNV-1a over its dump.
std::string config_to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig config_from_json(std::string_view text, TrainConfig base = {});
std::string config_hash(const TrainConfig& cfg);

// Per-sample losses in (degrees C)^2; batch values are means over samples.
struct LossBreakdown {
  real head1 = 0;
  real head2 = 0;
  real ensemble = 0;
  real total = 0;
};

// head_i = (y_i - label)^2, ensemble = 1/2 (y_ens - label)^2, total with
// unit weights. Throws NumericError on a non-finite prediction.
LossBreakdown compute_losses(real y1, real y2, real y_ens, real label);

struct Sample {
  const MutationRecord* record = nullptr;
  const EmbeddingBundle* wt = nullptr;
  const EmbeddingBundle* mut = nullptr;
};

// Pairs every record with its bundles. Throws DataError listing every
// missing variant.
std::vector<Sample> resolve_samples(std::span<const MutationRecord> records, const BundleMap& bundles);

struct BatchLoss {
  NodeId total;
  LossBreakdown mean;  // component means over the batch
  real mse = 0;        // mean (prediction - label)^2 of the model output
};

// Records the batch objective on `tape`. For a single-head model the total
// is that head's MSE; for two heads it is the weighted three-term sum.
BatchLoss record_batch_loss(Tape& tape, const Model& model, std::span<const Sample> batch,
                            const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;
  real train_mse = 0;
  real mean_grad_norm = 0;  // pre-clip
  real last_lr = 0;
  std::int64_t steps = 0;   // optimizer steps so far
  std::optional<MetricsReport> val;
  std::string val_note;
};

struct TrainResult {
  Model model;
  AdamState adam;
  std::vector<EpochRecord> history;
  std::int64_t steps = 0;
  std::int64_t total_steps = 0;
};

using EpochCallback = std::function<void(const EpochRecord&, const Model&, const AdamState&)>;

// Validation records are only ever evaluated; gradients come from
// `train_set` alone.
TrainResult train(std::span<const MutationRecord> train_set, std::span<const MutationRecord> val_set,
                  const BundleMap& bundles, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct SamplePrediction {
  std::string protein_id;
  std::string mutation;
  real label = 0;
  Prediction pred;
};

struct EvalResult {
  std::vector<SamplePrediction> rows;
  MetricsReport metrics;
  std::vector<std::string> missing;  // variant ids without bundles, skipped
};

// Predicts every record with bundles (missing ones are listed, not silently
// dropped) and scores the model output. Several models average their
// outputs. Throws NumericError if the predictions are constant.
EvalResult evaluate(std::span<const Model* const> models, std::span<const MutationRecord> records,
                    const BundleMap& bundles);
EvalResult evaluate(const Model& model, std::span<const MutationRecord> records, const BundleMap& bundles);

// Tab-separated protein_id, mutation, label, y1, y2, y_ens.
std::string format_predictions(const EvalResult& result);

}  // namespace dtm
