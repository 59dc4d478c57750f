#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "dtm/data/synth.hpp"
#include "dtm/error.hpp"
#include "dtm/train/checkpoint.hpp"
#include "dtm/train/gradcheck.hpp"
#include "dtm/train/trainer.hpp"

using namespace dtm;

namespace {

struct Fixture {
  std::vector<MutationRecord> records;
  BundleMap bundles;
};

Fixture small_fixture(std::uint64_t seed = 1, int proteins = 4, int per = 5) {
  Fixture f;
  f.records = make_synthetic_dataset({proteins, per, 20, 40, 0, 0.03, seed});
  f.bundles = synth_embed_dataset(f.records, {6, seed, TrackSet::Seq});
  return f;
}

TrainConfig small_config() {
  TrainConfig c;
  c.model.d_raw = 6;
  c.model.d_proj = 4;
  c.epochs = 3;
  c.batch_size = 4;
  c.max_lr = 1e-3;
  c.seed = 7;
  return c;
}

bool same_params(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Mat& x = a.value(ParamId{i});
    const Mat& y = b.value(ParamId{i});
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      if (std::bit_cast<std::uint64_t>(x.data()[k]) != std::bit_cast<std::uint64_t>(y.data()[k])) return false;
    }
  }
  return true;
}

}  // namespace

TEST(Losses, Examples) {
  const auto a = compute_losses(2, 2, 2, 0);
  EXPECT_EQ(a.head1, 4);
  EXPECT_EQ(a.head2, 4);
  EXPECT_EQ(a.ensemble, 2);
  EXPECT_EQ(a.total, 10);
  const auto b = compute_losses(1, -1, 0, 0);
  EXPECT_EQ(b.head1, 1);
  EXPECT_EQ(b.head2, 1);
  EXPECT_EQ(b.ensemble, 0);
  EXPECT_EQ(b.total, 2);
  EXPECT_THROW(compute_losses(NAN, 0, 0, 0), NumericError);
}

TEST(Losses, BatchLossMatchesPerSampleSum) {
  const auto f = small_fixture();
  const auto cfg = small_config();
  const Model m = Model::init(cfg.model, 3);
  const auto samples = resolve_samples(f.records, f.bundles);
  Tape tape(m.params());
  const auto loss = record_batch_loss(tape, m, std::span(samples).first(5), cfg);
  real expect = 0;
  for (int i = 0; i < 5; ++i) {
    const auto p = m.predict(*samples[i].wt, *samples[i].mut);
    expect += compute_losses(p.heads[0], p.heads[1], p.value, samples[i].record->dtm).total;
  }
  EXPECT_NEAR(tape.scalar(loss.total), expect / 5, 1e-12);
  EXPECT_NEAR(loss.mean.total, expect / 5, 1e-12);
}

TEST(Losses, BatchGradientMatchesFiniteDifference) {
  const auto f = small_fixture();
  for (const auto& heads : {std::vector{HeadKind::Head1Outer, HeadKind::Head2LNDiff},
                            std::vector{HeadKind::MutLinComb}}) {
    auto cfg = small_config();
    cfg.model.heads = heads;
    cfg.w_head1 = 0.7;
    cfg.w_ensemble = 1.3;
    Model m = Model::init(cfg.model, 5);
    const auto samples = resolve_samples(f.records, f.bundles);
    const auto batch = std::span(samples).first(3);
    auto loss_of = [&] {
      Tape t(m.params());
      return t.scalar(record_batch_loss(t, m, batch, cfg).total);
    };
    Tape tape(m.params());
    const auto grads = tape.backward(record_batch_loss(tape, m, batch, cfg).total).params;
    real worst = 0;
    for (std::size_t p = 0; p < m.params().size(); ++p) {
      Mat& w = m.params().value(ParamId{p});
      for (Eigen::Index k = 0; k < w.size(); ++k) {
        const real keep = w.data()[k];
        w.data()[k] = keep + 1e-6;
        const real up = loss_of();
        w.data()[k] = keep - 1e-6;
        const real dn = loss_of();
        w.data()[k] = keep;
        worst = std::max(worst, gradient_rel_error(grads[p].data()[k], (up - dn) / 2e-6));
      }
    }
    EXPECT_LT(worst, 1e-4);
  }
}

TEST(Train, StepCountIsEpochsTimesBatches) {
  const auto f = small_fixture();  // 20 records
  for (int b : {1, 3, 4, 7, 20, 64}) {
    auto cfg = small_config();
    cfg.batch_size = b;
    cfg.epochs = 2;
    const auto r = train(f.records, {}, f.bundles, cfg);
    const std::int64_t expect = 2 * ((20 + b - 1) / b);
    EXPECT_EQ(r.steps, expect) << b;
    EXPECT_EQ(r.total_steps, expect);
    EXPECT_EQ(r.adam.step, expect);
    ASSERT_EQ(r.history.size(), 2u);
    EXPECT_EQ(r.history.back().steps, expect);
  }
}

TEST(Train, InvalidConfig) {
  const auto f = small_fixture();
  auto cfg = small_config();
  cfg.epochs = 0;
  EXPECT_THROW(train(f.records, {}, f.bundles, cfg), ConfigError);
  cfg = small_config();
  cfg.batch_size = 0;
  EXPECT_THROW(train(f.records, {}, f.bundles, cfg), ConfigError);
  cfg = small_config();
  cfg.max_lr = -1;
  EXPECT_THROW(train(f.records, {}, f.bundles, cfg), ConfigError);
}

TEST(Train, ValidationNeverContributesGradients) {
  const auto f = small_fixture();
  const std::span<const MutationRecord> all(f.records);
  const auto cfg = small_config();
  const auto without = train(all.first(15), {}, f.bundles, cfg);
  const auto with = train(all.first(15), all.subspan(15), f.bundles, cfg);
  EXPECT_TRUE(same_params(without.model.params(), with.model.params()));
  ASSERT_TRUE(with.history.back().val.has_value());
  EXPECT_EQ(with.history.back().val->n, 5u);
}

TEST(Train, Deterministic) {
  const auto f = small_fixture();
  const auto cfg = small_config();
  const auto a = train(f.records, {}, f.bundles, cfg);
  const auto b = train(f.records, {}, f.bundles, cfg);
  EXPECT_TRUE(same_params(a.model.params(), b.model.params()));
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].train.total, b.history[e].train.total);
  }
  auto other = cfg;
  other.seed = 8;
  EXPECT_FALSE(same_params(a.model.params(), train(f.records, {}, f.bundles, other).model.params()));
}

TEST(Train, LossDecreasesOnSmallSet) {
  const auto f = small_fixture(2, 2, 6);
  auto cfg = small_config();
  cfg.max_lr = 1e-2;
  cfg.epochs = 60;
  cfg.clip_norm = 10;
  const auto r = train(f.records, {}, f.bundles, cfg);
  EXPECT_LT(r.history.back().train_mse, 0.5 * r.history.front().train_mse);
}

TEST(Train, MissingBundlesListed) {
  auto f = small_fixture();
  const auto gone = mut_variant_id(f.records[3]);
  const auto gone_wt = wt_variant_id(f.records[7].protein_id, f.records[7].mutation.position);
  f.bundles.erase(gone);
  f.bundles.erase(gone_wt);
  try {
    train(f.records, {}, f.bundles, small_config());
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(gone), std::string::npos) << msg;
    EXPECT_NE(msg.find(gone_wt), std::string::npos) << msg;
  }
}

TEST(Evaluate, SkipsAndReportsMissing) {
  auto f = small_fixture();
  const auto cfg = small_config();
  const Model m = Model::init(cfg.model, 1);
  const auto gone = mut_variant_id(f.records[0]);
  f.bundles.erase(gone);
  const auto r = evaluate(m, f.records, f.bundles);
  EXPECT_EQ(r.rows.size(), f.records.size() - 1);
  ASSERT_EQ(r.missing.size(), 1u);
  EXPECT_EQ(r.missing[0], gone);
  EXPECT_EQ(r.metrics.n, r.rows.size());
}

TEST(Evaluate, SeedEnsembleAverages) {
  const auto f = small_fixture();
  const auto cfg = small_config();
  const Model a = Model::init(cfg.model, 1), b = Model::init(cfg.model, 2);
  const Model* both[] = {&a, &b};
  const auto r = evaluate(std::span<const Model* const>(both), f.records, f.bundles);
  const auto ra = evaluate(a, f.records, f.bundles), rb = evaluate(b, f.records, f.bundles);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_NEAR(r.rows[i].pred.value, 0.5 * (ra.rows[i].pred.value + rb.rows[i].pred.value), 1e-12);
  }
  const auto tsv = format_predictions(r);
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), static_cast<long>(r.rows.size()) + 1);
}

TEST(Config, JsonRoundTripAndHash) {
  auto cfg = small_config();
  cfg.model.heads = {HeadKind::ClsLinComb};
  cfg.model.tracks = TrackSet::SeqStruct;
  cfg.w_ensemble = 0.25;
  const auto text = config_to_json(cfg);
  const auto back = config_from_json(text);
  EXPECT_EQ(config_to_json(back), text);
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  EXPECT_NE(config_hash(cfg), config_hash(small_config()));
  EXPECT_THROW(config_from_json(R"({"epochz": 3})"), ConfigError);
  EXPECT_THROW(config_from_json("{not json"), ConfigError);
  EXPECT_EQ(config_from_json(R"({"epochs": 42})").epochs, 42);
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const auto f = small_fixture();
  const auto cfg = small_config();
  const auto r = train(f.records, {}, f.bundles, cfg);
  const auto bytes = encode_checkpoint(cfg, r.model, &r.adam, cfg.epochs);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.epochs_done, cfg.epochs);
  EXPECT_EQ(config_hash(back.config), config_hash(cfg));
  EXPECT_TRUE(same_params(back.model.params(), r.model.params()));
  ASSERT_TRUE(back.adam.has_value());
  EXPECT_EQ(back.adam->step, r.adam.step);
  const auto p1 = evaluate(r.model, f.records, f.bundles);
  const auto p2 = evaluate(back.model, f.records, f.bundles);
  for (std::size_t i = 0; i < p1.rows.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(p1.rows[i].pred.value),
              std::bit_cast<std::uint64_t>(p2.rows[i].pred.value));
  }
  EXPECT_EQ(encode_checkpoint(back.config, back.model, &*back.adam, back.epochs_done), bytes);
}

TEST(Checkpoint, CorruptionDetected) {
  const auto cfg = small_config();
  const Model m = Model::init(cfg.model, 1);
  const auto bytes = encode_checkpoint(cfg, m, nullptr, 0);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), FormatError);
  EXPECT_THROW(decode_checkpoint("DTMX" + bytes.substr(4)), FormatError);
  EXPECT_FALSE(decode_checkpoint(bytes).adam.has_value());
}

TEST(GradCheck, AllKindsPass) {
  for (HeadKind k : kAllHeadKinds) {
    const auto r = run_gradcheck({{k}, 4, 3});
    EXPECT_TRUE(r.passed(1e-4)) << head_name(k) << " " << r.max_rel_err;
  }
}
