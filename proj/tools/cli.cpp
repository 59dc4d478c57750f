#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dtm/data/bundle.hpp"
#include "dtm/data/dataset.hpp"
#include "dtm/data/synth.hpp"
#include "dtm/error.hpp"
#include "dtm/metrics/metrics.hpp"
#include "dtm/split/splitter.hpp"
#include "dtm/train/checkpoint.hpp"
#include "dtm/train/gradcheck.hpp"
#include "dtm/train/trainer.hpp"
#include "dtm/util/binary_io.hpp"
#include "dtm/util/hash.hpp"
#include "json.hpp"

#ifndef DTM_VERSION
#define DTM_VERSION "0.0.0"
#endif

namespace dtm::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string digest_of(const std::string& path) { return hex64(fnv1a64(read_file(path))); }

// SOURCE_DATE_EPOCH wins so reproducible builds can pin it.
std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::atoll(env));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void write(const std::string& path) const {
    ordered_json j;
    j["command"] = command;
    j["tool_version"] = DTM_VERSION;
    j["timestamp"] = timestamp();
    if (!config_hash.empty()) j["config_hash"] = config_hash;
    auto digests = [](const std::vector<std::string>& files) {
      ordered_json o = ordered_json::object();
      for (const auto& f : files) o[f] = digest_of(f);
      return o;
    };
    j["inputs"] = digests(inputs);
    j["outputs"] = digests(outputs);
    write_file(path, j.dump(2) + "\n");
  }
};

TrackSet parse_tracks(const std::string& s) {
  if (s == "seq") return TrackSet::Seq;
  if (s == "seq+struct") return TrackSet::SeqStruct;
  throw ConfigError("--tracks must be seq or seq+struct, got '" + s + "'");
}

std::vector<HeadKind> parse_heads(const std::string& s) {
  std::vector<HeadKind> out;
  if (s == "ensemble") return {HeadKind::Head1Outer, HeadKind::Head2LNDiff};
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) out.push_back(head_from_name(part));
  return out;
}

SplitRatio parse_ratio(const std::string& s) {
  const auto colon = s.find(':');
  SplitRatio r;
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    r.train = std::stoi(s.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(s);
    r.val = std::stoi(s.substr(colon + 1), &used);
    if (used != s.size() - colon - 1) throw std::invalid_argument(s);
  } catch (const std::logic_error&) {
    throw ConfigError("--ratio must look like 8:2, got '" + s + "'");
  }
  if (r.train <= 0 || r.val < 0) throw ConfigError("--ratio needs a positive train share, got '" + s + "'");
  return r;
}

// Records of the requested manifest side; every protein must be assigned.
std::vector<MutationRecord> select_side(const std::vector<MutationRecord>& records,
                                        const SplitAssignment& split, std::optional<Side> side) {
  std::vector<MutationRecord> out;
  std::set<std::string> unassigned;
  for (const auto& r : records) {
    auto it = split.side.find(r.protein_id);
    if (it == split.side.end()) {
      unassigned.insert(r.protein_id);
      continue;
    }
    if (!side || it->second == *side) out.push_back(r);
  }
  if (!unassigned.empty()) {
    std::string msg = "split manifest does not assign protein(s):";
    for (const auto& id : unassigned) msg += " " + id;
    throw DataError(msg);
  }
  return out;
}

std::string fmt(real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct SynthDatasetArgs {
  std::string out;
  SyntheticDatasetOptions opts;
};

int cmd_synth_dataset(const SynthDatasetArgs& a, std::ostream& out) {
  const auto records = make_synthetic_dataset(a.opts);
  save_dataset(a.out, records);
  RunManifest{"synth-dataset", "", {}, {a.out}}.write(a.out + ".run.json");
  out << "wrote " << records.size() << " records to " << a.out << "\n";
  return kExitOk;
}

struct SynthEmbedArgs {
  std::string data, out, tracks = "seq";
  int d_raw = 32;
  std::uint64_t seed = 0;
};

int cmd_synth_embed(const SynthEmbedArgs& a, std::ostream& out) {
  const SynthOptions opts{a.d_raw, a.seed, parse_tracks(a.tracks)};
  if (opts.d_raw < 1) throw ConfigError("--d-raw must be >= 1");
  const auto records = load_dataset(a.data);
  const auto bundles = synth_embed_dataset(records, opts);
  write_bundles(a.out, bundles);
  RunManifest{"synth-embed", "", {a.data}, {a.out}}.write(a.out + ".run.json");
  out << "wrote " << bundles.size() << " bundles (d_raw=" << a.d_raw << ", tracks=" << a.tracks << ") to "
      << a.out << "\n";
  return kExitOk;
}

struct SplitArgs {
  std::string data, out, ratio = "8:2", clusters;
  double identity = 0.5;
  std::uint64_t seed = 0;
  int kmer = 5;
};

int cmd_prepare_split(const SplitArgs& a, std::ostream& out) {
  const SplitRatio ratio = parse_ratio(a.ratio);
  if (!(a.identity > 0 && a.identity <= 1)) throw ConfigError("--identity must be in (0, 1]");
  const auto records = load_dataset(a.data);
  const auto proteins = proteins_of(records);
  std::vector<Cluster> clusters;
  std::vector<std::string> inputs{a.data};
  if (!a.clusters.empty()) {
    std::istringstream in(read_file(a.clusters));
    clusters = import_cluster_tsv(in, proteins);
    inputs.push_back(a.clusters);
  } else {
    clusters = greedy_cluster(proteins, a.identity, a.kmer);
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& p : proteins) counts[p.id] = p.mutations;
  SplitAssignment split = split_clusters(clusters, counts, ratio, a.seed);
  split.threshold = a.identity;
  write_file(a.out, format_manifest(split));
  RunManifest{"prepare-split", "", inputs, {a.out}}.write(a.out + ".run.json");

  std::size_t val_records = 0;
  for (const auto& r : records) val_records += split.side.at(r.protein_id) == Side::Val;
  out << clusters.size() << " clusters; train " << split.count(Side::Train) << " proteins, val "
      << split.count(Side::Val) << " proteins (" << val_records << "/" << records.size()
      << " records)" << (split.degenerate ? "; single cluster, everything trains" : "") << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data, bundles, split, config, out;
  bool final_retrain = false;
  bool keep_epoch_checkpoints = true;
  std::optional<int> epochs, batch_size, d_proj, d_raw;
  std::optional<double> lr, clip, w_head1, w_head2, w_ensemble;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> heads, tracks;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainConfig cfg;
  bool d_raw_pinned = false;
  std::vector<std::string> inputs{a.data, a.bundles};
  if (!a.config.empty()) {
    const std::string text = read_file(a.config);
    cfg = config_from_json(text);
    d_raw_pinned = nlohmann::json::parse(text).contains("d_raw");
    inputs.push_back(a.config);
  }
  // flags win over the file
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.d_proj) cfg.model.d_proj = *a.d_proj;
  if (a.d_raw) {
    cfg.model.d_raw = *a.d_raw;
    d_raw_pinned = true;
  }
  if (a.lr) cfg.max_lr = *a.lr;
  if (a.clip) cfg.clip_norm = *a.clip;
  if (a.w_head1) cfg.w_head1 = *a.w_head1;
  if (a.w_head2) cfg.w_head2 = *a.w_head2;
  if (a.w_ensemble) cfg.w_ensemble = *a.w_ensemble;
  if (a.seed) cfg.seed = *a.seed;
  if (a.heads) cfg.model.heads = parse_heads(*a.heads);
  if (a.tracks) cfg.model.tracks = parse_tracks(*a.tracks);

  const auto records = load_dataset(a.data);
  const BundleMap bundles = read_bundles(a.bundles);
  if (!bundles.empty()) {
    const auto width = static_cast<int>(bundles.begin()->second.width());
    if (!d_raw_pinned) {
      cfg.model.d_raw = width;
    } else if (cfg.model.d_raw != width) {
      throw ConfigError("config d_raw " + std::to_string(cfg.model.d_raw) + " but bundles have width " +
                        std::to_string(width));
    }
  }
  cfg.validate();

  std::vector<MutationRecord> train_set, val_set;
  std::string manifest_text;
  if (!a.split.empty()) {
    manifest_text = read_file(a.split);
    const SplitAssignment split = parse_manifest(manifest_text);
    train_set = select_side(records, split, Side::Train);
    val_set = select_side(records, split, Side::Val);
    inputs.push_back(a.split);
  } else {
    train_set = records;
  }
  if (a.final_retrain) {
    train_set.insert(train_set.end(), val_set.begin(), val_set.end());
    val_set.clear();
  }

  const fs::path dir(a.out);
  fs::create_directories(dir / "checkpoints");
  write_file((dir / "config.json").string(), config_to_json(cfg) + "\n");
  if (!manifest_text.empty()) write_file((dir / "split.tsv").string(), manifest_text);

  std::ostringstream history;
  history << "epoch\tsteps\tlr\tloss_total\tloss_head1\tloss_head2\tloss_ensemble\ttrain_mse\tgrad_norm\t"
             "val_r\tval_mae\tval_rmse\n";
  std::vector<std::string> outputs;
  auto on_epoch = [&](const EpochRecord& e, const Model& model, const AdamState& adam) {
    history << e.epoch << '\t' << e.steps << '\t' << fmt(e.last_lr) << '\t' << fmt(e.train.total) << '\t'
            << fmt(e.train.head1) << '\t' << fmt(e.train.head2) << '\t' << fmt(e.train.ensemble) << '\t'
            << fmt(e.train_mse) << '\t' << fmt(e.mean_grad_norm);
    if (e.val) {
      history << '\t' << fmt(e.val->r) << '\t' << fmt(e.val->mae) << '\t' << fmt(e.val->rmse) << '\n';
    } else {
      history << "\t-\t-\t-\n";
    }
    out << "epoch " << e.epoch << "/" << cfg.epochs << "  loss " << fmt(e.train.total) << "  mse "
        << fmt(e.train_mse);
    if (e.val) out << "  val r " << fmt(e.val->r) << " rmse " << fmt(e.val->rmse);
    if (!e.val_note.empty()) out << "  (val: " << e.val_note << ")";
    out << "\n";
    if (a.keep_epoch_checkpoints) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.dtmc", e.epoch);
      const auto path = (dir / "checkpoints" / name).string();
      save_checkpoint(path, cfg, model, &adam, e.epoch);
      outputs.push_back(path);
    }
  };

  const TrainResult result = train(train_set, val_set, bundles, cfg, on_epoch);
  const auto final_path = (dir / "final.dtmc").string();
  save_checkpoint(final_path, cfg, result.model, &result.adam, cfg.epochs);
  write_file((dir / "history.tsv").string(), history.str());

  // final report on the held-out side, or the training side when nothing was held out
  const bool on_val = !val_set.empty();
  const EvalResult report = evaluate(result.model, on_val ? val_set : train_set, bundles);
  const std::string label = on_val ? "val" : "train";
  std::string text = format_table(report.metrics, label) + format_kv(report.metrics);
  write_file((dir / "report.txt").string(), text);
  write_file((dir / "predictions.tsv").string(), format_predictions(report));

  outputs.insert(outputs.begin(), {final_path, (dir / "config.json").string(), (dir / "history.tsv").string(),
                                   (dir / "report.txt").string(), (dir / "predictions.tsv").string()});
  RunManifest{std::string("train") + (a.final_retrain ? " --final-retrain" : ""), config_hash(cfg), inputs,
              outputs}
      .write((dir / "run_manifest.json").string());

  out << "trained " << train_set.size() << " records, " << result.steps << " steps; " << label << " metrics:\n"
      << text;
  return kExitOk;
}

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string data, bundles, split, side = "all", predictions, report, from_predictions;
};

// Scores an existing predictions table (label and y_ens columns).
MetricsReport score_predictions(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("protein_id\tmutation\tlabel", 0) != 0) throw DataError(path + ": not a predictions table");
  std::vector<real> pred, label;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '\t')) f.push_back(cell);
    if (f.size() != 6) throw DataError(path + ":" + std::to_string(line_no) + ": expected 6 columns");
    try {
      label.push_back(std::stod(f[2]));
      pred.push_back(std::stod(f[5]));
    } catch (const std::logic_error&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  return evaluate_metrics(pred, label);
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  std::string text;
  if (!a.from_predictions.empty()) {
    const auto m = score_predictions(a.from_predictions);
    text = format_table(m, a.from_predictions) + format_kv(m);
  } else {
    if (a.checkpoints.empty()) throw ConfigError("eval needs --checkpoint (or --from-predictions)");
    if (a.data.empty() || a.bundles.empty()) throw ConfigError("eval needs --data and --bundles");
    std::vector<LoadedCheckpoint> loaded;
    for (const auto& c : a.checkpoints) loaded.push_back(load_checkpoint(c));
    std::vector<const Model*> models;
    for (const auto& l : loaded) models.push_back(&l.model);

    auto records = load_dataset(a.data);
    if (!a.split.empty()) {
      std::optional<Side> side;
      if (a.side == "train") side = Side::Train;
      else if (a.side == "val") side = Side::Val;
      else if (a.side != "all") throw ConfigError("--side must be train, val or all");
      records = select_side(records, parse_manifest(read_file(a.split)), side);
    }
    const BundleMap bundles = read_bundles(a.bundles);
    const EvalResult r = evaluate(std::span<const Model* const>(models), records, bundles);
    if (!r.missing.empty()) {
      err << "warning: " << r.missing.size() << " bundle(s) missing, records skipped:";
      for (const auto& m : r.missing) err << " " << m;
      err << "\n";
    }
    text = format_table(r.metrics, a.split.empty() ? "all" : a.side) + format_kv(r.metrics);
    if (!a.predictions.empty()) write_file(a.predictions, format_predictions(r));
  }
  if (!a.report.empty()) write_file(a.report, text);
  out << text;
  return kExitOk;
}

struct PredictArgs {
  std::vector<std::string> checkpoints;
  std::string bundles, mutations, out;
};

// Mutation list: one "protein_id mutation" pair per line (tab, space or
// colon separated); '#' starts a comment.
int cmd_predict(const PredictArgs& a, std::ostream& out) {
  std::vector<LoadedCheckpoint> loaded;
  for (const auto& c : a.checkpoints) loaded.push_back(load_checkpoint(c));
  const BundleMap bundles = read_bundles(a.bundles);

  std::istringstream in(read_file(a.mutations));
  std::string line;
  std::ostringstream table;
  table << "protein_id\tmutation\ty1\ty2\ty_ens\n";
  int line_no = 0;
  char buf[40];
  auto num = [&](real v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::replace(line.begin(), line.end(), ':', ' ');
    std::replace(line.begin(), line.end(), '\t', ' ');
    std::istringstream ls(line);
    std::string pid, code;
    if (!(ls >> pid)) continue;
    if (!(ls >> code)) throw ParseError(a.mutations + ":" + std::to_string(line_no) + ": expected protein_id and mutation");
    const Mutation mu = parse_mutation(code);
    const auto wt_id = wt_variant_id(pid, mu.position);
    const auto mut_id = pid + ":" + format_mutation(mu);
    for (const auto& id : {wt_id, mut_id}) {
      if (!bundles.count(id)) throw DataError("no embedding bundle for variant " + id);
    }
    Prediction p;
    for (const auto& l : loaded) {
      const Prediction q = l.model.predict(bundles.at(wt_id), bundles.at(mut_id));
      if (p.heads.empty()) p.heads.assign(q.heads.size(), 0.0);
      for (std::size_t h = 0; h < q.heads.size(); ++h) p.heads[h] += q.heads[h] / static_cast<real>(loaded.size());
      p.value += q.value / static_cast<real>(loaded.size());
    }
    table << pid << '\t' << format_mutation(mu) << '\t' << num(p.heads[0]) << '\t'
          << (p.heads.size() > 1 ? num(p.heads[1]) : std::string("-")) << '\t' << num(p.value) << '\n';
  }
  if (!a.out.empty()) {
    write_file(a.out, table.str());
    std::vector<std::string> inputs = a.checkpoints;
    inputs.push_back(a.bundles);
    inputs.push_back(a.mutations);
    RunManifest{"predict", config_hash(loaded.front().config), inputs, {a.out}}.write(a.out + ".run.json");
  } else {
    out << table.str();
  }
  return kExitOk;
}

struct GradcheckArgs {
  std::string head = "ensemble", tracks = "seq+struct";
  int d = 8;
  std::uint64_t seed = 0;
  int batch = 4;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (a.d < 1) throw ConfigError("--d must be >= 1");
  GradCheckCase c{parse_heads(a.head), a.d, a.seed, parse_tracks(a.tracks), a.batch};
  const GradCheckResult r = run_gradcheck(c);
  char line[256];
  std::snprintf(line, sizeof line, "head=%s d=%d seed=%llu checked=%zu max_rel_err=%.3e\n", a.head.c_str(), a.d,
                static_cast<unsigned long long>(a.seed), r.checked, r.max_rel_err);
  out << line;
  std::snprintf(line, sizeof line, "worst=%s[%lld] analytic=%.12g numeric=%.12g\n", r.worst.param.c_str(),
                static_cast<long long>(r.worst.index), r.worst.analytic, r.worst.numeric);
  out << line;
  const bool ok = r.passed(1e-4);
  out << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitFailure;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return kExitConfig;
    case ErrorKind::Data:
    case ErrorKind::Format:
    case ErrorKind::Parse: return kExitData;
    case ErrorKind::Numeric: return kExitNumeric;
    case ErrorKind::State: return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stability-change regression from frozen protein embeddings", "dtm"};
  app.set_version_flag("--version", DTM_VERSION);
  app.require_subcommand(1);

  SynthDatasetArgs sd;
  auto* c_sd = app.add_subcommand("synth-dataset", "Write a synthetic mutation dataset (CSV)");
  c_sd->add_option("--out", sd.out, "Output CSV")->required();
  c_sd->add_option("--proteins", sd.opts.proteins, "Number of base proteins")->capture_default_str();
  c_sd->add_option("--mutations", sd.opts.mutations_per_protein, "Mutations per protein")->capture_default_str();
  c_sd->add_option("--min-length", sd.opts.min_length)->capture_default_str();
  c_sd->add_option("--max-length", sd.opts.max_length)->capture_default_str();
  c_sd->add_option("--homologs", sd.opts.homologs, "Near-identical homolog proteins to plant")->capture_default_str();
  c_sd->add_option("--seed", sd.opts.seed)->capture_default_str();

  SynthEmbedArgs se;
  auto* c_se = app.add_subcommand("synth-embed", "Generate deterministic embedding bundles (DTME)");
  c_se->add_option("--data", se.data, "Dataset CSV")->required();
  c_se->add_option("--out", se.out, "Output .dtme")->required();
  c_se->add_option("--d-raw", se.d_raw, "Embedding width")->capture_default_str();
  c_se->add_option("--seed", se.seed)->capture_default_str();
  c_se->add_option("--tracks", se.tracks, "seq or seq+struct")->capture_default_str();

  SplitArgs sp;
  auto* c_sp = app.add_subcommand("prepare-split", "Homology-aware train/val split manifest");
  c_sp->add_option("--data", sp.data, "Dataset CSV")->required();
  c_sp->add_option("--out", sp.out, "Output manifest TSV")->required();
  c_sp->add_option("--identity", sp.identity, "Clustering identity threshold")->capture_default_str();
  c_sp->add_option("--ratio", sp.ratio, "train:val")->capture_default_str();
  c_sp->add_option("--seed", sp.seed)->capture_default_str();
  c_sp->add_option("--kmer", sp.kmer, "k-mer size of the identity estimate")->capture_default_str();
  c_sp->add_option("--clusters", sp.clusters, "External representative<TAB>member cluster table");

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train a model; writes a run directory");
  c_tr->add_option("--data", tr.data, "Dataset CSV")->required();
  c_tr->add_option("--bundles", tr.bundles, "Embedding bundles (.dtme)")->required();
  c_tr->add_option("--split", tr.split, "Split manifest; without it every record trains");
  c_tr->add_option("--config", tr.config, "JSON config; flags override it");
  c_tr->add_option("--out", tr.out, "Run directory")->required();
  c_tr->add_flag("--final-retrain", tr.final_retrain, "Train on train+val");
  c_tr->add_flag("!--no-epoch-checkpoints", tr.keep_epoch_checkpoints, "Only write final.dtmc");
  c_tr->add_option("--epochs", tr.epochs);
  c_tr->add_option("--batch-size", tr.batch_size);
  c_tr->add_option("--lr", tr.lr, "Peak learning rate");
  c_tr->add_option("--clip", tr.clip, "Global gradient-norm bound");
  c_tr->add_option("--seed", tr.seed);
  c_tr->add_option("--heads", tr.heads, "ensemble, or one head name (head1, head2, mut_concat, ...)");
  c_tr->add_option("--tracks", tr.tracks, "seq or seq+struct");
  c_tr->add_option("--d-proj", tr.d_proj);
  c_tr->add_option("--d-raw", tr.d_raw, "Defaults to the bundle width");
  c_tr->add_option("--w-head1", tr.w_head1);
  c_tr->add_option("--w-head2", tr.w_head2);
  c_tr->add_option("--w-ensemble", tr.w_ensemble);

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Score checkpoints (several average as a seed ensemble)");
  c_ev->add_option("--checkpoint", ev.checkpoints, "Checkpoint file, repeatable");
  c_ev->add_option("--data", ev.data, "Dataset CSV");
  c_ev->add_option("--bundles", ev.bundles, "Embedding bundles (.dtme)");
  c_ev->add_option("--split", ev.split, "Split manifest");
  c_ev->add_option("--side", ev.side, "train, val or all")->capture_default_str();
  c_ev->add_option("--predictions", ev.predictions, "Write per-sample predictions TSV");
  c_ev->add_option("--report", ev.report, "Write the report text");
  c_ev->add_option("--from-predictions", ev.from_predictions, "Score an existing predictions TSV instead");

  PredictArgs pr;
  auto* c_pr = app.add_subcommand("predict", "Predict a list of mutations");
  c_pr->add_option("--checkpoint", pr.checkpoints, "Checkpoint file, repeatable")->required();
  c_pr->add_option("--bundles", pr.bundles, "Embedding bundles (.dtme)")->required();
  c_pr->add_option("--mutations", pr.mutations, "Lines of 'protein_id mutation'")->required();
  c_pr->add_option("--out", pr.out, "Output TSV (stdout if omitted)");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of the training gradients");
  c_gc->add_option("--head", gc.head, "ensemble or a head name")->capture_default_str();
  c_gc->add_option("--d", gc.d, "Projection width")->capture_default_str();
  c_gc->add_option("--seed", gc.seed)->capture_default_str();
  c_gc->add_option("--tracks", gc.tracks)->capture_default_str();
  c_gc->add_option("--batch", gc.batch)->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*c_sd) return cmd_synth_dataset(sd, out);
    if (*c_se) return cmd_synth_embed(se, out);
    if (*c_sp) return cmd_prepare_split(sp, out);
    if (*c_tr) return cmd_train(tr, out);
    if (*c_ev) return cmd_eval(ev, out, err);
    if (*c_pr) return cmd_predict(pr, out);
    if (*c_gc) return cmd_gradcheck(gc, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace dtm::cli
