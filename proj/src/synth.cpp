#include "dtm/data/synth.hpp"

#include <algorithm>
#include <string>

#include "dtm/error.hpp"
#include "dtm/util/hash.hpp"

namespace dtm {

namespace {

std::uint64_t key_of(std::uint64_t seed, std::string_view salt, std::string_view content) {
  std::uint64_t h = fnv1a64(salt, splitmix64(seed));
  h = fnv1a64("|", h);
  return fnv1a64(content, h);
}

// d uniform values in [-1, 1) from a keyed splitmix stream.
Vec stream(std::uint64_t key, int d) {
  Vec v(d);
  for (int i = 0; i < d; ++i) {
    const std::uint64_t x = splitmix64(key ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1)));
    v[i] = static_cast<double>(x >> 11) * 0x1.0p-52 - 1.0;
  }
  return v;
}

Vec residue_vec(std::uint64_t seed, std::string_view salt, char aa, int d) {
  return stream(key_of(seed, salt, std::string_view(&aa, 1)), d);
}

Vec mean_residue(std::uint64_t seed, std::string_view salt, std::string_view seq, int d) {
  Vec acc = Vec::Zero(d);
  for (char c : seq) acc += residue_vec(seed, salt, c, d);
  return acc / static_cast<double>(seq.size());
}

std::string_view window(std::string_view seq, std::size_t at, std::size_t radius) {
  const std::size_t lo = at >= radius ? at - radius : 0;
  const std::size_t hi = std::min(seq.size(), at + radius + 1);
  return seq.substr(lo, hi - lo);
}

Vec cls_track(std::uint64_t seed, std::string_view salt, std::string_view seq, int d) {
  return 0.5 * mean_residue(seed, std::string(salt) + ":res", seq, d) +
         0.5 * stream(key_of(seed, salt, seq), d);
}

Vec pos_track(std::uint64_t seed, std::string_view salt, std::string_view seq, std::size_t at, int d) {
  const auto ctx = window(seq, at, 3);
  const std::string site = std::to_string(at) + ":" + std::string(ctx);
  return 0.6 * residue_vec(seed, std::string(salt) + ":res", seq[at], d) +
         0.25 * mean_residue(seed, std::string(salt) + ":ctx", ctx, d) +
         0.15 * stream(key_of(seed, salt, site), d);
}

Vec to_float_grid(Vec v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(static_cast<float>(v[i]));
  return v;
}

}  // namespace

EmbeddingBundle synth_embed(const MutationRecord& record, Variant variant, const SynthOptions& opts) {
  if (opts.d_raw < 1) throw ConfigError("synth_embed: d_raw must be >= 1");
  const int d = opts.d_raw;
  const std::string seq =
      variant == Variant::WildType ? record.wt_sequence : record.mutant_sequence();
  const std::size_t at = record.mutation.index();
  if (at >= seq.size()) throw DataError("synth_embed: mutation site outside sequence");

  EmbeddingBundle b;
  b.variant_id = variant == Variant::WildType
                     ? wt_variant_id(record.protein_id, record.mutation.position)
                     : mut_variant_id(record);
  b.tracks[TrackRole::SeqCls] = to_float_grid(cls_track(opts.seed, "seq_cls", seq, d));
  b.tracks[TrackRole::SeqPos] = to_float_grid(pos_track(opts.seed, "seq_pos", seq, at, d));
  b.tracks[TrackRole::Avg] = to_float_grid(mean_residue(opts.seed, "avg", seq, d));
  if (opts.tracks == TrackSet::SeqStruct) {
    b.tracks[TrackRole::StructCls] = to_float_grid(cls_track(opts.seed, "struct_cls", seq, d));
    b.tracks[TrackRole::StructPos] = to_float_grid(pos_track(opts.seed, "struct_pos", seq, at, d));
  }
  return b;
}

BundleMap synth_embed_dataset(std::span<const MutationRecord> records, const SynthOptions& opts) {
  BundleMap out;
  for (const auto& r : records) {
    const auto wt_id = wt_variant_id(r.protein_id, r.mutation.position);
    if (!out.count(wt_id)) out.emplace(wt_id, synth_embed(r, Variant::WildType, opts));
    auto mut = synth_embed(r, Variant::Mutant, opts);
    out.emplace(mut.variant_id, std::move(mut));
  }
  return out;
}

}  // namespace dtm
