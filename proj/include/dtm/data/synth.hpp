#pragma once

#include <cstdint>
#include <span>

#include "dtm/data/bundle.hpp"
#include "dtm/data/dataset.hpp"

namespace dtm {

enum class Variant { WildType, Mutant };
enum class TrackSet { Seq, SeqStruct };

struct SynthOptions {
  int d_raw = 32;
  std::uint64_t seed = 0;
  TrackSet tracks = TrackSet::Seq;
};

// Deterministic stand-in for language-model features. Every track is a pure
// function of (sequence content, site, role, seed): residue-identity vectors
// shared across proteins, a local-context mix for position tracks, and a
// hash-seeded component. Values are rounded to float so DTME storage is exact.
EmbeddingBundle synth_embed(const MutationRecord& record, Variant variant, const SynthOptions& opts);

// WT + MUT bundles for every record; WT bundles shared per (protein, site).
BundleMap synth_embed_dataset(std::span<const MutationRecord> records, const SynthOptions& opts);

}  // namespace dtm
