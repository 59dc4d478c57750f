#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "dtm/core/dense.hpp"
#include "dtm/data/dataset.hpp"

namespace dtm {

// Numeric values are the on-disk role tags.
enum class TrackRole : std::uint8_t {
  SeqCls = 0,
  SeqPos = 1,
  StructCls = 2,
  StructPos = 3,
  Avg = 4,
};

inline constexpr TrackRole kAllRoles[] = {TrackRole::SeqCls, TrackRole::SeqPos,
                                          TrackRole::StructCls, TrackRole::StructPos,
                                          TrackRole::Avg};

std::string_view role_name(TrackRole role);
std::optional<TrackRole> role_from_tag(std::uint8_t tag);

struct EmbeddingBundle {
  std::string variant_id;
  std::map<TrackRole, Vec> tracks;

  bool has(TrackRole role) const { return tracks.count(role) != 0; }
  // Throws DataError naming the variant and the missing role.
  const Vec& track(TrackRole role) const;
  // Common width of every track; throws FormatError if they disagree.
  Eigen::Index width() const;
};

using BundleMap = std::map<std::string, EmbeddingBundle>;

// Wild-type bundles are keyed per protein and site, since the position track
// depends on which residue was mutated.
std::string wt_variant_id(std::string_view protein_id, int position);
std::string mut_variant_id(const MutationRecord& r);

// DTME v1: "DTME", u32 version, u32 d_raw, then until EOF records of
// (u16 id length, id bytes, u8 role tag, d_raw x f32), all little-endian.
inline constexpr std::uint32_t kDtmeVersion = 1;

std::string encode_bundles(const BundleMap& bundles);
BundleMap decode_bundles(std::string_view bytes);
void write_bundles(const std::string& path, const BundleMap& bundles);
BundleMap read_bundles(const std::string& path);

}  // namespace dtm
