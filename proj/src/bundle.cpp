#include "dtm/data/bundle.hpp"

#include <cmath>
#include <limits>

#include "dtm/error.hpp"
#include "dtm/util/binary_io.hpp"

namespace dtm {

std::string_view role_name(TrackRole role) {
  switch (role) {
    case TrackRole::SeqCls: return "seq_cls";
    case TrackRole::SeqPos: return "seq_pos";
    case TrackRole::StructCls: return "struct_cls";
    case TrackRole::StructPos: return "struct_pos";
    case TrackRole::Avg: return "avg";
  }
  return "unknown";
}

std::optional<TrackRole> role_from_tag(std::uint8_t tag) {
  if (tag > static_cast<std::uint8_t>(TrackRole::Avg)) return std::nullopt;
  return static_cast<TrackRole>(tag);
}

const Vec& EmbeddingBundle::track(TrackRole role) const {
  auto it = tracks.find(role);
  if (it == tracks.end()) {
    throw DataError("bundle " + variant_id + " has no " + std::string(role_name(role)) + " track");
  }
  return it->second;
}

Eigen::Index EmbeddingBundle::width() const {
  Eigen::Index w = -1;
  for (const auto& [role, v] : tracks) {
    if (w >= 0 && v.size() != w) {
      throw FormatError("bundle " + variant_id + ": track " + std::string(role_name(role)) +
                        " has width " + std::to_string(v.size()) + ", expected " +
                        std::to_string(w));
    }
    w = v.size();
  }
  return w < 0 ? 0 : w;
}

std::string wt_variant_id(std::string_view protein_id, int position) {
  return std::string(protein_id) + ":WT@" + std::to_string(position);
}

std::string mut_variant_id(const MutationRecord& r) { return r.key(); }

std::string encode_bundles(const BundleMap& bundles) {
  Eigen::Index d_raw = 0;
  for (const auto& [id, b] : bundles) {
    const auto w = b.width();
    if (d_raw != 0 && w != d_raw) {
      throw FormatError("bundle " + id + " has width " + std::to_string(w) + ", file width is " +
                        std::to_string(d_raw));
    }
    d_raw = w;
  }
  ByteWriter out;
  out.bytes("DTME");
  out.u32(kDtmeVersion);
  out.u32(static_cast<std::uint32_t>(d_raw));
  for (const auto& [id, b] : bundles) {
    if (id != b.variant_id) throw FormatError("bundle key " + id + " != variant id " + b.variant_id);
    if (id.empty() || id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw FormatError("variant id length out of range: '" + id + "'");
    }
    for (const auto& [role, v] : b.tracks) {
      out.u16(static_cast<std::uint16_t>(id.size()));
      out.bytes(id);
      out.u8(static_cast<std::uint8_t>(role));
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) throw FormatError("bundle " + id + ": non-finite value");
        out.f32(static_cast<float>(v[i]));
      }
    }
  }
  return out.take();
}

BundleMap decode_bundles(std::string_view bytes) {
  ByteReader in(bytes);
  if (in.remaining() < 4 || in.bytes(4) != "DTME") {
    throw FormatError("bad magic at byte offset 0: not a DTME file");
  }
  const auto version = in.u32();
  if (version != kDtmeVersion) {
    throw FormatError("unsupported DTME version " + std::to_string(version) + " at byte offset 4");
  }
  const auto d_raw = in.u32();
  BundleMap out;
  while (!in.at_end()) {
    const std::size_t record_at = in.offset();
    if (d_raw == 0) {
      throw FormatError("record at byte offset " + std::to_string(record_at) +
                        " in a file declaring width 0");
    }
    const auto id_len = in.u16();
    if (id_len == 0) {
      throw FormatError("empty variant id at byte offset " + std::to_string(record_at));
    }
    std::string id(in.bytes(id_len));
    const std::size_t tag_at = in.offset();
    const auto role = role_from_tag(in.u8());
    if (!role) throw FormatError("unknown track role tag at byte offset " + std::to_string(tag_at));
    Vec v(d_raw);
    for (std::uint32_t i = 0; i < d_raw; ++i) v[i] = static_cast<real>(in.f32());
    auto& bundle = out[id];
    bundle.variant_id = id;
    if (!bundle.tracks.emplace(*role, std::move(v)).second) {
      throw FormatError("duplicate " + std::string(role_name(*role)) + " track for " + id +
                        " at byte offset " + std::to_string(record_at));
    }
  }
  return out;
}

void write_bundles(const std::string& path, const BundleMap& bundles) {
  write_file(path, encode_bundles(bundles));
}

BundleMap read_bundles(const std::string& path) {
  try {
    return decode_bundles(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace dtm
