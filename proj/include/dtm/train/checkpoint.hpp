#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "dtm/heads/heads.hpp"
#include "dtm/optim/optim.hpp"
#include "dtm/train/trainer.hpp"

namespace dtm {

// DTMC v1, little-endian:
//   "DTMC", u32 version, u32 header length, header JSON (config, config hash,
//   seed, parameter names/shapes, optimizer step), then every parameter as
//   f64 row-major in header order, then Adam m and v in the same layout when
//   the header says they are present.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
  TrainConfig config;
  Model model;
  std::optional<AdamState> adam;
  int epochs_done = 0;
};

std::string encode_checkpoint(const TrainConfig& cfg, const Model& model, const AdamState* adam,
                              int epochs_done);
LoadedCheckpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::string& path, const TrainConfig& cfg, const Model& model,
                     const AdamState* adam, int epochs_done);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace dtm
