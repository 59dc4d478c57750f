#include "dtm/train/checkpoint.hpp"

#include "dtm/error.hpp"
#include "dtm/util/binary_io.hpp"
#include "json.hpp"

namespace dtm {

using nlohmann::json;

namespace {

void put_tensors(ByteWriter& out, const std::vector<Mat>& tensors) {
  for (const Mat& m : tensors) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out.f64(m.data()[i]);
  }
}

std::vector<Mat> get_tensors(ByteReader& in, const std::vector<std::pair<int, int>>& shapes) {
  std::vector<Mat> out;
  for (auto [rows, cols] : shapes) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = in.f64();
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

std::string encode_checkpoint(const TrainConfig& cfg, const Model& model, const AdamState* adam,
                              int epochs_done) {
  json params = json::array();
  for (const auto& p : model.params()) {
    params.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  json header{
      {"config", json::parse(config_to_json(cfg))},
      {"config_hash", config_hash(cfg)},
      {"seed", cfg.seed},
      {"params", params},
      {"epochs_done", epochs_done},
      {"adam", adam != nullptr},
      {"adam_step", adam ? adam->step : 0},
  };
  const std::string text = header.dump();

  ByteWriter out;
  out.bytes("DTMC");
  out.u32(kCheckpointVersion);
  out.u32(static_cast<std::uint32_t>(text.size()));
  out.bytes(text);
  std::vector<Mat> values;
  for (const auto& p : model.params()) values.push_back(p.value);
  put_tensors(out, values);
  if (adam) {
    put_tensors(out, adam->m);
    put_tensors(out, adam->v);
  }
  return out.take();
}

LoadedCheckpoint decode_checkpoint(std::string_view bytes) {
  ByteReader in(bytes);
  if (in.remaining() < 4 || in.bytes(4) != "DTMC") throw FormatError("bad magic: not a DTMC checkpoint");
  const auto version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = in.u32();
  json header;
  try {
    header = json::parse(in.bytes(header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint header: ") + e.what());
  }

  try {
    const TrainConfig cfg = config_from_json(header.at("config").dump());
    if (header.at("config_hash").get<std::string>() != config_hash(cfg)) {
      throw FormatError("checkpoint config hash does not match its config");
    }
    std::vector<std::pair<int, int>> shapes;
    std::vector<std::string> names;
    for (const auto& p : header.at("params")) {
      names.push_back(p.at("name").get<std::string>());
      shapes.emplace_back(p.at("rows").get<int>(), p.at("cols").get<int>());
    }
    auto values = get_tensors(in, shapes);
    ParamSet params;
    for (std::size_t i = 0; i < names.size(); ++i) params.add(names[i], std::move(values[i]));

    std::optional<AdamState> adam;
    if (header.at("adam").get<bool>()) {
      AdamState s;
      s.step = header.at("adam_step").get<std::int64_t>();
      s.m = get_tensors(in, shapes);
      s.v = get_tensors(in, shapes);
      adam = std::move(s);
    }
    if (!in.at_end()) {
      throw FormatError("trailing bytes after checkpoint payload at byte offset " +
                        std::to_string(in.offset()));
    }
    return {cfg, Model::from_params(cfg.model, std::move(params)), std::move(adam),
            header.at("epochs_done").get<int>()};
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header is missing fields: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const TrainConfig& cfg, const Model& model,
                     const AdamState* adam, int epochs_done) {
  write_file(path, encode_checkpoint(cfg, model, adam, epochs_done));
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace dtm
