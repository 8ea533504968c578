#include "lesionlab/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <nlohmann/json.hpp>

#include "lesionlab/errors.hpp"
#include "lesionlab/io.hpp"

namespace lesionlab {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

constexpr char kMagic[8] = {'L', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};

json config_json(const ModelConfig& c) {
  return {{"architecture", architecture_name(c.architecture)},
          {"vocab_size", c.vocab_size},
          {"context_length", c.context_length},
          {"width", c.width},
          {"layers", c.layers},
          {"heads", c.heads},
          {"ffn_hidden", c.ffn_hidden},
          {"groups", c.groups},
          {"experts", c.experts},
          {"active_experts", c.active_experts},
          {"expert_hidden", c.expert_hidden},
          {"renormalize_ablated_gates", c.renormalize_ablated_gates},
          {"seed", c.seed}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.architecture = architecture_from_name(j.at("architecture").get<std::string>());
  c.vocab_size = j.at("vocab_size");
  c.context_length = j.at("context_length");
  c.width = j.at("width");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.ffn_hidden = j.at("ffn_hidden");
  c.groups = j.at("groups");
  c.experts = j.at("experts");
  c.active_experts = j.at("active_experts");
  c.expert_hidden = j.at("expert_hidden");
  c.renormalize_ablated_gates = j.at("renormalize_ablated_gates");
  c.seed = j.at("seed");
  return c;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw DataError("truncated checkpoint");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig model_config_from_json(std::string_view text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model config: ") + e.what());
  }
}

std::string serialize_checkpoint(const Model& model) {
  const ParameterStore& ps = model.params();
  json header;
  header["config"] = config_json(model.config());
  json tensors = json::array();
  for (ParamId id = 0; id < ps.size(); ++id) {
    tensors.push_back({{"name", ps.name(id)}, {"shape", ps.tensor(id).shape()}});
  }
  header["tensors"] = std::move(tensors);
  json mask = json::array();
  for (const auto& u : model.zero_mask()) mask.push_back(unit_label(u));
  header["zero_mask"] = std::move(mask);
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (ParamId id = 0; id < ps.size(); ++id) {
    const Tensor& t = ps.tensor(id);
    out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(double));
  }
  return out;
}

Model deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw DataError("not a lesionlab checkpoint");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw DataError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }
  pos += header_len;

  ParameterStore store;
  for (const auto& t : header.at("tensors")) {
    Tensor tensor(t.at("shape").get<Shape>());
    const std::size_t n = tensor.size() * sizeof(double);
    if (pos + n > bytes.size()) throw DataError("truncated checkpoint payload");
    std::memcpy(tensor.data(), bytes.data() + pos, n);
    pos += n;
    store.add(t.at("name").get<std::string>(), std::move(tensor));
  }
  if (pos != bytes.size()) throw DataError("trailing bytes in checkpoint");
  Model model(config_from(header.at("config")), std::move(store));
  for (const auto& label : header.at("zero_mask")) model.mask_unit(parse_unit_label(label.get<std::string>()));
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

}  // namespace lesionlab
