#include "crowdsr/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "crowdsr/errors.hpp"

namespace crowdsr {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "CRSRCKPT 1\n";

json spec_json(const ModelSpec& s) {
  return {{"in_channels", s.in_channels},       {"stage_widths", s.stage_widths},
          {"convs_per_stage", s.convs_per_stage}, {"fusion_stages", s.fusion_stages},
          {"head_width", s.head_width},         {"sr_scale", s.sr_scale},
          {"sr_out_channels", s.sr_out_channels}};
}

ModelSpec spec_of(const json& j) {
  ModelSpec s;
  s.in_channels = j.at("in_channels").get<Index>();
  s.stage_widths = j.at("stage_widths").get<std::vector<Index>>();
  s.convs_per_stage = j.at("convs_per_stage").get<std::vector<Index>>();
  s.fusion_stages = j.at("fusion_stages").get<std::vector<int>>();
  s.head_width = j.at("head_width").get<Index>();
  s.sr_scale = j.at("sr_scale").get<Index>();
  s.sr_out_channels = j.at("sr_out_channels").get<Index>();
  s.validate();
  return s;
}

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xff) << (8 * (7 - i));
  return r;
}

}  // namespace

std::string spec_to_json(const ModelSpec& spec) { return spec_json(spec).dump(); }

ModelSpec spec_from_json(const std::string& text) {
  try {
    return spec_of(json::parse(text));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model spec: ") + e.what());
  }
}

std::string serialize_checkpoint(const Model& model) {
  json tensors = json::array();
  std::size_t offset = 0;
  for (const NamedTensor& e : model.params.entries()) {
    const Shape& s = e.tensor.shape();
    tensors.push_back({{"name", e.name},
                       {"shape", {s.n, s.c, s.h, s.w}},
                       {"partition", std::string(to_string(e.partition))},
                       {"offset", offset}});
    offset += static_cast<std::size_t>(e.tensor.numel()) * sizeof(double);
  }
  const json header = {{"spec", spec_json(model.spec)}, {"tensors", std::move(tensors)}};

  std::string out(kMagic);
  out += header.dump();
  out += '\n';
  const std::size_t base = out.size();
  out.resize(base + offset);
  char* p = out.data() + base;
  for (const NamedTensor& e : model.params.entries()) {
    for (Index i = 0; i < e.tensor.numel(); ++i) {
      const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(e.tensor.data()[i]));
      std::memcpy(p, &bits, sizeof bits);
      p += sizeof bits;
    }
  }
  return out;
}

Model deserialize_checkpoint(const std::string& bytes) {
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) throw InputError("not a checkpoint file");
  const std::size_t eol = bytes.find('\n', kMagic.size());
  if (eol == std::string::npos) throw InputError("truncated checkpoint header");
  const std::size_t base = eol + 1;
  Model model;
  try {
    const json header = json::parse(bytes.substr(kMagic.size(), eol - kMagic.size()));
    model.spec = spec_of(header.at("spec"));
    for (const json& t : header.at("tensors")) {
      const auto dims = t.at("shape").get<std::vector<Index>>();
      if (dims.size() != 4) throw InputError("tensor shape must have 4 extents");
      const Shape shape{dims[0], dims[1], dims[2], dims[3]};
      const auto offset = t.at("offset").get<std::size_t>();
      const std::size_t len = static_cast<std::size_t>(shape.numel()) * sizeof(double);
      if (base + offset + len > bytes.size()) throw InputError("truncated checkpoint data");
      Tensor tensor(shape);
      const char* p = bytes.data() + base + offset;
      for (Index i = 0; i < shape.numel(); ++i) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, p + i * sizeof bits, sizeof bits);
        tensor.data()[i] = std::bit_cast<double>(to_le(bits));
      }
      model.params.add(t.at("name").get<std::string>(),
                       parse_partition(t.at("partition").get<std::string>()), std::move(tensor));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed checkpoint header: ") + e.what());
  }
  check_compatible(model, model.spec);
  return model;
}

void save_checkpoint(const std::filesystem::path& file, const Model& model) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + file.string());
  out << serialize_checkpoint(model);
  if (!out) throw InputError("cannot write checkpoint " + file.string());
}

Model load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

void check_compatible(const Model& model, const ModelSpec& expected) {
  const std::vector<ParameterSlot> layout = parameter_layout(expected);
  std::ostringstream diff;
  for (const ParameterSlot& slot : layout) {
    const bool optional_head = slot.partition == Partition::super_resolution && !model.has_mssrm();
    if (!model.params.contains(slot.name)) {
      if (!optional_head) diff << "  missing " << slot.name << " " << slot.shape.str() << "\n";
      continue;
    }
    const Shape& got = model.params.at(slot.name).shape();
    if (got != slot.shape) {
      diff << "  " << slot.name << ": checkpoint " << got.str() << " vs expected " << slot.shape.str()
           << "\n";
    }
  }
  for (const NamedTensor& e : model.params.entries()) {
    const bool known = std::any_of(layout.begin(), layout.end(),
                                   [&](const ParameterSlot& s) { return s.name == e.name; });
    if (!known) diff << "  unexpected " << e.name << "\n";
  }
  if (!diff.str().empty()) throw ShapeError("checkpoint does not match model spec:\n" + diff.str());
}

}  // namespace crowdsr
