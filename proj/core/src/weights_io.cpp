#include "ganscope/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ganscope/image_io.hpp"

namespace ganscope::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "weight files are written in host order; big-endian hosts need byte swapping");

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> v) {
  const std::size_t at = out.size();
  out.resize(at + v.size() * sizeof(float));
  std::memcpy(out.data() + at, v.data(), v.size() * sizeof(float));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(std::string("weight file truncated while reading ") + what);
    }
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void floats(std::span<float> out, const char* what) {
    need(out.size() * sizeof(float), what);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * sizeof(float));
    pos_ += out.size() * sizeof(float);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

nlohmann::json spec_to_json(const nn::LayerSpec& s) {
  return {{"kind", nn::to_string(s.kind)},
          {"in_shape", s.in_shape},
          {"out_shape", s.out_shape},
          {"kernel", s.kernel},
          {"stride", s.stride},
          {"padding", s.padding},
          {"activation", nn::to_string(s.activation)},
          {"slope", s.slope},
          {"weight_shape", s.weight_shape()},
          {"bias_shape", s.bias_shape()}};
}

nn::LayerSpec spec_from_json(const nlohmann::json& j) {
  nn::LayerSpec s;
  s.kind = nn::parse_layer_kind(j.at("kind").get<std::string>());
  s.in_shape = j.at("in_shape").get<Shape>();
  s.out_shape = j.at("out_shape").get<Shape>();
  s.kernel = j.at("kernel").get<int>();
  s.stride = j.at("stride").get<int>();
  s.padding = j.at("padding").get<int>();
  s.activation = nn::parse_activation(j.at("activation").get<std::string>());
  s.slope = j.at("slope").get<float>();
  if (j.at("weight_shape").get<Shape>() != s.weight_shape() ||
      j.at("bias_shape").get<Shape>() != s.bias_shape()) {
    throw FormatError("layer header shapes are inconsistent with its geometry");
  }
  return s;
}

std::vector<std::uint8_t> encode_bundle(const NetworkBundle& bundle) {
  nlohmann::json header;
  header["kind"] = bundle.kind;
  header["meta"] = bundle.meta;
  header["networks"] = nlohmann::json::array();
  for (const auto& [name, net] : bundle.networks) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t i = 0; i < net.size(); ++i) layers.push_back(spec_to_json(net[i].spec()));
    header["networks"].push_back({{"name", name}, {"layers", layers}});
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kWeightsMagic), std::end(kWeightsMagic));
  put_u16(out, kWeightsVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& entry : bundle.networks) {
    const nn::Sequential& net = entry.second;
    for (std::size_t i = 0; i < net.size(); ++i) {
      put_floats(out, net[i].weight().data());
      put_floats(out, net[i].bias().data());
    }
  }
  return out;
}

NetworkBundle decode_bundle(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4, "magic") != std::string(kWeightsMagic, 4)) {
    throw FormatError("not a weight file (bad magic bytes)");
  }
  const std::uint16_t version = r.u16("version");
  if (version != kWeightsVersion) {
    throw FormatError("unsupported weight file version " + std::to_string(version) + " (expected " +
                      std::to_string(kWeightsVersion) + ")");
  }
  const std::uint32_t len = r.u32("header length");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str(len, "header"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt weight file header: ") + e.what());
  }
  NetworkBundle b;
  try {
    b.kind = header.at("kind").get<std::string>();
    b.meta = header.at("meta");
    for (const auto& nj : header.at("networks")) {
      std::vector<nn::LayerSpec> specs;
      for (const auto& lj : nj.at("layers")) specs.push_back(spec_from_json(lj));
      b.networks.emplace_back(nj.at("name").get<std::string>(), nn::Sequential(std::move(specs)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed weight file header: ") + e.what());
  }
  for (auto& entry : b.networks) {
    nn::Sequential& net = entry.second;
    for (std::size_t i = 0; i < net.size(); ++i) {
      r.floats(net[i].weight().data(), "weights");
      r.floats(net[i].bias().data(), "weights");
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after weight blobs");
  return b;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

void write_bundle(const std::filesystem::path& path, const NetworkBundle& bundle) {
  write_file_bytes(path, encode_bundle(bundle));
}

NetworkBundle read_bundle(const std::filesystem::path& path) {
  try {
    return decode_bundle(read_file_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace ganscope::io
