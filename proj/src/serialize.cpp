#include "weightforge/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "weightforge/errors.hpp"

namespace wf::model {

namespace {

constexpr char kMagic[4] = {'W', 'F', 'N', 'N'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kMlpTag = 0;
constexpr std::uint8_t kLstmTag = 1;

void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<unsigned char>(
        (static_cast<std::make_unsigned_t<T>>(value) >> (8 * i)) & 0xFF);
  }
  write_bytes(out, bytes, sizeof(T));
}

void write_f64_le(std::ostream& out, double value) {
  write_le(out, std::bit_cast<std::uint64_t>(value));
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw FormatError("weights file: truncated");
  }
  std::make_unsigned_t<T> value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<std::make_unsigned_t<T>>(bytes[i]) << (8 * i);
  }
  return static_cast<T>(value);
}

double read_f64_le(std::istream& in) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in));
}

}  // namespace

void save_network(const NetworkState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw FileError("weights file: cannot write " + path);
  }
  write_bytes(out, kMagic, sizeof(kMagic));
  write_le(out, kVersion);
  if (state.kind == NetworkKind::mlp) {
    write_le(out, kMlpTag);
    write_le(out, static_cast<std::uint32_t>(state.mlp.n_i));
    write_le(out, static_cast<std::uint32_t>(state.mlp.n_hidden));
    write_le(out, static_cast<std::uint32_t>(state.mlp.n_o));
    write_le(out, static_cast<std::uint8_t>(state.mlp.activation));
  } else {
    write_le(out, kLstmTag);
    write_le(out, static_cast<std::uint32_t>(state.lstm.vocab_size));
    write_le(out, static_cast<std::uint32_t>(state.lstm.n_e));
    write_le(out, static_cast<std::uint32_t>(state.lstm.n_hidden));
    write_le(out, static_cast<std::uint32_t>(state.lstm.n_o));
  }
  for (const auto& tensor : state.tensors) {
    for (double v : tensor.value.data) {
      write_f64_le(out, v);
    }
  }
  if (!out) {
    throw FileError("weights file: write failed for " + path);
  }
}

NetworkState load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FileError("weights file: cannot open " + path);
  }
  char magic[4];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("weights file: bad magic in " + path);
  }
  const auto version = read_le<std::uint16_t>(in);
  if (version != kVersion) {
    throw FormatError("weights file: unsupported version " +
                      std::to_string(version));
  }
  const auto tag = read_le<std::uint8_t>(in);

  NetworkState state;
  if (tag == kMlpTag) {
    MlpSpec spec;
    spec.n_i = static_cast<int>(read_le<std::uint32_t>(in));
    spec.n_hidden = static_cast<int>(read_le<std::uint32_t>(in));
    spec.n_o = static_cast<int>(read_le<std::uint32_t>(in));
    const auto activation = read_le<std::uint8_t>(in);
    if (activation > static_cast<std::uint8_t>(Activation::tanh_)) {
      throw FormatError("weights file: unknown activation tag");
    }
    spec.activation = static_cast<Activation>(activation);
    state = init_mlp(spec, 0);
  } else if (tag == kLstmTag) {
    LstmSpec spec;
    spec.vocab_size = static_cast<int>(read_le<std::uint32_t>(in));
    spec.n_e = static_cast<int>(read_le<std::uint32_t>(in));
    spec.n_hidden = static_cast<int>(read_le<std::uint32_t>(in));
    spec.n_o = static_cast<int>(read_le<std::uint32_t>(in));
    state = init_lstm(spec, 0);
  } else {
    throw FormatError("weights file: unknown kind tag " + std::to_string(tag));
  }

  for (auto& tensor : state.tensors) {
    for (double& v : tensor.value.data) {
      v = read_f64_le(in);
    }
  }
  // Exactly the declared payload, nothing more.
  char extra;
  if (in.read(&extra, 1)) {
    throw FormatError("weights file: trailing bytes in " + path);
  }
  return state;
}

nlohmann::json network_to_json(const NetworkState& state) {
  nlohmann::json j;
  j["format"] = "wfnn";
  j["version"] = kVersion;
  if (state.kind == NetworkKind::mlp) {
    j["kind"] = "mlp";
    j["spec"] = {{"n_i", state.mlp.n_i},
                 {"n_hidden", state.mlp.n_hidden},
                 {"n_o", state.mlp.n_o},
                 {"activation",
                  state.mlp.activation == Activation::relu ? "relu" : "tanh"}};
  } else {
    j["kind"] = "lstm";
    j["spec"] = {{"vocab_size", state.lstm.vocab_size},
                 {"n_e", state.lstm.n_e},
                 {"n_hidden", state.lstm.n_hidden},
                 {"n_o", state.lstm.n_o}};
  }
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& tensor : state.tensors) {
    tensors.push_back({{"name", tensor.name},
                       {"layer", tensor.layer},
                       {"kind", tensor.kind == TensorKind::weight ? "weight"
                                                                  : "bias"},
                       {"shape", {tensor.value.rows, tensor.value.cols}},
                       {"values", tensor.value.data}});
  }
  j["tensors"] = tensors;
  return j;
}

}  // namespace wf::model
