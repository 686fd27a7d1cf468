#include "aga/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "aga/errors.hpp"

namespace aga {

namespace {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  std::string take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw ParseError(source_, 0, std::string("truncated checkpoint while reading ") + what);
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  template <typename U>
  U take_le(const char* what) {
    const std::string raw = take(sizeof(U), what);
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(static_cast<unsigned char>(raw[i])) << (8 * i);
    return value;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const std::map<std::string, std::string>& meta, const Parameters<float>& params) {
  std::string header = format_settings(model_settings(config));
  for (const auto& [key, value] : meta) header += "meta." + key + "=" + value + "\n";

  std::string payload;
  for (const auto& [name, tensor] : params.named()) {
    for (float v : tensor.values()) put_le(payload, std::bit_cast<std::uint32_t>(v));
  }

  std::string bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  put_le(bytes, kCheckpointVersion);
  put_le(bytes, static_cast<std::uint64_t>(header.size()));
  bytes += header;
  put_le(bytes, static_cast<std::uint64_t>(payload.size()));
  bytes += payload;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ContractError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open checkpoint");
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  Reader reader(bytes, path.string());

  if (reader.take(sizeof kCheckpointMagic, "magic") != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw ParseError(path.string(), 0, "not a checkpoint (bad magic)");
  }
  const auto version = reader.take_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError(path.string(), 0, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = reader.take_le<std::uint64_t>("header length");
  const std::string header = reader.take(static_cast<std::size_t>(header_len), "header");

  Checkpoint ckpt;
  Settings model_keys;
  for (auto& [key, value] : parse_settings(header, path.string())) {
    if (key.rfind("meta.", 0) == 0) {
      ckpt.meta[key.substr(5)] = value;
    } else {
      model_keys.emplace_back(key, value);
    }
  }
  ckpt.config = model_config_from(model_keys);
  ckpt.config.validate();
  ckpt.params = init_parameters<float>(ckpt.config);

  const auto payload_len = reader.take_le<std::uint64_t>("payload length");
  std::size_t expected = 0;
  for (const auto& [name, tensor] : ckpt.params.named()) expected += tensor.numel() * sizeof(float);
  if (payload_len != expected) {
    throw ParseError(path.string(), 0,
                     "payload holds " + std::to_string(payload_len) + " bytes, config needs " + std::to_string(expected));
  }
  for (auto& [name, tensor] : ckpt.params.named()) {
    auto copy = tensor;
    for (float& v : copy.mutable_values()) v = std::bit_cast<float>(reader.take_le<std::uint32_t>(name.c_str()));
  }
  if (!reader.done()) throw ParseError(path.string(), 0, "trailing bytes after payload");
  return ckpt;
}

}  // namespace aga
