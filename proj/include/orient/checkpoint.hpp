#pragma once

// Binary checkpoint layout (all integers little-endian):
//   "ORNT" | u32 version | u32 config_len | config JSON
//   u32 tensor_count | per tensor: u32 name_len, name, u8 dtype (0 = f32),
//                                  u32 ndim, u64 dims[ndim], u64 byte_offset
//   u64 payload_len | payload (f32 little-endian)

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "orient/config_io.hpp"
#include "orient/error.hpp"
#include "orient/model.hpp"
#include "orient/training.hpp"

namespace orient {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'O', 'R', 'N', 'T'};

struct Checkpoint {
  ModelParams<float> params;
  TrainConfig train_config;  // encoder and head mode agree with params
  double best_val_acc = 0.0;
  int best_epoch = 0;

  const EncoderConfig& encoder_config() const noexcept { return params.encoder.cfg; }
  HeadMode head_mode() const noexcept { return params.head_mode(); }
};

inline Checkpoint make_checkpoint(const TrainResult& result, const TrainConfig& cfg) {
  return {result.best, cfg, result.best_val_acc, result.best_epoch};
}

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const std::string& s) { buf_ += s; }
  const std::string& str() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& buf) : buf_(buf) {}

  std::uint8_t u8() {
    need(1, "corrupt header: unexpected end of file");
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    need(4, "corrupt header: unexpected end of file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8, "corrupt header: unexpected end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * i);
    return v;
  }
  std::string bytes(std::size_t n, const char* err = "corrupt header: unexpected end of file") {
    need(n, err);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const noexcept { return buf_.size() - pos_; }
  std::size_t pos() const noexcept { return pos_; }

 private:
  void need(std::size_t n, const char* err) const {
    if (buf_.size() - pos_ < n) throw InputError(err);
  }
  const std::string& buf_;
  std::size_t pos_ = 0;
};

inline std::uint32_t float_bits(float f) { return std::bit_cast<std::uint32_t>(f); }
inline float bits_float(std::uint32_t u) { return std::bit_cast<float>(u); }

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const json config{{"encoder", to_json(ckpt.encoder_config())},
                    {"head_mode", to_string(ckpt.head_mode())},
                    {"train", to_json(ckpt.train_config)},
                    {"best_val_acc", ckpt.best_val_acc},
                    {"best_epoch", ckpt.best_epoch}};
  const std::string blob = config.dump();

  detail::ByteWriter w;
  w.bytes(std::string(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.bytes(blob);

  std::vector<const ParamSet<float>*> sets;
  ckpt.params.for_each_set([&](const ParamSet<float>& s) { sets.push_back(&s); });
  std::uint32_t count = 0;
  for (const auto* s : sets) count += static_cast<std::uint32_t>(s->specs().size());
  w.u32(count);
  std::uint64_t offset = 0;
  for (const auto* s : sets) {
    for (const auto& t : s->specs()) {
      w.u32(static_cast<std::uint32_t>(t.name.size()));
      w.bytes(t.name);
      w.u8(0);
      const bool vector = t.cols == 1;
      w.u32(vector ? 1 : 2);
      w.u64(static_cast<std::uint64_t>(t.rows));
      if (!vector) w.u64(static_cast<std::uint64_t>(t.cols));
      w.u64(offset);
      offset += t.size() * sizeof(float);
    }
  }
  w.u64(offset);
  for (const auto* s : sets) {
    for (float f : s->flat()) w.u32(detail::float_bits(f));
  }
  return w.str();
}

// Parses a checkpoint image. When `expected` is given the stored encoder
// config must equal it.
inline Checkpoint deserialize_checkpoint(const std::string& bytes, const EncoderConfig* expected = nullptr) {
  detail::ByteReader r(bytes);
  if (r.bytes(4, "corrupt header: not a checkpoint file") != std::string(kCheckpointMagic, 4)) {
    throw InputError("corrupt header: bad magic bytes");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t config_len = r.u32();
  json config;
  try {
    config = json::parse(r.bytes(config_len));
  } catch (const json::exception&) {
    throw InputError("corrupt header: config blob is not valid JSON");
  }

  Checkpoint ckpt;
  EncoderConfig enc;
  HeadMode head = HeadMode::multi_layer;
  try {
    enc = config_from_json<EncoderConfig>(config.at("encoder"));
    head = parse_head_mode(config.at("head_mode").get<std::string>());
    ckpt.train_config = config_from_json<TrainConfig>(config.at("train"));
    ckpt.best_val_acc = config.at("best_val_acc").get<double>();
    ckpt.best_epoch = config.at("best_epoch").get<int>();
    enc.validate();
  } catch (const json::exception& e) {
    throw InputError(std::string("corrupt header: ") + e.what());
  }
  if (expected && !(*expected == enc)) throw InputError("config mismatch");
  ckpt.train_config.encoder = enc;
  ckpt.train_config.head_mode = head;
  ckpt.params = ModelParams<float>(enc, head);

  std::vector<ParamSet<float>*> sets;
  ckpt.params.for_each_set([&](ParamSet<float>& s) { sets.push_back(&s); });
  std::size_t expected_count = 0;
  for (const auto* s : sets) expected_count += s->specs().size();
  const std::uint32_t count = r.u32();
  if (count != expected_count) throw InputError("config mismatch: tensor count differs from the stored config");

  std::uint64_t offset = 0;
  for (auto* s : sets) {
    for (const auto& t : s->specs()) {
      const std::string name = r.bytes(r.u32());
      if (r.u8() != 0) throw InputError("corrupt header: unsupported tensor dtype");
      const std::uint32_t ndim = r.u32();
      if (ndim < 1 || ndim > 2) throw InputError("corrupt header: bad tensor rank");
      std::uint64_t rows = r.u64();
      std::uint64_t cols = ndim == 2 ? r.u64() : 1;
      const std::uint64_t at = r.u64();
      if (name != t.name || rows != static_cast<std::uint64_t>(t.rows) || cols != static_cast<std::uint64_t>(t.cols)) {
        throw InputError("config mismatch: tensor " + name + " does not fit the stored config");
      }
      if (at != offset) throw InputError("corrupt header: tensor offsets are not contiguous");
      offset += t.size() * sizeof(float);
    }
  }
  const std::uint64_t payload_len = r.u64();
  if (payload_len != offset) throw InputError("corrupt header: payload length disagrees with tensor directory");
  if (r.remaining() < payload_len) throw InputError("truncated tensor data");
  for (auto* s : sets) {
    for (float& f : s->flat()) f = detail::bits_float(r.u32());
  }
  if (r.remaining() != 0) throw InputError("corrupt header: trailing bytes after payload");
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const EncoderConfig* expected = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, expected);
}

}  // namespace orient
