#pragma once
// Binary parameter checkpoints (little-endian, versioned, digest-checked).

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "admm.hpp"
#include "model.hpp"

namespace ssgc {

inline constexpr char kCheckpointMagic[4] = {'S', 'S', 'G', 'C'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(const std::string& field, const std::string& what)
      : std::runtime_error("checkpoint field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Checkpoint {
  std::string model;
  std::uint32_t input_nodes = 0;
  std::uint32_t class_count = 0;
  std::uint64_t digest = 0;
  ParamSet params;
  MaskSet masks;  // one entry per block; empty entry = unmasked
};

namespace detail {

class ByteWriter {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    buf_.insert(buf_.end(), b, b + sizeof(T));
  }
  void put_bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  const std::vector<unsigned char>& bytes() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> b) : buf_(std::move(b)) {}
  template <class T>
  T get(const std::string& field) {
    need(sizeof(T), field);
    unsigned char b[sizeof(T)];
    std::memcpy(b, buf_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  std::string get_string(std::size_t n, const std::string& field) {
    need(n, field);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  const unsigned char* take(std::size_t n, const std::string& field) {
    need(n, field);
    const auto* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool at_end() const { return pos_ == buf_.size(); }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& field) const {
    if (buf_.size() - pos_ < n) throw CheckpointError(field, "truncated file");
  }
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

// Block layout of a model (values are irrelevant).
inline ParamSet init_params_shape(const ModelSpec& spec) {
  std::mt19937_64 rng(0);
  return init_params(spec, rng);
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const ModelSpec& spec, const ParamSet& params,
                                                    const MaskSet& masks) {
  if (!masks.empty() && masks.size() != params.blocks.size())
    throw std::invalid_argument("mask set does not match parameter blocks");
  detail::ByteWriter w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put(kCheckpointVersion);
  w.put(spec.digest());
  w.put(static_cast<std::uint16_t>(spec.name.size()));
  w.put_bytes(spec.name.data(), spec.name.size());
  w.put(static_cast<std::uint32_t>(spec.input_nodes));
  w.put(static_cast<std::uint32_t>(spec.class_count));
  w.put(static_cast<std::uint32_t>(params.blocks.size()));
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const auto& b = params.blocks[i];
    const bool has_mask = !masks.empty() && !masks[i].empty();
    if (has_mask && masks[i].size() != b.values.size())
      throw std::invalid_argument("mask length differs from block " + b.name);
    w.put(static_cast<std::uint16_t>(b.name.size()));
    w.put_bytes(b.name.data(), b.name.size());
    w.put(static_cast<std::uint8_t>(b.kind));
    w.put(static_cast<std::uint32_t>(b.layer));
    w.put(static_cast<std::uint64_t>(b.values.size()));
    w.put(static_cast<std::uint8_t>(has_mask));
    for (double v : b.values) w.put(std::bit_cast<std::uint64_t>(v));
    if (has_mask) {
      std::vector<unsigned char> bits((b.values.size() + 7) / 8, 0);
      for (std::size_t j = 0; j < masks[i].size(); ++j)
        if (masks[i][j]) bits[j / 8] |= static_cast<unsigned char>(1u << (j % 8));
      w.put_bytes(bits.data(), bits.size());
    }
  }
  return w.bytes();
}

/// Decodes a checkpoint. With `expect` set, the stored digest and block
/// layout must match that spec.
inline Checkpoint decode_checkpoint(std::vector<unsigned char> bytes, const ModelSpec* expect = nullptr) {
  detail::ByteReader r(std::move(bytes));
  Checkpoint ck;
  if (r.get_string(4, "magic") != std::string(kCheckpointMagic, 4)) throw CheckpointError("magic", "not a checkpoint");
  const auto version = r.get<std::uint8_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("version", "unsupported version " + std::to_string(version) + " (expected " +
                                         std::to_string(kCheckpointVersion) + ")");
  ck.digest = r.get<std::uint64_t>("digest");
  ck.model = r.get_string(r.get<std::uint16_t>("model_name_len"), "model_name");
  ck.input_nodes = r.get<std::uint32_t>("input_nodes");
  ck.class_count = r.get<std::uint32_t>("class_count");
  if (expect && ck.digest != expect->digest())
    throw CheckpointError("digest", "model digest mismatch (file was written for a different architecture)");
  const auto nblocks = r.get<std::uint32_t>("block_count");
  if (expect) {
    const auto ref = detail::init_params_shape(*expect);
    if (nblocks != ref.blocks.size()) throw CheckpointError("block_count", "does not match model");
  }
  ck.params.blocks.resize(nblocks);
  ck.masks.assign(nblocks, {});
  for (std::uint32_t i = 0; i < nblocks; ++i) {
    const std::string at = "block[" + std::to_string(i) + "].";
    auto& b = ck.params.blocks[i];
    b.name = r.get_string(r.get<std::uint16_t>(at + "name_len"), at + "name");
    const auto kind = r.get<std::uint8_t>(at + "kind");
    if (kind > static_cast<std::uint8_t>(BlockKind::NodeScale)) throw CheckpointError(at + "kind", "invalid value");
    b.kind = static_cast<BlockKind>(kind);
    b.layer = r.get<std::uint32_t>(at + "layer");
    const auto count = r.get<std::uint64_t>(at + "count");
    const auto has_mask = r.get<std::uint8_t>(at + "has_mask");
    if (has_mask > 1) throw CheckpointError(at + "has_mask", "invalid value");
    if (count > r.remaining() / 8) throw CheckpointError(at + "count", "exceeds remaining file size (truncated?)");
    b.values.resize(count);
    for (auto& v : b.values) v = std::bit_cast<double>(r.get<std::uint64_t>(at + "values"));
    if (has_mask) {
      const auto* bits = r.take((count + 7) / 8, at + "mask");
      auto& m = ck.masks[i];
      m.resize(count);
      for (std::size_t j = 0; j < count; ++j) m[j] = (bits[j / 8] >> (j % 8)) & 1u;
    }
  }
  if (!r.at_end()) throw CheckpointError("trailer", "unexpected bytes after last block");
  if (expect) {
    const auto ref = detail::init_params_shape(*expect);
    for (std::size_t i = 0; i < nblocks; ++i) {
      const auto& a = ck.params.blocks[i];
      const auto& e = ref.blocks[i];
      if (a.kind != e.kind || a.layer != e.layer || a.values.size() != e.values.size())
        throw CheckpointError("block[" + std::to_string(i) + "]", "shape does not match model");
    }
  }
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelSpec& spec, const ParamSet& params,
                            const MaskSet& masks = {}) {
  const auto bytes = encode_checkpoint(spec, params, masks);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelSpec* expect = nullptr) {
  return decode_checkpoint(read_file_bytes(path), expect);
}

}  // namespace ssgc
