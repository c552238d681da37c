// SPDX-License-Identifier: Apache-2.0
#include "lowlight/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "lowlight/errors.hpp"

namespace lowlight {

namespace {
constexpr char kMagic[8] = {'L', 'L', 'C', 'K', 'P', 'T', '\0', '\0'};
constexpr std::size_t kHeaderBytes = 8 + 4 + 8;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(std::uint64_t(v) >> (8 * i)));
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& data, std::size_t end) : data_(data), end_(end) {}
  const std::uint8_t* take(std::size_t n) {
    if (n > end_ - pos_) throw TruncatedFileError("checkpoint: unexpected end of data at byte " + std::to_string(pos_));
    const std::uint8_t* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename T>
  T uint() {
    const std::uint8_t* p = take(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return static_cast<T>(v);
  }
  std::size_t position() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& data_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

float float_from_bits(std::uint32_t bits) {
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

std::uint32_t bits_from_float(float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  return bits;
}
}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size, std::uint64_t hash) {
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= data[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::vector<std::uint8_t> serialize_checkpoint(Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.uint<std::uint64_t>(0);  // length, patched below
  const std::string config = ckpt.config.dump();
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(config.size()));
  w.bytes(config.data(), config.size());
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (numel(t.shape) != t.data.size())
      throw ShapeError("checkpoint: tensor " + t.name + " holds " + std::to_string(t.data.size()) +
                       " values for shape " + to_string(t.shape));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.uint<std::uint8_t>(0);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.uint<std::uint64_t>(static_cast<std::uint64_t>(static_cast<std::int64_t>(d)));
    w.uint<std::uint64_t>(t.data.size() * 4);
    for (float v : t.data) w.uint<std::uint32_t>(bits_from_float(v));
  }
  const std::uint64_t total = w.out.size() + 8;
  for (int i = 0; i < 8; ++i) w.out[12 + i] = static_cast<std::uint8_t>(total >> (8 * i));
  ckpt.checksum = fnv1a64(w.out.data(), w.out.size());
  w.uint<std::uint64_t>(ckpt.checksum);
  return std::move(w.out);
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  const std::size_t magic_len = std::min(bytes.size(), sizeof kMagic);
  if (std::memcmp(bytes.data(), kMagic, magic_len) != 0) throw BadMagicError("checkpoint: bad magic bytes");
  if (bytes.size() < kHeaderBytes) throw TruncatedFileError("checkpoint: file ends inside the header");
  Reader header(bytes, kHeaderBytes);
  header.take(sizeof kMagic);
  const auto version = header.uint<std::uint32_t>();
  if (version != kCheckpointVersion) throw VersionMismatchError(version, kCheckpointVersion);
  const auto declared = header.uint<std::uint64_t>();
  if (bytes.size() < declared)
    throw TruncatedFileError("checkpoint: file has " + std::to_string(bytes.size()) + " bytes, header declares " +
                             std::to_string(declared));
  if (declared < kHeaderBytes + 8 || bytes.size() != declared)
    throw ChecksumError("checkpoint: declared length " + std::to_string(declared) + " does not match file length " +
                        std::to_string(bytes.size()));
  Reader tail(bytes, declared);
  tail.take(declared - 8);
  const auto stored = tail.uint<std::uint64_t>();
  const std::uint64_t actual = fnv1a64(bytes.data(), declared - 8);
  if (stored != actual) throw ChecksumError("checkpoint: checksum mismatch (file is corrupted)");

  Checkpoint ckpt;
  ckpt.checksum = stored;
  Reader r(bytes, declared - 8);
  r.take(kHeaderBytes);
  const auto config_len = r.uint<std::uint32_t>();
  const std::uint8_t* config = r.take(config_len);
  try {
    ckpt.config = nlohmann::json::parse(config, config + config_len);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: config is not valid JSON: ") + e.what());
  }
  const auto count = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    const auto name_len = r.uint<std::uint32_t>();
    const std::uint8_t* name = r.take(name_len);
    t.name.assign(reinterpret_cast<const char*>(name), name_len);
    if (r.uint<std::uint8_t>() != 0) throw CheckpointError("checkpoint: tensor " + t.name + " has an unknown dtype");
    const auto rank = r.uint<std::uint32_t>();
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto extent = static_cast<std::int64_t>(r.uint<std::uint64_t>());
      if (extent < 0 || extent > (1 << 30)) throw CheckpointError("checkpoint: tensor " + t.name + " has a bad extent");
      t.shape.push_back(static_cast<int>(extent));
    }
    const auto payload = r.uint<std::uint64_t>();
    if (payload != numel(t.shape) * 4)
      throw CheckpointError("checkpoint: tensor " + t.name + " payload does not match its shape");
    t.data.resize(numel(t.shape));
    const std::uint8_t* p = r.take(payload);
    for (std::size_t k = 0; k < t.data.size(); ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= std::uint32_t(p[4 * k + b]) << (8 * b);
      t.data[k] = float_from_bits(bits);
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.position() != declared - 8) throw CheckpointError("checkpoint: trailing bytes after the tensor table");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, Checkpoint& ckpt) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

void add_tensors(Checkpoint& ckpt, const nn::ParamList& params, const std::string& prefix) {
  for (const auto& p : params) {
    CheckpointTensor t{prefix + p.name, p.tensor.shape(), {}};
    t.data.assign(p.tensor.data().begin(), p.tensor.data().end());
    ckpt.tensors.push_back(std::move(t));
  }
}

void load_tensors(const Checkpoint& ckpt, const nn::ParamList& params, const std::string& prefix) {
  for (const auto& p : params) {
    const CheckpointTensor* t = ckpt.find(prefix + p.name);
    if (!t) throw IncompatibleCheckpointError("checkpoint has no tensor named " + prefix + p.name);
    if (t->shape != p.tensor.shape())
      throw IncompatibleCheckpointError("checkpoint tensor " + t->name + " has shape " + to_string(t->shape) +
                                        ", model expects " + to_string(p.tensor.shape()));
    auto dst = p.tensor.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<Scalar>(t->data[i]);
  }
}

}  // namespace lowlight
