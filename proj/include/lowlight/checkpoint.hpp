// SPDX-License-Identifier: Apache-2.0
#pragma once

// Binary checkpoint, all integers little-endian:
//
//   8 bytes  magic "LLCKPT\0\0"
//   u32      format version (kCheckpointVersion)
//   u64      total file length in bytes, checksum included
//   u32      config length, then that many bytes of UTF-8 JSON
//   u32      tensor count, then per tensor:
//              u32 name length, name bytes
//              u8  dtype (0 = float32)
//              u32 rank, then rank x i64 extents
//              u64 payload length, then float32 payload
//   u64      FNV-1a 64 checksum of every preceding byte

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "lowlight/nn.hpp"

namespace lowlight {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;
  std::uint64_t checksum = 0;  // filled by save/load

  const CheckpointTensor* find(const std::string& name) const;
};

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);

std::vector<std::uint8_t> serialize_checkpoint(Checkpoint& ckpt);
/// Error kinds: BadMagicError, VersionMismatchError, TruncatedFileError, ChecksumError.
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Writes the file and stores the checksum in `ckpt`.
void save_checkpoint(const std::filesystem::path& path, Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of named parameters with an optional name prefix.
void add_tensors(Checkpoint& ckpt, const nn::ParamList& params, const std::string& prefix = "");
/// Copies stored values into `params`; every parameter must be present with
/// the same shape (IncompatibleCheckpointError otherwise).
void load_tensors(const Checkpoint& ckpt, const nn::ParamList& params, const std::string& prefix = "");

}  // namespace lowlight
