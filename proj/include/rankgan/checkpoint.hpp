#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rankgan/tensor.hpp"

namespace rankgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Container shared by every model: a kind tag, named integer header fields,
// and named parameter blocks of little-endian 64-bit floats.
//
// Binary layout (all integers little-endian):
//   "RKGN" | u32 version | str kind | u32 nfields { str name, u64 value }
//   | u32 nblocks { str name, u32 ndim, u64 dims[ndim], f64 data[] }
// where str is u32 length followed by bytes. A text manifest written next to
// the file ("<path>.manifest") lists each block's name, shape and FNV-1a
// checksum.
class Checkpoint {
 public:
  std::string kind;
  std::uint32_t version = kCheckpointVersion;

  void set_field(const std::string& name, std::uint64_t value);
  std::uint64_t field(const std::string& name) const;
  bool has_field(const std::string& name) const;

  void add_block(const std::string& name, const Tensor& t);
  const Tensor& block(const std::string& name) const;

  const std::vector<std::pair<std::string, std::uint64_t>>& fields() const { return fields_; }
  const std::vector<std::pair<std::string, Tensor>>& blocks() const { return blocks_; }

  std::vector<unsigned char> serialize() const;
  static Checkpoint deserialize(std::span<const unsigned char> bytes);

  std::string manifest() const;

  // Writes the binary file and its manifest.
  void save(const std::filesystem::path& path) const;
  // Reads and checks the kind (when nonempty), version and manifest checksums.
  static Checkpoint load(const std::filesystem::path& path, const std::string& expected_kind = "");

 private:
  std::vector<std::pair<std::string, std::uint64_t>> fields_;
  std::vector<std::pair<std::string, Tensor>> blocks_;
};

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t tensor_checksum(const Tensor& t);
std::uint64_t file_checksum(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

}  // namespace rankgan
