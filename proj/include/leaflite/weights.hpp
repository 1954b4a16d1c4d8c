#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "leaflite/error.hpp"
#include "leaflite/tensor.hpp"

namespace leaflite {

// Portable weight container ("LWTS"), little-endian:
//
//   "LWTS" | u32 version | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 dtype (0 = f32) | u8 rank |
//               u32 dims[rank] | f32 payload
//   u32 CRC-32 of every byte after the magic
inline constexpr std::uint32_t kWeightFormatVersion = 1;

enum class WeightErrorCode {
  kBadMagic,
  kBadVersion,
  kTruncated,
  kChecksumMismatch,
  kBadDtype,
  kBadRank,
  kDuplicateName,
  kMissingNames,
  kUnexpectedNames,
  kShapeMismatch,
  kNonFinite,
};

const char* to_string(WeightErrorCode code);

class WeightFormatError : public FormatError {
 public:
  WeightFormatError(WeightErrorCode code, const std::string& what)
      : FormatError(std::string(to_string(code)) + ": " + what), code_(code) {}

  WeightErrorCode code() const noexcept { return code_; }

 private:
  WeightErrorCode code_;
};

// Named parameter arrays. Iteration order is lexicographic by name, which is
// also the on-disk order.
class WeightStore {
 public:
  void set(const std::string& name, Tensor t) { tensors_[name] = std::move(t); }
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get_mutable(const std::string& name);

  std::size_t size() const noexcept { return tensors_.size(); }
  std::vector<std::string> names() const;
  std::size_t parameter_count() const;
  const std::map<std::string, Tensor>& tensors() const noexcept { return tensors_; }

  // Throws kMissingNames listing every absent name.
  void require(const std::vector<std::string>& names) const;
  // Throws kUnexpectedNames if anything outside `names` is present.
  void require_only(const std::vector<std::string>& names) const;

 private:
  std::map<std::string, Tensor> tensors_;
};

std::vector<std::uint8_t> serialize_weights(const WeightStore& store);
WeightStore parse_weights(std::span<const std::uint8_t> bytes);

void save_weights(const std::filesystem::path& path, const WeightStore& store);
WeightStore load_weights(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace leaflite
