#include "leaflite/weights.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace leaflite {
namespace {

constexpr char kMagic[4] = {'L', 'W', 'T', 'S'};
constexpr std::uint8_t kDtypeF32 = 0;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u32(bits);
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      throw WeightFormatError(WeightErrorCode::kTruncated,
                              std::string("file ends inside ") + what);
    }
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::string join_names(const std::vector<std::string>& names) {
  std::string s;
  for (const auto& n : names) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}

}  // namespace

const char* to_string(WeightErrorCode code) {
  switch (code) {
    case WeightErrorCode::kBadMagic: return "bad magic";
    case WeightErrorCode::kBadVersion: return "unsupported version";
    case WeightErrorCode::kTruncated: return "truncated file";
    case WeightErrorCode::kChecksumMismatch: return "checksum mismatch";
    case WeightErrorCode::kBadDtype: return "unsupported dtype";
    case WeightErrorCode::kBadRank: return "unsupported rank";
    case WeightErrorCode::kDuplicateName: return "duplicate tensor name";
    case WeightErrorCode::kMissingNames: return "missing tensors";
    case WeightErrorCode::kUnexpectedNames: return "unexpected tensors";
    case WeightErrorCode::kShapeMismatch: return "shape mismatch";
    case WeightErrorCode::kNonFinite: return "non-finite values";
  }
  return "weight format error";
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large payloads.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

const Tensor& WeightStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw WeightFormatError(WeightErrorCode::kMissingNames, name);
  }
  return it->second;
}

Tensor& WeightStore::get_mutable(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw WeightFormatError(WeightErrorCode::kMissingNames, name);
  }
  return it->second;
}

std::vector<std::string> WeightStore::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, t] : tensors_) out.push_back(name);
  return out;
}

std::size_t WeightStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors_) n += t.size();
  return n;
}

void WeightStore::require(const std::vector<std::string>& names) const {
  std::vector<std::string> missing;
  for (const auto& n : names) {
    if (!contains(n)) missing.push_back(n);
  }
  if (!missing.empty()) {
    throw WeightFormatError(WeightErrorCode::kMissingNames, join_names(missing));
  }
}

void WeightStore::require_only(const std::vector<std::string>& names) const {
  const std::set<std::string> allowed(names.begin(), names.end());
  std::vector<std::string> extra;
  for (const auto& [name, t] : tensors_) {
    if (!allowed.count(name)) extra.push_back(name);
  }
  if (!extra.empty()) {
    throw WeightFormatError(WeightErrorCode::kUnexpectedNames, join_names(extra));
  }
}

std::vector<std::uint8_t> serialize_weights(const WeightStore& store) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kWeightFormatVersion);
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store.tensors()) {
    if (name.size() > 0xffff) {
      throw WeightFormatError(WeightErrorCode::kBadRank, "tensor name longer than 65535 bytes");
    }
    if (t.rank() < 1) {
      throw WeightFormatError(WeightErrorCode::kBadRank, "tensor " + name + " has rank 0");
    }
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(kDtypeF32);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (int d : t.shape().dims()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data()) w.f32(v);
  }
  auto& buf = w.buffer();
  const std::uint32_t crc = crc32(std::span<const std::uint8_t>(buf).subspan(sizeof kMagic));
  w.u32(crc);
  return std::move(buf);
}

WeightStore parse_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw WeightFormatError(WeightErrorCode::kBadMagic, "expected \"LWTS\" header");
  }
  // Header fields are checked before the checksum so that a wrong version or
  // a cut-off file is reported as such.
  Reader header(bytes.subspan(sizeof kMagic));
  const std::uint32_t version = header.u32("header");
  if (version != kWeightFormatVersion) {
    throw WeightFormatError(WeightErrorCode::kBadVersion,
                            "version " + std::to_string(version) + ", expected " +
                                std::to_string(kWeightFormatVersion));
  }
  header.u32("header");
  if (bytes.size() < sizeof kMagic + 12) {
    throw WeightFormatError(WeightErrorCode::kTruncated, "file ends before the checksum");
  }
  const auto body = bytes.subspan(sizeof kMagic, bytes.size() - sizeof kMagic - 4);
  Reader tail(bytes.subspan(bytes.size() - 4));
  const std::uint32_t stored_crc = tail.u32("checksum");

  // Walk the records first so truncation is distinguished from corruption.
  Reader r(body);
  r.u32("header");
  const std::uint32_t count = r.u32("header");
  struct Record {
    std::string name;
    std::vector<int> dims;
    std::size_t payload_offset;
  };
  std::vector<Record> records;
  records.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Record rec;
    const std::uint16_t len = r.u16("tensor name length");
    rec.name = r.str(len, "tensor name");
    const std::uint8_t dtype = r.u8("dtype");
    const std::uint8_t rank = r.u8("rank");
    if (dtype != kDtypeF32) {
      throw WeightFormatError(WeightErrorCode::kBadDtype,
                              rec.name + " has dtype " + std::to_string(dtype));
    }
    if (rank < 1 || rank > Shape::kMaxRank) {
      throw WeightFormatError(WeightErrorCode::kBadRank,
                              rec.name + " has rank " + std::to_string(rank));
    }
    std::size_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      const std::uint32_t extent = r.u32("dims");
      rec.dims.push_back(static_cast<int>(extent));
      numel *= extent;
    }
    rec.payload_offset = r.pos();
    r.need(numel * 4, "tensor payload");
    r.str(numel * 4, "tensor payload");
    records.push_back(std::move(rec));
  }
  if (r.pos() != body.size()) {
    throw WeightFormatError(WeightErrorCode::kChecksumMismatch,
                            "trailing bytes after the last tensor");
  }
  if (crc32(body) != stored_crc) {
    throw WeightFormatError(WeightErrorCode::kChecksumMismatch, "CRC-32 does not match");
  }

  WeightStore store;
  for (const auto& rec : records) {
    if (store.contains(rec.name)) {
      throw WeightFormatError(WeightErrorCode::kDuplicateName, rec.name);
    }
    const Shape shape(rec.dims);
    std::vector<float> values(shape.numel());
    const std::uint8_t* p = body.data() + rec.payload_offset;
    for (std::size_t k = 0; k < values.size(); ++k, p += 4) {
      const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                                 (static_cast<std::uint32_t>(p[1]) << 8) |
                                 (static_cast<std::uint32_t>(p[2]) << 16) |
                                 (static_cast<std::uint32_t>(p[3]) << 24);
      std::memcpy(&values[k], &bits, sizeof bits);
      if (!std::isfinite(values[k])) {
        throw WeightFormatError(WeightErrorCode::kNonFinite, rec.name);
      }
    }
    store.set(rec.name, Tensor(shape, std::move(values)));
  }
  return store;
}

void save_weights(const std::filesystem::path& path, const WeightStore& store) {
  const auto bytes = serialize_weights(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

WeightStore load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return parse_weights(bytes);
}

}  // namespace leaflite
