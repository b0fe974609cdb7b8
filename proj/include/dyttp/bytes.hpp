#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dyttp/error.hpp"

namespace dyttp {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h = kFnvOffset);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t h = kFnvOffset);

/// Appends little-endian fixed-width values.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  void raw(std::string_view text) { out_.insert(out_.end(), text.begin(), text.end()); }
  /// u32 length followed by the bytes.
  void str(std::string_view text);
  /// Appends the FNV-1a 64 of everything written so far.
  void checksum() { u64(fnv1a64(out_)); }

  /// Starts a container: magic, version and a length slot filled by end_container().
  void begin_container(const char (&magic)[8], std::uint32_t version);
  /// Writes the total file length into the header and appends the checksum.
  void end_container();

  std::size_t size() const { return out_.size(); }
  std::vector<std::uint8_t>& bytes() { return out_; }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

/// Bounds-checked little-endian reader; running past the end throws
/// TruncationError naming `what`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> raw(std::size_t n);
  std::string str();

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

/// Splits off and verifies the trailing FNV-1a 64 checksum; returns the body.
std::span<const std::uint8_t> verify_checksum(std::span<const std::uint8_t> bytes, const std::string& what);

/// Every binary format shares this framing: 8-byte magic, u32 version, u64
/// total file length, body, FNV-1a 64 checksum of everything before it.
inline constexpr std::size_t kContainerHeaderSize = 20;

/// Checks magic, version, declared length and checksum, in that order, and
/// returns the body. A file shorter than its declared length throws
/// TruncationError; a full-length file with a bad checksum throws
/// CorruptionError; anything else malformed throws FormatError.
std::span<const std::uint8_t> open_container(std::span<const std::uint8_t> bytes, const char (&magic)[8],
                                             std::uint32_t version, const std::string& what);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace dyttp
