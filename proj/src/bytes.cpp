#include <algorithm>
#include <cstring>
#include "dyttp/bytes.hpp"

#include <fstream>
#include <iterator>

namespace dyttp {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t h) {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t h) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), h);
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::str(std::string_view text) {
  u32(static_cast<std::uint32_t>(text.size()));
  raw(text);
}

void ByteReader::need(std::size_t n) const {
  if (n > remaining()) {
    throw TruncationError(what_ + ": truncated at byte " + std::to_string(pos_) + " (needed " + std::to_string(n) +
                          ", have " + std::to_string(remaining()) + ")");
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::str() {
  const auto n = u32();
  auto b = raw(n);
  return std::string(b.begin(), b.end());
}

std::span<const std::uint8_t> verify_checksum(std::span<const std::uint8_t> bytes, const std::string& what) {
  if (bytes.size() < 8) throw TruncationError(what + ": file too short for checksum");
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8), what);
  const auto stored = tail.u64();
  if (stored != fnv1a64(body)) throw CorruptionError(what + ": checksum mismatch (file corrupted)");
  return body;
}

void ByteWriter::begin_container(const char (&magic)[8], std::uint32_t version) {
  raw(std::string_view(magic, 8));
  u32(version);
  u64(0);
}

void ByteWriter::end_container() {
  const std::uint64_t total = out_.size() + 8;
  for (int i = 0; i < 8; ++i) out_[12 + i] = static_cast<std::uint8_t>(total >> (8 * i));
  checksum();
}

std::span<const std::uint8_t> open_container(std::span<const std::uint8_t> bytes, const char (&magic)[8],
                                             std::uint32_t version, const std::string& what) {
  const std::size_t prefix = std::min<std::size_t>(bytes.size(), 8);
  if (std::memcmp(bytes.data(), magic, prefix) != 0) throw FormatError(what + ": bad magic (wrong file type)");
  if (bytes.size() < kContainerHeaderSize) throw TruncationError(what + ": truncated header");
  ByteReader header(bytes.subspan(8, 12), what);
  const auto v = header.u32();
  if (v != version) {
    throw FormatError(what + ": unsupported format version " + std::to_string(v) + " (expected " +
                      std::to_string(version) + ")");
  }
  const auto declared = header.u64();
  if (bytes.size() < declared) {
    throw TruncationError(what + ": truncated (" + std::to_string(bytes.size()) + " of " + std::to_string(declared) +
                          " bytes)");
  }
  if (bytes.size() > declared || declared < kContainerHeaderSize + 8) {
    throw FormatError(what + ": file length " + std::to_string(bytes.size()) + " does not match the declared " +
                      std::to_string(declared) + " bytes");
  }
  return verify_checksum(bytes, what).subspan(kContainerHeaderSize);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move file into '" + path.string() + "': " + ec.message());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace dyttp
