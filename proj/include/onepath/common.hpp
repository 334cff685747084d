#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace onepath {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

// Error hierarchy. Every failure the protocol can signal maps to one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter combination that cannot work (window too large, ring too narrow).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Authenticated decryption failed: tampered ciphertext or wrong key.
class AuthError : public Error {
 public:
  using Error::Error;
};

// A discrete log fell outside the configured recovery window.
class DlogWindowError : public Error {
 public:
  using Error::Error;
};

// Out-of-order, replayed, or malformed protocol step.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized data.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }

  void uint_be(std::uint64_t v, std::size_t width) {
    for (std::size_t i = width; i-- > 0;) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void uint_le(std::uint64_t v, std::size_t width) {
    for (std::size_t i = 0; i < width; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32be(std::uint32_t v) { uint_be(v, 4); }
  void u64be(std::uint64_t v) { uint_be(v, 8); }
  void i64be(std::int64_t v) { uint_be(static_cast<std::uint64_t>(v), 8); }

  void raw(ByteSpan b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  // 4-byte big-endian length prefix followed by the bytes.
  void lp_bytes(ByteSpan b) {
    u32be(static_cast<std::uint32_t>(b.size()));
    raw(b);
  }

  std::size_t size() const { return buf_.size(); }
  const Bytes& data() const { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  Bytes buf_;
};

class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  std::uint8_t u8() { return need(1)[0]; }

  std::uint64_t uint_be(std::size_t width) {
    auto b = need(width);
    std::uint64_t v = 0;
    for (auto x : b) v = (v << 8) | x;
    return v;
  }
  std::uint64_t uint_le(std::size_t width) {
    auto b = need(width);
    std::uint64_t v = 0;
    for (std::size_t i = width; i-- > 0;) v = (v << 8) | b[i];
    return v;
  }
  std::uint32_t u32be() { return static_cast<std::uint32_t>(uint_be(4)); }
  std::uint64_t u64be() { return uint_be(8); }
  std::int64_t i64be() { return static_cast<std::int64_t>(uint_be(8)); }

  ByteSpan raw(std::size_t n) { return need(n); }

  ByteSpan lp_bytes(std::size_t max_len = std::size_t{1} << 30) {
    const std::uint32_t n = u32be();
    if (n > max_len) throw FormatError("length prefix " + std::to_string(n) + " exceeds limit");
    return need(n);
  }

  void expect_magic(std::string_view magic) {
    auto b = need(magic.size());
    if (!std::equal(b.begin(), b.end(), magic.begin()))
      throw FormatError("bad magic, expected \"" + std::string(magic) + "\"");
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }
  void expect_done() const {
    if (!done()) throw FormatError(std::to_string(remaining()) + " trailing bytes");
  }

 private:
  ByteSpan need(std::size_t n) {
    if (n > remaining()) throw FormatError("truncated input");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  ByteSpan data_;
  std::size_t pos_ = 0;
};

inline std::string to_hex(ByteSpan b) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * b.size());
  for (auto x : b) {
    out.push_back(kDigits[x >> 4]);
    out.push_back(kDigits[x & 15]);
  }
  return out;
}

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_string(ByteSpan b) { return std::string(b.begin(), b.end()); }

}  // namespace onepath
