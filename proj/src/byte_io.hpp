#pragma once

// Little-endian encode/decode helpers shared by the workload and index formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "magicpig/errors.hpp"

namespace magicpig::detail {

class ByteWriter {
 public:
  void put_bytes(std::string_view s) { buf_.append(s); }
  void put_u16(std::uint16_t v) { put_le(v, 2); }
  void put_u32(std::uint32_t v) { put_le(v, 4); }
  void put_u64(std::uint64_t v) { put_le(v, 8); }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  /// Throws a FormatError naming expected vs actual length when fewer than
  /// `count` bytes remain.
  void require(std::size_t count, std::string_view what) const {
    if (remaining() < count) {
      throw FormatError("truncated " + std::string(what) + ": expected " +
                            std::to_string(count) + " more bytes, file has " +
                            std::to_string(remaining()),
                        pos_);
    }
  }

  std::string_view get_bytes(std::size_t count, std::string_view what) {
    require(count, what);
    auto s = data_.substr(pos_, count);
    pos_ += count;
    return s;
  }
  std::uint16_t get_u16(std::string_view what) {
    return static_cast<std::uint16_t>(get_le(2, what));
  }
  std::uint32_t get_u32(std::string_view what) {
    return static_cast<std::uint32_t>(get_le(4, what));
  }
  std::uint64_t get_u64(std::string_view what) { return get_le(8, what); }
  float get_f32(std::string_view what) { return std::bit_cast<float>(get_u32(what)); }

 private:
  std::uint64_t get_le(int width, std::string_view what) {
    require(static_cast<std::size_t>(width), what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace magicpig::detail
