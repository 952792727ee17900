#pragma once

// Little/big-endian byte packing shared by the file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "gmmn/errors.hpp"

namespace gmmn::detail {

class ByteWriter {
public:
  void u32le(std::uint32_t v) { put_le(v, 4); }
  void u64le(std::uint64_t v) { put_le(v, 8); }
  void f64le(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }
  void u32be(std::uint32_t v) {
    for (int i = 3; i >= 0; --i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void bytes(std::string_view s) { out_.append(s); }
  void byte(std::uint8_t b) { out_.push_back(static_cast<char>(b)); }

  std::string take() { return std::move(out_); }

private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  std::string out_;
};

/// Bounds-checked reader; running off the end throws DataError(on_short).
class ByteReader {
public:
  ByteReader(std::string_view data, DataErrorCode on_short, std::string context)
      : data_(data), on_short_(on_short), context_(std::move(context)) {}

  std::uint32_t u32le() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64le() { return get_le(8); }
  double f64le() { return std::bit_cast<double>(get_le(8)); }
  std::uint32_t u32be() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
    pos_ += 4;
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n) const {
    if (remaining() < n) {
      throw DataError(on_short_, context_ + ": file is truncated (needed " + std::to_string(n) +
                                     " more bytes at offset " + std::to_string(pos_) + ", " +
                                     std::to_string(remaining()) + " left)");
    }
  }

private:
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  DataErrorCode on_short_;
  std::string context_;
};

} // namespace gmmn::detail
