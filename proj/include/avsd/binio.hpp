#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "avsd/error.hpp"

// Little-endian encode/decode helpers shared by the binary file formats.
namespace avsd::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void f32(float v) { raw(&v, 4); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  const std::string& buffer() const { return buf_; }

 private:
  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  std::string buf_;
};

// Bounds-checked reader. Every failure names the byte offset it happened at.
class Reader {
 public:
  Reader(std::string_view data, std::string source) : data_(data), source_(std::move(source)) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(bytes(1)[0]); }
  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, bytes(4).data(), 4);
    return v;
  }
  float f32() {
    float v;
    std::memcpy(&v, bytes(4).data(), 4);
    return v;
  }
  std::string str() {
    const auto n = u32();
    return std::string(bytes(n));
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ": " + what + " at offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw FormatError(source_ + ": truncated at offset " + std::to_string(pos_) + " (need " +
                        std::to_string(n) + " bytes, " + std::to_string(data_.size() - pos_) +
                        " left)");
    }
  }
  std::string_view data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
// Writes through a temporary and renames, so readers never see a partial file.
void write_file(const std::string& path, std::string_view contents);

}  // namespace avsd::binio
