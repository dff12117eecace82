#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace predis {

/// Appends fixed-width unsigned fields to a byte buffer, most significant bit
/// first. Trailing bits of the last byte are zero.
class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void write(std::uint64_t value, unsigned width);

  // Pads to the next byte boundary with zero bits.
  void flush();

  std::size_t bits_written() const noexcept { return bits_; }

 private:
  std::vector<std::uint8_t>& out_;
  std::uint64_t acc_ = 0;
  unsigned pending_ = 0;
  std::size_t bits_ = 0;
};

/// Reads MSB-first fixed-width fields. Reading past the end throws
/// std::out_of_range.
class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint64_t read(unsigned width);

  std::size_t bits_remaining() const noexcept { return in_.size() * 8 - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace predis
