#include "predis/bitpack.hpp"

#include <stdexcept>

namespace predis {

void BitWriter::write(std::uint64_t value, unsigned width) {
  if (width > 64) throw std::invalid_argument("BitWriter: width > 64");
  if (width < 64) value &= (std::uint64_t{1} << width) - 1;
  bits_ += width;
  // Feed at most 32 bits at a time so acc_ never holds more than 39 bits.
  while (width > 0) {
    const unsigned take = width > 32 ? 32 : width;
    width -= take;
    const std::uint64_t part = (value >> width) & ((std::uint64_t{1} << take) - 1);
    acc_ = (acc_ << take) | part;
    pending_ += take;
    while (pending_ >= 8) {
      pending_ -= 8;
      out_.push_back(static_cast<std::uint8_t>(acc_ >> pending_));
    }
    acc_ &= (std::uint64_t{1} << pending_) - 1;
  }
}

void BitWriter::flush() {
  if (pending_ == 0) return;
  out_.push_back(static_cast<std::uint8_t>(acc_ << (8 - pending_)));
  bits_ += 8 - pending_;
  acc_ = 0;
  pending_ = 0;
}

std::uint64_t BitReader::read(unsigned width) {
  if (width > 64) throw std::invalid_argument("BitReader: width > 64");
  if (width > bits_remaining()) throw std::out_of_range("BitReader: read past end");
  std::uint64_t value = 0;
  while (width > 0) {
    const std::size_t byte = pos_ / 8;
    const unsigned bit_in_byte = static_cast<unsigned>(pos_ % 8);
    const unsigned avail = 8 - bit_in_byte;
    const unsigned take = width < avail ? width : avail;
    const unsigned shift = avail - take;
    const std::uint64_t bits = (in_[byte] >> shift) & ((1u << take) - 1);
    value = (value << take) | bits;
    width -= take;
    pos_ += take;
  }
  return value;
}

}  // namespace predis
