#include "predis/masking.hpp"

namespace predis {

MaskGenerator::MaskGenerator() {
  try {
    entropy_ = std::make_unique<std::random_device>();
  } catch (const std::exception& e) {
    throw MaskingError(MaskingErrc::kEntropyUnavailable, std::string("system entropy unavailable: ") + e.what());
  }
}

MaskGenerator::MaskGenerator(std::uint64_t seed) : engine_(std::in_place, seed) {}

std::uint64_t MaskGenerator::next() {
  if (engine_) return (*engine_)() & kAttributeMask;
  try {
    const std::uint64_t hi = (*entropy_)();
    const std::uint64_t lo = (*entropy_)();
    return ((hi << 32) | (lo & 0xFFFFFFFFu)) & kAttributeMask;
  } catch (const std::exception& e) {
    throw MaskingError(MaskingErrc::kEntropyUnavailable, std::string("system entropy unavailable: ") + e.what());
  }
}

MaskVector MaskGenerator::generate(std::uint64_t serial, std::uint64_t time) {
  MaskVector m;
  m.serial_number = serial;
  m.time = time;
  for (auto& r : m.masks) r = next();
  return m;
}

MaskVector gen_masks(MaskGenerator& rng, std::uint64_t serial, std::uint64_t time) {
  return rng.generate(serial, time);
}

MaskedTuple apply_mask(const FeatureTuple& tuple, const MaskVector& mask) {
  if (tuple.serial_number != mask.serial_number || tuple.time != mask.time) {
    throw MaskingError(MaskingErrc::kKeyMismatch, "mask vector belongs to a different window");
  }
  MaskedTuple out;
  out.serial_number = tuple.serial_number;
  out.time = tuple.time;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    out.masked_features[i] = (tuple.features[i] + mask.masks[i]) & kAttributeMask;
  }
  return out;
}

FeatureTuple remove_mask(const MaskedTuple& masked, const MaskVector& mask) {
  if (masked.serial_number != mask.serial_number || masked.time != mask.time) {
    throw MaskingError(MaskingErrc::kKeyMismatch, "mask vector belongs to a different window");
  }
  FeatureTuple out;
  out.serial_number = masked.serial_number;
  out.time = masked.time;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    out.features[i] = (masked.masked_features[i] - mask.masks[i]) & kAttributeMask;
  }
  return out;
}

std::array<std::uint8_t, kTupleBlockBytes> encode_mask(const MaskVector& m) {
  return pack_attributes({m.serial_number, m.time, m.masks[0], m.masks[1], m.masks[2], m.masks[3], m.masks[4]});
}

MaskVector decode_mask(std::span<const std::uint8_t> block) {
  const auto a = unpack_attributes(block);
  MaskVector m;
  m.serial_number = a[0];
  m.time = a[1];
  for (std::size_t i = 0; i < kFeatureCount; ++i) m.masks[i] = a[i + 2];
  return m;
}

std::array<std::uint8_t, kTupleBlockBytes> encode_masked_tuple(const MaskedTuple& t) {
  return pack_attributes({t.serial_number, t.time, t.masked_features[0], t.masked_features[1], t.masked_features[2],
                          t.masked_features[3], t.masked_features[4]});
}

MaskedTuple decode_masked_tuple(std::span<const std::uint8_t> block) {
  const auto a = unpack_attributes(block);
  MaskedTuple t;
  t.serial_number = a[0];
  t.time = a[1];
  for (std::size_t i = 0; i < kFeatureCount; ++i) t.masked_features[i] = a[i + 2];
  return t;
}

}  // namespace predis
