#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>

#include "predis/error.hpp"
#include "predis/features.hpp"

namespace predis {

/// Correlation key shared by a masked tuple, its mask vector, the
/// preliminary result and any alarm: (serial number, time).
struct WindowKey {
  std::uint64_t serial = 0;
  std::uint64_t time = 0;

  friend auto operator<=>(const WindowKey&, const WindowKey&) = default;
};

struct WindowKeyHash {
  std::size_t operator()(const WindowKey& k) const noexcept {
    return std::hash<std::uint64_t>{}(k.serial * 0x9E3779B97F4A7C15ULL ^ k.time);
  }
};

/// Per-attribute additive masks for one window. Serial and time are not
/// masked; they identify the window.
struct MaskVector {
  std::uint64_t serial_number = 0;
  std::uint64_t time = 0;
  std::array<std::uint64_t, kFeatureCount> masks{};

  WindowKey key() const { return {serial_number, time}; }
  friend bool operator==(const MaskVector&, const MaskVector&) = default;
};

struct MaskedTuple {
  std::uint64_t serial_number = 0;
  std::uint64_t time = 0;
  std::array<std::uint64_t, kFeatureCount> masked_features{};

  WindowKey key() const { return {serial_number, time}; }
  friend bool operator==(const MaskedTuple&, const MaskedTuple&) = default;
};

enum class MaskingErrc { kKeyMismatch, kEntropyUnavailable, kBadBlock };
using MaskingError = Error<MaskingErrc>;

/// Source of uniform 33-bit masks. Seeded generators are reproducible and
/// meant for tests; the default constructor draws from system entropy.
class MaskGenerator {
 public:
  MaskGenerator();
  explicit MaskGenerator(std::uint64_t seed);

  MaskVector generate(std::uint64_t serial, std::uint64_t time);

  bool seeded() const noexcept { return engine_.has_value(); }

 private:
  std::uint64_t next();

  std::optional<std::mt19937_64> engine_;
  std::unique_ptr<std::random_device> entropy_;
};

MaskVector gen_masks(MaskGenerator& rng, std::uint64_t serial, std::uint64_t time);

/// (feature + mask) mod 2^33 per attribute. Throws kKeyMismatch if the keys
/// differ.
MaskedTuple apply_mask(const FeatureTuple& tuple, const MaskVector& mask);

/// Inverse of apply_mask. Overflow flags are not carried by a MaskedTuple, so
/// the result has them cleared.
FeatureTuple remove_mask(const MaskedTuple& masked, const MaskVector& mask);

/// Interprets a 33-bit value as two's complement: [-2^32, 2^32).
constexpr std::int64_t to_signed33(std::uint64_t v) {
  v &= kAttributeMask;
  return v >= (std::uint64_t{1} << 32) ? static_cast<std::int64_t>(v) - static_cast<std::int64_t>(kAttributeModulus)
                                       : static_cast<std::int64_t>(v);
}

/// Recovers train - test from (train - (test + mask)) mod 2^33 by adding the
/// mask back. Exact whenever |train - test| < 2^32.
constexpr std::int64_t remove_mask_from_difference(std::uint64_t perturbed_diff, std::uint64_t mask) {
  return to_signed33(perturbed_diff + mask);
}

std::array<std::uint8_t, kTupleBlockBytes> encode_mask(const MaskVector& mask);
MaskVector decode_mask(std::span<const std::uint8_t> block);

std::array<std::uint8_t, kTupleBlockBytes> encode_masked_tuple(const MaskedTuple& tuple);
MaskedTuple decode_masked_tuple(std::span<const std::uint8_t> block);

}  // namespace predis
