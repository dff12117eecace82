#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "predis/error.hpp"
#include "predis/flow_model.hpp"

namespace predis {

inline constexpr unsigned kAttributeBits = 33;
inline constexpr std::uint64_t kAttributeModulus = std::uint64_t{1} << kAttributeBits;
inline constexpr std::uint64_t kAttributeMask = kAttributeModulus - 1;
// Largest payload an attribute can hold; bit 32 is the overflow flag.
inline constexpr std::uint64_t kPayloadMax = (std::uint64_t{1} << 32) - 1;

inline constexpr std::size_t kFeatureCount = 5;
inline constexpr std::size_t kTupleAttributes = 7;
inline constexpr std::size_t kTupleBlockBytes = 29;  // 7 x 33 bits, plus one pad bit

enum class Feature : std::size_t { kMpf = 0, kMbf, kPcf, kGop, kGsi };

std::string_view feature_name(std::size_t index);

using FeatureVector = std::array<double, kFeatureCount>;
using FixedFeatures = std::array<std::uint64_t, kFeatureCount>;

enum class FeatureErrc { kEmptyInput, kFieldOverflow, kBadBlock, kBadScale };
using FeatureError = Error<FeatureErrc>;

/// Maps non-negative reals onto 32-bit fixed-point payloads,
/// stored = round(value * scale), saturating at 2^32 - 1.
class FixedPointCodec {
 public:
  struct Encoded {
    std::uint64_t value = 0;
    bool overflow = false;
  };

  explicit FixedPointCodec(std::uint64_t scale = 1000);

  std::uint64_t scale() const noexcept { return scale_; }

  Encoded encode(double value) const;
  double decode(std::uint64_t stored) const { return static_cast<double>(stored) / static_cast<double>(scale_); }

  friend bool operator==(const FixedPointCodec&, const FixedPointCodec&) = default;

 private:
  std::uint64_t scale_;
};

/// The per-window seven-tuple <SerialNumber, Time, MPF, MBF, PCF, GOP, GSI>.
/// Every attribute is a 32-bit payload plus an overflow flag, 33 bits in all.
struct FeatureTuple {
  std::uint64_t serial_number = 0;
  std::uint64_t time = 0;
  FixedFeatures features{};
  // Index 0 = serial, 1 = time, 2..6 = MPF..GSI.
  std::bitset<kTupleAttributes> overflow;

  std::uint64_t feature(Feature f) const { return features[static_cast<std::size_t>(f)]; }

  friend bool operator==(const FeatureTuple&, const FeatureTuple&) = default;
};

/// Middle element for odd sizes, the mean of
/// the two middle elements otherwise. Throws FeatureError(kEmptyInput).
double median(std::span<const double> values);

/// The five window features in natural units (packets, bytes, fraction,
/// ports/s, sources/s). An empty window yields all zeros.
FeatureVector compute_features(const FlowWindow& window);

/// compute_features + fixed-point encoding into the seven-tuple. serial_number
/// carries the domain id and time the window start in whole seconds.
FeatureTuple extract_features(const FlowWindow& window, const FixedPointCodec& codec = FixedPointCodec{});

/// Packs the seven attributes MSB-first, 33 bits each, into 29 bytes.
/// Throws FeatureError(kFieldOverflow) when a payload exceeds 32 bits.
std::array<std::uint8_t, kTupleBlockBytes> encode_tuple(const FeatureTuple& tuple);
FeatureTuple decode_tuple(std::span<const std::uint8_t> block);

/// Raw 7 x 33-bit block codec shared by tuple, masked-tuple and mask blocks.
std::array<std::uint8_t, kTupleBlockBytes> pack_attributes(const std::array<std::uint64_t, kTupleAttributes>& attrs);
std::array<std::uint64_t, kTupleAttributes> unpack_attributes(std::span<const std::uint8_t> block);

}  // namespace predis
