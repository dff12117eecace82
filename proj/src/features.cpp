#include "predis/features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_set>

#include "predis/bitpack.hpp"

namespace predis {

std::string_view feature_name(std::size_t index) {
  static constexpr std::string_view kNames[] = {"mpf", "mbf", "pcf", "gop", "gsi"};
  return index < kFeatureCount ? kNames[index] : "?";
}

FixedPointCodec::FixedPointCodec(std::uint64_t scale) : scale_(scale) {
  if (scale == 0) throw FeatureError(FeatureErrc::kBadScale, "fixed-point scale must be positive");
}

FixedPointCodec::Encoded FixedPointCodec::encode(double value) const {
  if (std::isnan(value) || value < 0) throw std::invalid_argument("fixed-point encode: value must be non-negative");
  const double scaled = std::round(value * static_cast<double>(scale_));
  if (scaled > static_cast<double>(kPayloadMax)) return {kPayloadMax, true};
  return {static_cast<std::uint64_t>(scaled), false};
}

double median(std::span<const double> values) {
  if (values.empty()) throw FeatureError(FeatureErrc::kEmptyInput, "median of empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
}

FeatureVector compute_features(const FlowWindow& window) {
  FeatureVector out{};
  const auto& flows = window.flows;
  if (flows.empty()) return out;

  std::vector<double> packets;
  std::vector<double> bytes;
  packets.reserve(flows.size());
  bytes.reserve(flows.size());
  for (const auto& f : flows) {
    packets.push_back(static_cast<double>(f.packets));
    bytes.push_back(static_cast<double>(f.bytes));
  }

  using Direction = std::tuple<std::uint32_t, std::uint32_t, Protocol>;
  std::set<Direction> directions;
  std::unordered_set<std::uint32_t> ports;
  std::unordered_set<std::uint32_t> sources;
  for (const auto& f : flows) {
    directions.emplace(f.src_ip, f.dst_ip, f.protocol);
    ports.insert(f.src_port);
    ports.insert(f.dst_port);
    sources.insert(f.src_ip);
  }
  std::size_t interactive = 0;
  for (const auto& f : flows) {
    if (directions.count({f.dst_ip, f.src_ip, f.protocol}) > 0) ++interactive;
  }

  const double seconds = static_cast<double>(window.window_length_ms) / 1000.0;
  out[static_cast<std::size_t>(Feature::kMpf)] = median(packets);
  out[static_cast<std::size_t>(Feature::kMbf)] = median(bytes);
  out[static_cast<std::size_t>(Feature::kPcf)] = static_cast<double>(interactive) / static_cast<double>(flows.size());
  out[static_cast<std::size_t>(Feature::kGop)] = static_cast<double>(ports.size()) / seconds;
  out[static_cast<std::size_t>(Feature::kGsi)] = static_cast<double>(sources.size()) / seconds;
  return out;
}

FeatureTuple extract_features(const FlowWindow& window, const FixedPointCodec& codec) {
  if (window.window_start_ms < 0) throw FeatureError(FeatureErrc::kFieldOverflow, "window start before epoch");
  FeatureTuple t;
  t.serial_number = window.domain_id;
  t.time = static_cast<std::uint64_t>(window.window_start_ms / 1000);
  if (t.time > kPayloadMax) {
    t.time = kPayloadMax;
    t.overflow.set(1);
  }
  const auto values = compute_features(window);
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const auto enc = codec.encode(values[i]);
    t.features[i] = enc.value;
    t.overflow.set(i + 2, enc.overflow);
  }
  return t;
}

std::array<std::uint8_t, kTupleBlockBytes> pack_attributes(const std::array<std::uint64_t, kTupleAttributes>& attrs) {
  std::vector<std::uint8_t> buf;
  buf.reserve(kTupleBlockBytes);
  BitWriter w(buf);
  for (auto a : attrs) {
    if (a > kAttributeMask) throw FeatureError(FeatureErrc::kFieldOverflow, "attribute does not fit 33 bits");
    w.write(a, kAttributeBits);
  }
  w.flush();
  std::array<std::uint8_t, kTupleBlockBytes> out{};
  std::copy(buf.begin(), buf.end(), out.begin());
  return out;
}

std::array<std::uint64_t, kTupleAttributes> unpack_attributes(std::span<const std::uint8_t> block) {
  if (block.size() != kTupleBlockBytes) throw FeatureError(FeatureErrc::kBadBlock, "tuple block must be 29 bytes");
  if ((block.back() & 0x01) != 0) throw FeatureError(FeatureErrc::kBadBlock, "tuple block pad bit set");
  BitReader r(block);
  std::array<std::uint64_t, kTupleAttributes> attrs{};
  for (auto& a : attrs) a = r.read(kAttributeBits);
  return attrs;
}

std::array<std::uint8_t, kTupleBlockBytes> encode_tuple(const FeatureTuple& t) {
  std::array<std::uint64_t, kTupleAttributes> attrs{};
  const std::uint64_t payloads[kTupleAttributes] = {t.serial_number, t.time,          t.features[0], t.features[1],
                                                    t.features[2],   t.features[3], t.features[4]};
  for (std::size_t i = 0; i < kTupleAttributes; ++i) {
    if (payloads[i] > kPayloadMax) {
      throw FeatureError(FeatureErrc::kFieldOverflow,
                         "tuple attribute " + std::to_string(i) + " exceeds the 32-bit payload of a 33-bit field");
    }
    attrs[i] = payloads[i] | (t.overflow.test(i) ? std::uint64_t{1} << 32 : 0);
  }
  return pack_attributes(attrs);
}

FeatureTuple decode_tuple(std::span<const std::uint8_t> block) {
  const auto attrs = unpack_attributes(block);
  FeatureTuple t;
  for (std::size_t i = 0; i < kTupleAttributes; ++i) {
    const std::uint64_t payload = attrs[i] & kPayloadMax;
    t.overflow.set(i, (attrs[i] >> 32) != 0);
    if (i == 0) t.serial_number = payload;
    else if (i == 1) t.time = payload;
    else t.features[i - 2] = payload;
  }
  return t;
}

}  // namespace predis
