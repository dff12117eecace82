#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "predis/features.hpp"
#include "predis/flow_model.hpp"
#include "predis/knn.hpp"

namespace fixtures {

inline predis::FlowRecord flow(std::uint32_t src, std::uint32_t dst, std::uint16_t sport, std::uint16_t dport,
                               std::uint64_t packets, std::uint64_t bytes, std::int64_t t = 0,
                               predis::Protocol proto = predis::Protocol::kTcp) {
  predis::FlowRecord f;
  f.src_ip = src;
  f.dst_ip = dst;
  f.src_port = sport;
  f.dst_port = dport;
  f.protocol = proto;
  f.packets = packets;
  f.bytes = bytes;
  f.timestamp_ms = t;
  f.label = predis::Label::kNormal;
  return f;
}

// Random training set with distinct ids 0..n-1. Values are drawn from a
// small range when `coarse` is set so ties and duplicate coordinates occur.
inline std::vector<predis::TrainingInstance> random_training(std::mt19937_64& rng, std::size_t n, bool coarse = false,
                                                             std::uint64_t max_value = 5'000'000) {
  std::uniform_int_distribution<std::uint64_t> value(0, coarse ? 6 : max_value);
  std::vector<predis::TrainingInstance> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].instance_id = static_cast<std::uint32_t>(i);
    for (auto& v : out[i].features) v = value(rng);
    out[i].label = (rng() & 1) ? predis::ClassLabel::kAttack : predis::ClassLabel::kNormal;
  }
  return out;
}

inline predis::FixedFeatures random_point(std::mt19937_64& rng, bool coarse = false,
                                          std::uint64_t max_value = 5'000'000) {
  std::uniform_int_distribution<std::uint64_t> value(0, coarse ? 6 : max_value);
  predis::FixedFeatures f{};
  for (auto& v : f) v = value(rng);
  return f;
}

// Independent oracle: exact k nearest by brute force over plain differences,
// ties by id, written without the library's NeighborSet.
struct OracleHit {
  unsigned __int128 d2;
  std::uint32_t id;
  predis::ClassLabel label;
};

inline std::vector<OracleHit> brute_force_knn(const std::vector<predis::TrainingInstance>& train,
                                              const predis::FixedFeatures& test, std::size_t k) {
  std::vector<OracleHit> all;
  for (const auto& t : train) {
    unsigned __int128 d2 = 0;
    for (std::size_t i = 0; i < predis::kFeatureCount; ++i) {
      const __int128 d = static_cast<__int128>(t.features[i]) - static_cast<__int128>(test[i]);
      d2 += static_cast<unsigned __int128>(d * d);
    }
    all.push_back({d2, t.instance_id, t.label});
  }
  std::sort(all.begin(), all.end(), [](const OracleHit& a, const OracleHit& b) {
    return a.d2 != b.d2 ? a.d2 < b.d2 : a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

inline predis::ClassLabel oracle_vote(const std::vector<OracleHit>& hits) {
  std::size_t attacks = 0;
  for (const auto& h : hits) attacks += h.label == predis::ClassLabel::kAttack;
  return 2 * attacks >= hits.size() ? predis::ClassLabel::kAttack : predis::ClassLabel::kNormal;
}

}  // namespace fixtures

namespace fixtures {

// Pearson statistic for 16 equal buckets over [0, 2^33).
inline double chi_square_16(const std::vector<std::uint64_t>& samples) {
  std::array<double, 16> counts{};
  for (auto s : samples) counts[(s & predis::kAttributeMask) >> 29] += 1;
  const double expected = static_cast<double>(samples.size()) / 16.0;
  double stat = 0;
  for (auto c : counts) stat += (c - expected) * (c - expected) / expected;
  return stat;
}

}  // namespace fixtures
