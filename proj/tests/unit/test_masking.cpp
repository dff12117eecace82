#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <random>

#include "../support/fixtures.hpp"
#include "predis/masking.hpp"

using namespace predis;

namespace {

constexpr std::uint64_t k2_32 = std::uint64_t{1} << 32;
constexpr std::uint64_t k2_33 = std::uint64_t{1} << 33;

FeatureTuple tuple_with(std::array<std::uint64_t, kFeatureCount> f, std::uint64_t serial = 1, std::uint64_t time = 2) {
  FeatureTuple t;
  t.serial_number = serial;
  t.time = time;
  t.features = f;
  return t;
}

MaskVector mask_with(std::array<std::uint64_t, kFeatureCount> m, std::uint64_t serial = 1, std::uint64_t time = 2) {
  MaskVector v;
  v.serial_number = serial;
  v.time = time;
  v.masks = m;
  return v;
}

double critical_value() {
  return boost::math::quantile(boost::math::complement(boost::math::chi_squared(15), 0.001));
}

}  // namespace

TEST_CASE("chi-square critical value for 15 degrees of freedom") {
  CHECK(critical_value() == doctest::Approx(37.697).epsilon(1e-4));
}

TEST_CASE("gen_masks") {
  SUBCASE("seeded generators are reproducible") {
    MaskGenerator a(99), b(99);
    CHECK(gen_masks(a, 1, 2) == gen_masks(b, 1, 2));
    CHECK(a.seeded());
  }
  SUBCASE("the stream advances between windows") {
    MaskGenerator a(99);
    const auto m1 = gen_masks(a, 1, 2);
    const auto m2 = gen_masks(a, 1, 3);
    CHECK(m1.masks != m2.masks);
    CHECK(m2.key() == WindowKey{1, 3});
  }
  SUBCASE("entropy-backed masks stay within 33 bits") {
    MaskGenerator a;
    CHECK_FALSE(a.seeded());
    for (int i = 0; i < 1000; ++i) {
      for (auto m : gen_masks(a, 0, 0).masks) CHECK(m < k2_33);
    }
  }
}

TEST_CASE("masks are uniform over [0, 2^33)") {
  MaskGenerator rng(2024);
  std::array<std::vector<std::uint64_t>, kFeatureCount> samples;
  for (int i = 0; i < 100000; ++i) {
    const auto m = gen_masks(rng, 1, static_cast<std::uint64_t>(i));
    for (std::size_t d = 0; d < kFeatureCount; ++d) samples[d].push_back(m.masks[d]);
  }
  for (const auto& s : samples) CHECK(fixtures::chi_square_16(s) < critical_value());
}

TEST_CASE("masked values are uniform even for a constant feature") {
  MaskGenerator rng(7);
  const auto t = tuple_with({0, 5000, 1000, k2_32 - 1, 3}, 1, 0);
  std::array<std::vector<std::uint64_t>, kFeatureCount> samples;
  for (int i = 0; i < 100000; ++i) {
    auto tt = t;
    tt.time = static_cast<std::uint64_t>(i);
    const auto masked = apply_mask(tt, gen_masks(rng, 1, tt.time));
    for (std::size_t d = 0; d < kFeatureCount; ++d) samples[d].push_back(masked.masked_features[d]);
  }
  for (const auto& s : samples) CHECK(fixtures::chi_square_16(s) < critical_value());
}

TEST_CASE("chi-square detects a skewed source") {
  // Sanity check on the statistic itself: values confined to half the range.
  std::mt19937_64 rng(1);
  std::vector<std::uint64_t> skewed;
  for (int i = 0; i < 100000; ++i) skewed.push_back(rng() & (k2_32 - 1));
  CHECK(fixtures::chi_square_16(skewed) > critical_value());
}

TEST_CASE("apply_mask") {
  const auto masked = apply_mask(tuple_with({1, 2, 3, 4, 5}), mask_with({10, 10, 10, 10, 10}));
  CHECK(masked.masked_features == std::array<std::uint64_t, kFeatureCount>{11, 12, 13, 14, 15});
  CHECK(masked.serial_number == 1);
  CHECK(masked.time == 2);

  const auto wrapped = apply_mask(tuple_with({k2_33 - 1, 0, 0, 0, 0}), mask_with({1, 0, 0, 0, 0}));
  CHECK(wrapped.masked_features[0] == 0);

  try {
    apply_mask(tuple_with({0, 0, 0, 0, 0}, 1, 2), mask_with({0, 0, 0, 0, 0}, 1, 3));
    FAIL("expected KeyMismatch");
  } catch (const MaskingError& e) {
    CHECK(e.code() == MaskingErrc::kKeyMismatch);
  }
}

TEST_CASE("remove_mask inverts apply_mask") {
  const std::uint64_t edges[] = {0, 1, k2_32 - 1, k2_32, k2_33 - 1};
  std::mt19937_64 rng(31);
  for (int i = 0; i < 10000; ++i) {
    std::array<std::uint64_t, kFeatureCount> f{}, m{};
    for (std::size_t d = 0; d < kFeatureCount; ++d) {
      f[d] = (rng() % 4 == 0) ? edges[rng() % 5] : (rng() & kAttributeMask);
      m[d] = (rng() % 4 == 0) ? edges[rng() % 5] : (rng() & kAttributeMask);
    }
    const auto t = tuple_with(f, rng() & kAttributeMask, rng() & kAttributeMask);
    const auto mv = mask_with(m, t.serial_number, t.time);
    REQUIRE(remove_mask(apply_mask(t, mv), mv) == t);
  }
  for (auto f : edges) {
    for (auto m : edges) {
      const auto t = tuple_with({f, f, f, f, f});
      const auto mv = mask_with({m, m, m, m, m});
      CHECK(remove_mask(apply_mask(t, mv), mv) == t);
    }
  }
}

TEST_CASE("remove_mask_from_difference examples") {
  CHECK((100 - 30 - 5) % k2_33 == 65);
  CHECK(remove_mask_from_difference(65, 5) == 70);
  CHECK(remove_mask_from_difference(k2_33 - 70, 0) == -70);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto m = rng() & kAttributeMask;
    CHECK(remove_mask_from_difference((k2_33 - m) & kAttributeMask, m) == 0);
  }
  static_assert(to_signed33(k2_32) == -static_cast<std::int64_t>(k2_32));
  static_assert(to_signed33(k2_32 - 1) == static_cast<std::int64_t>(k2_32 - 1));
}

TEST_CASE("difference recovery over the boundary grid") {
  // Exact recovery needs |train - test| < 2^32; outside that range the result
  // is still congruent to the difference mod 2^33.
  const std::uint64_t grid[] = {0, 1, k2_32 - 1, k2_32, k2_33 - 1};
  std::mt19937_64 rng(37);
  std::size_t exact_cases = 0;
  for (int r = 0; r < 100; ++r) {
    const auto mask = rng() & kAttributeMask;
    for (auto train : grid) {
      for (auto test : grid) {
        const auto masked_test = (test + mask) & kAttributeMask;
        const auto perturbed = (train - masked_test) & kAttributeMask;
        const auto recovered = remove_mask_from_difference(perturbed, mask);
        const std::int64_t d = static_cast<std::int64_t>(train) - static_cast<std::int64_t>(test);
        CHECK(((static_cast<std::uint64_t>(recovered) - static_cast<std::uint64_t>(d)) & kAttributeMask) == 0);
        if (d > -static_cast<std::int64_t>(k2_32) && d < static_cast<std::int64_t>(k2_32)) {
          ++exact_cases;
          CHECK(recovered == d);
        }
      }
    }
  }
  CHECK(exact_cases > 0);
}

TEST_CASE("mask and masked-tuple blocks round trip") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 2000; ++i) {
    MaskVector m;
    m.serial_number = rng() & kAttributeMask;
    m.time = rng() & kAttributeMask;
    for (auto& x : m.masks) x = rng() & kAttributeMask;
    CHECK(decode_mask(encode_mask(m)) == m);
    MaskedTuple t;
    t.serial_number = m.serial_number;
    t.time = m.time;
    t.masked_features = m.masks;
    CHECK(decode_masked_tuple(encode_masked_tuple(t)) == t);
  }
}
