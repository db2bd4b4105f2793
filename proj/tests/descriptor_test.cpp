#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

#include "bitvo/descriptor.hpp"
#include "test_util.hpp"

using namespace bitvo;

namespace {

int naive_hamming(Descriptor44 a, Descriptor44 b) {
  int count = 0;
  for (int i = 0; i < 44; ++i) {
    if (((a.bits >> i) & 1u) != ((b.bits >> i) & 1u)) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("extract_patch") {
  EdgeBitmap edges;
  SECTION("all-zero bitmap gives empty patch") {
    const auto patch = extract_patch(edges, PixelEvent{100, 100});
    REQUIRE(patch.has_value());
    REQUIRE(patch->bits == 0);
  }
  SECTION("single pixel at the corner sets only the center bit") {
    edges.set(100, 100);
    const auto patch = extract_patch(edges, PixelEvent{100, 100});
    REQUIRE(patch.has_value());
    REQUIRE(patch->bits == (uint64_t(1) << 24));
  }
  SECTION("window leaving the image is rejected") {
    REQUIRE_FALSE(extract_patch(edges, PixelEvent{2, 100}).has_value());
    REQUIRE_FALSE(extract_patch(edges, PixelEvent{100, 253}).has_value());
    REQUIRE(extract_patch(edges, PixelEvent{3, 3}).has_value());
    REQUIRE(extract_patch(edges, PixelEvent{252, 252}).has_value());
  }
  SECTION("row-major layout") {
    edges.set(97, 98);  // offset (-3, -2) from (100, 100) -> bit 1*7 + 0 = 7
    const auto patch = extract_patch(edges, PixelEvent{100, 100});
    REQUIRE(patch.has_value());
    REQUIRE(patch->bits == (uint64_t(1) << 7));
    REQUIRE(patch->get(-3, -2));
  }
}

TEST_CASE("compute_orientation") {
  SECTION("positive x axis") {
    BinaryPatch7 patch;
    patch.set(3, 0);
    REQUIRE(compute_orientation(patch).theta_deg == 0.0);
  }
  SECTION("positive y axis") {
    BinaryPatch7 patch;
    patch.set(0, 3);
    REQUIRE(std::abs(compute_orientation(patch).theta_deg - 90.0) < 1e-12);
  }
  SECTION("diagonal centroid") {
    BinaryPatch7 patch;
    patch.set(3, 0);
    patch.set(0, 3);
    REQUIRE(std::abs(compute_orientation(patch).theta_deg - 45.0) < 1e-12);
  }
  SECTION("zero moment falls back to 0") {
    BinaryPatch7 empty;
    REQUIRE(compute_orientation(empty).theta_deg == 0.0);
    BinaryPatch7 symmetric;
    symmetric.set(1, 0);
    symmetric.set(-1, 0);
    REQUIRE(compute_orientation(symmetric).theta_deg == 0.0);
  }
  SECTION("third quadrant maps into [0,360)") {
    BinaryPatch7 patch;
    patch.set(-3, -3);
    const double theta = compute_orientation(patch).theta_deg;
    REQUIRE(std::abs(theta - 225.0) < 1e-12);
  }
}

TEST_CASE("patch_to_rings") {
  SECTION("empty patch") {
    const RingSet rings = patch_to_rings(BinaryPatch7{});
    REQUIRE(rings == RingSet{});
  }
  SECTION("full patch saturates every ring") {
    BinaryPatch7 patch;
    patch.bits = BinaryPatch7::kMask;
    const RingSet rings = patch_to_rings(patch);
    REQUIRE(rings.r1 == 0xFFu);
    REQUIRE(rings.r2 == 0xFFFFu);
    REQUIRE(rings.r3 == 0xFFFFFu);
  }
  SECTION("center bit is never sampled") {
    BinaryPatch7 patch;
    patch.set(0, 0);
    REQUIRE(patch_to_rings(patch) == RingSet{});
  }
  SECTION("patch corners are never sampled") {
    BinaryPatch7 patch;
    patch.set(3, 3);
    patch.set(-3, 3);
    patch.set(3, -3);
    patch.set(-3, -3);
    REQUIRE(patch_to_rings(patch) == RingSet{});
  }
  SECTION("ring sizes partition the sampled bits") {
    // 8 + 16 + 20 = 44 distinct samples.
    BinaryPatch7 patch;
    patch.bits = BinaryPatch7::kMask;
    const RingSet rings = patch_to_rings(patch);
    REQUIRE(std::popcount(rings.r1) + std::popcount(rings.r2) + std::popcount(rings.r3) == 44);
  }
}

TEST_CASE("rotate_ring") {
  SECTION("zero orientation is the identity") {
    REQUIRE(rotate_ring(0xABCDu, 16, Orientation{0.0}) == 0xABCDu);
  }
  SECTION("90 degrees rotates a 16-ring by 4") {
    REQUIRE(rotate_by(90.0, 16) == 4);
    const uint32_t ring = 1u << 4;
    REQUIRE(rotate_ring(ring, 16, Orientation{90.0}) == 1u);
  }
  SECTION("359.9 degrees rotates an 8-ring by 7") {
    REQUIRE(rotate_by(359.9, 8) == 7);
    const uint32_t ring = 1u << 7;
    REQUIRE(rotate_ring(ring, 8, Orientation{359.9}) == 1u);
  }
  SECTION("rotation wraps around") {
    const uint32_t ring = 0b101u;
    const uint32_t rotated = rotate_ring(ring, 8, Orientation{45.0});  // one position
    REQUIRE(rotated == ((1u << 7) | (1u << 1)));
  }
}

TEST_CASE("build_descriptor") {
  SECTION("empty patch gives descriptor 0") {
    REQUIRE(build_descriptor(BinaryPatch7{}).bits == 0);
  }
  SECTION("outer ring bit 0 with zero orientation packs to value 1") {
    BinaryPatch7 patch;
    patch.set(3, 0);  // r3 sample 0; orientation of this patch is 0
    REQUIRE(compute_orientation(patch).theta_deg == 0.0);
    REQUIRE(build_descriptor(patch).bits == 1);
  }
  SECTION("border corner propagates") {
    EdgeBitmap edges;
    REQUIRE_FALSE(build_descriptor(edges, PixelEvent{1, 1}).has_value());
  }
  SECTION("90 degree rotations give identical descriptors") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 2000; ++i) {
      const BinaryPatch7 patch = testutil::random_patch(rng);
      if (testutil::zero_moment(patch)) continue;
      const Descriptor44 base = build_descriptor(patch);
      BinaryPatch7 rotated = patch;
      for (int k = 0; k < 3; ++k) {
        rotated = testutil::rotate_patch_90(rotated);
        REQUIRE(build_descriptor(rotated) == base);
      }
    }
  }
}

TEST_CASE("descriptor 90-degree invariance over all outer-ring patches") {
  // Every patch whose bits are confined to the outer ring: 2^20 cases.
  for (uint32_t value = 1; value < (1u << 20); ++value) {
    BinaryPatch7 patch;
    for (int k = 0; k < 20; ++k) {
      if ((value >> k) & 1u) {
        patch.set(detail::kRing3[k].dx, detail::kRing3[k].dy);
      }
    }
    if (testutil::zero_moment(patch)) continue;
    const Descriptor44 base = build_descriptor(patch);
    BinaryPatch7 rotated = patch;
    for (int k = 0; k < 3; ++k) {
      rotated = testutil::rotate_patch_90(rotated);
      if (build_descriptor(rotated) != base) {
        CAPTURE(value, k);
        REQUIRE(build_descriptor(rotated) == base);
      }
    }
  }
  SUCCEED();
}

TEST_CASE("descriptor approximate invariance under arbitrary rotation") {
  // Patch bit density matches the sensor's typical edge density. Square
  // sampling rings exchange a few samples under off-axis rotation, so the
  // bound is a regression guard on quantization + resampling slack.
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> angle(0.0, 360.0);
  std::vector<int> distances;
  distances.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    const BinaryPatch7 patch = testutil::random_patch(rng, 0.15);
    if (testutil::zero_moment(patch)) continue;
    const double theta = angle(rng);
    const BinaryPatch7 rotated = testutil::rotate_patch_nn(patch, theta);
    distances.push_back(hamming(build_descriptor(patch), build_descriptor(rotated)));
  }
  std::nth_element(distances.begin(), distances.begin() + distances.size() / 2,
                   distances.end());
  const int median = distances[distances.size() / 2];
  CAPTURE(median);
  REQUIRE(median <= 6);
}

TEST_CASE("hamming distance") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<uint64_t> bits(0, Descriptor44::kMask);
  SECTION("identity and full distance") {
    const Descriptor44 a{bits(rng)};
    REQUIRE(hamming(a, a) == 0);
    REQUIRE(hamming(Descriptor44{0}, Descriptor44{Descriptor44::kMask}) == 44);
  }
  SECTION("matches the naive per-bit loop") {
    for (int i = 0; i < 20000; ++i) {
      const Descriptor44 a{bits(rng)};
      const Descriptor44 b{bits(rng)};
      REQUIRE(hamming(a, b) == naive_hamming(a, b));
    }
  }
  SECTION("is a metric") {
    for (int i = 0; i < 2000; ++i) {
      const Descriptor44 a{bits(rng)};
      const Descriptor44 b{bits(rng)};
      const Descriptor44 c{bits(rng)};
      REQUIRE(hamming(a, b) == hamming(b, a));
      REQUIRE((hamming(a, b) == 0) == (a == b));
      REQUIRE(hamming(a, c) <= hamming(a, b) + hamming(b, c));
    }
  }
}

TEST_CASE("descriptor reads only the 7x7 window") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> coord(3, 252);
  std::uniform_int_distribution<int> full(0, 255);
  std::bernoulli_distribution bit(0.2);
  for (int trial = 0; trial < 50; ++trial) {
    EdgeBitmap edges;
    for (int i = 0; i < 800; ++i) edges.set(full(rng), full(rng), bit(rng));
    const PixelEvent corner{uint8_t(coord(rng)), uint8_t(coord(rng))};
    const auto base = build_descriptor(edges, corner);
    REQUIRE(base.has_value());
    for (int i = 0; i < 200; ++i) {
      const int x = full(rng);
      const int y = full(rng);
      if (std::abs(x - corner.x) <= 3 && std::abs(y - corner.y) <= 3) continue;
      edges.flip(x, y);
      REQUIRE(build_descriptor(edges, corner) == base);
    }
  }
}
