#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>

#include "bitvo/frame.hpp"
#include "bitvo/geometry.hpp"

namespace bitvo {

/// 7x7 window of edge bits around a corner, packed row-major into one 64-bit
/// word: bit 0 = top-left, bit 48 = bottom-right, bit 24 = the corner itself.
struct BinaryPatch7 {
  uint64_t bits = 0;

  static constexpr int kRadius = 3;
  static constexpr uint64_t kMask = (uint64_t(1) << 49) - 1;

  /// dx, dy in [-3, 3] relative to the center, x right, y down.
  static constexpr int bit_index(int dx, int dy) { return (dy + 3) * 7 + (dx + 3); }

  bool get(int dx, int dy) const { return (bits >> bit_index(dx, dy)) & 1u; }
  void set(int dx, int dy, bool value = true) {
    const uint64_t mask = uint64_t(1) << bit_index(dx, dy);
    bits = value ? (bits | mask) : (bits & ~mask);
  }

  bool operator==(const BinaryPatch7&) const = default;
};

/// The three sampling rings of the descriptor, least-significant bit first in
/// enumeration order (counter-clockwise from the +x sample, y pointing down).
struct RingSet {
  uint32_t r1 = 0;  // 8 samples, Chebyshev radius 1
  uint32_t r2 = 0;  // 16 samples, Chebyshev radius 2
  uint32_t r3 = 0;  // 20 samples, 7x7 border without its 4 corner pixels

  static constexpr int kLen1 = 8;
  static constexpr int kLen2 = 16;
  static constexpr int kLen3 = 20;

  bool operator==(const RingSet&) const = default;
};

/// 44-bit descriptor in one 64-bit word: bits[43..36] = r1, bits[35..20] = r2,
/// bits[19..0] = r3, each ring rotated to its orientation-canonical phase.
struct Descriptor44 {
  uint64_t bits = 0;

  static constexpr int kLength = 44;
  static constexpr uint64_t kMask = (uint64_t(1) << 44) - 1;

  bool operator==(const Descriptor44&) const = default;
};

/// Feature orientation in degrees, [0, 360). Zero-moment patches (no edge
/// bits, or a perfectly symmetric arrangement) take 0 by convention.
struct Orientation {
  double theta_deg = 0.0;
};

namespace detail {

struct RingSample {
  int8_t dx;
  int8_t dy;
};

// Ring sampling positions, enumerated by increasing atan2(dy, dx) starting at
// the +x axis. Each table is invariant as a set under 90-degree rotation, and
// a 90-degree patch rotation advances every sample by length/4 positions.
inline constexpr std::array<RingSample, RingSet::kLen1> kRing1 = {{
    {1, 0},  {1, 1},   {0, 1},  {-1, 1},
    {-1, 0}, {-1, -1}, {0, -1}, {1, -1},
}};

inline constexpr std::array<RingSample, RingSet::kLen2> kRing2 = {{
    {2, 0},  {2, 1},   {2, 2},   {1, 2},  {0, 2},  {-1, 2},  {-2, 2},  {-2, 1},
    {-2, 0}, {-2, -1}, {-2, -2}, {-1, -2}, {0, -2}, {1, -2},  {2, -2},  {2, -1},
}};

inline constexpr std::array<RingSample, RingSet::kLen3> kRing3 = {{
    {3, 0},   {3, 1},   {3, 2},   {2, 3},   {1, 3},   {0, 3},   {-1, 3},
    {-2, 3},  {-3, 2},  {-3, 1},  {-3, 0},  {-3, -1}, {-3, -2}, {-2, -3},
    {-1, -3}, {0, -3},  {1, -3},  {2, -3},  {3, -2},  {3, -1},
}};

template <std::size_t N>
constexpr uint32_t gather_ring(uint64_t patch_bits, const std::array<RingSample, N>& table) {
  uint32_t ring = 0;
  for (std::size_t k = 0; k < N; ++k) {
    ring |= uint32_t((patch_bits >> BinaryPatch7::bit_index(table[k].dx, table[k].dy)) & 1u)
            << k;
  }
  return ring;
}

}  // namespace detail

/// Copies the 7x7 edge window centered on a corner event. Empty when the
/// window leaves the image; such corners are dropped by the caller.
inline std::optional<BinaryPatch7> extract_patch(const EdgeBitmap& edges, PixelEvent corner) {
  const int cx = corner.x;
  const int cy = corner.y;
  if (cx < BinaryPatch7::kRadius || cx > EdgeBitmap::kWidth - 1 - BinaryPatch7::kRadius ||
      cy < BinaryPatch7::kRadius || cy > EdgeBitmap::kHeight - 1 - BinaryPatch7::kRadius) {
    return std::nullopt;
  }
  BinaryPatch7 patch;
  uint64_t bits = 0;
  int index = 0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx, ++index) {
      bits |= uint64_t(edges.get(cx + dx, cy + dy)) << index;
    }
  }
  patch.bits = bits;
  return patch;
}

/// Binary-centroid orientation of the patch: quadrant-correct arctangent of
/// (sum y*B, sum x*B) with the origin at the corner, mapped to [0, 360).
inline Orientation compute_orientation(const BinaryPatch7& patch) {
  int m10 = 0;
  int m01 = 0;
  for (int dy = -3; dy <= 3; ++dy) {
    for (int dx = -3; dx <= 3; ++dx) {
      if (patch.get(dx, dy)) {
        m10 += dx;
        m01 += dy;
      }
    }
  }
  if (m10 == 0 && m01 == 0) return {0.0};
  double theta = rad2deg(std::atan2(double(m01), double(m10)));
  if (theta < 0.0) theta += 360.0;
  if (theta >= 360.0) theta = 0.0;
  return {theta};
}

/// Splits the patch into its three sampling rings. The center pixel is never
/// sampled.
inline RingSet patch_to_rings(const BinaryPatch7& patch) {
  RingSet rings;
  rings.r1 = detail::gather_ring(patch.bits, detail::kRing1);
  rings.r2 = detail::gather_ring(patch.bits, detail::kRing2);
  rings.r3 = detail::gather_ring(patch.bits, detail::kRing3);
  return rings;
}

/// Number of positions a ring is rotated for orientation theta.
inline int rotate_by(double theta_deg, int length) {
  return int(std::floor(theta_deg * double(length) / 360.0));
}

/// Circular rotation of a ring by rotate_by(theta, length) positions, in the
/// direction that cancels a patch rotation of theta.
inline uint32_t rotate_ring(uint32_t ring, int length, Orientation theta) {
  const uint32_t mask = (length == 32) ? 0xFFFFFFFFu : ((uint32_t(1) << length) - 1u);
  int shift = rotate_by(theta.theta_deg, length) % length;
  if (shift < 0) shift += length;
  if (shift == 0) return ring & mask;
  return ((ring >> shift) | (ring << (length - shift))) & mask;
}

/// Descriptor from an already extracted patch.
inline Descriptor44 build_descriptor(const BinaryPatch7& patch) {
  const Orientation theta = compute_orientation(patch);
  const RingSet rings = patch_to_rings(patch);
  const uint64_t c1 = rotate_ring(rings.r1, RingSet::kLen1, theta);
  const uint64_t c2 = rotate_ring(rings.r2, RingSet::kLen2, theta);
  const uint64_t c3 = rotate_ring(rings.r3, RingSet::kLen3, theta);
  return Descriptor44{(c1 << (RingSet::kLen2 + RingSet::kLen3)) | (c2 << RingSet::kLen3) | c3};
}

/// Descriptor for a corner event. Empty when the 7x7 window leaves the image.
inline std::optional<Descriptor44> build_descriptor(const EdgeBitmap& edges, PixelEvent corner) {
  const auto patch = extract_patch(edges, corner);
  if (!patch) return std::nullopt;
  return build_descriptor(*patch);
}

inline int hamming(Descriptor44 a, Descriptor44 b) {
  return std::popcount((a.bits ^ b.bits) & Descriptor44::kMask);
}

}  // namespace bitvo
