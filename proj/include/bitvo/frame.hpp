#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <vector>

namespace bitvo {

/// 256x256 binary edge image, row-major, 8 pixels per byte, MSB = leftmost
/// pixel of the byte. Matches the sensor read-out layout byte for byte.
class EdgeBitmap {
 public:
  static constexpr int kWidth = 256;
  static constexpr int kHeight = 256;
  static constexpr int kBytes = kWidth * kHeight / 8;

  bool get(int x, int y) const {
    return (bytes_[index(x, y)] >> shift(x)) & 1u;
  }

  void set(int x, int y, bool value = true) {
    const uint8_t mask = uint8_t(1u << shift(x));
    if (value) {
      bytes_[index(x, y)] |= mask;
    } else {
      bytes_[index(x, y)] &= uint8_t(~mask);
    }
  }

  void flip(int x, int y) { bytes_[index(x, y)] ^= uint8_t(1u << shift(x)); }

  void clear() { bytes_.fill(0); }

  std::size_t count() const {
    std::size_t n = 0;
    for (uint8_t b : bytes_) n += std::popcount(b);
    return n;
  }

  std::array<uint8_t, kBytes>& bytes() { return bytes_; }
  const std::array<uint8_t, kBytes>& bytes() const { return bytes_; }

  bool operator==(const EdgeBitmap& other) const { return bytes_ == other.bytes_; }

 private:
  static int index(int x, int y) { return y * (kWidth / 8) + x / 8; }
  static int shift(int x) { return 7 - (x & 7); }

  std::array<uint8_t, kBytes> bytes_{};
};

/// Corner event coordinate as emitted by the sensor read-out (integer pixels).
struct PixelEvent {
  uint8_t x = 0;
  uint8_t y = 0;

  bool operator==(const PixelEvent&) const = default;
};

/// Maximum corner events emitted per frame by the sensor read-out.
constexpr std::size_t kMaxCornerEvents = 1000;

/// One sensor output frame: corner events plus the full binary edge image.
struct FeatureFrame {
  uint64_t timestamp_ns = 0;
  std::vector<PixelEvent> corners;
  EdgeBitmap edges;

  bool operator==(const FeatureFrame&) const = default;
};

}  // namespace bitvo
