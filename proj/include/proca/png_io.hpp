#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace proca {

/// Row-major, interleaved 8-bit image. channels is 1 (gray) or 3 (RGB).
struct ImageU8 {
  int h = 0, w = 0, channels = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * w + x) * channels + c]; }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * w + x) * channels + c];
  }
};

/// Writes an 8-bit gray or RGB PNG with fixed encoder settings (deterministic
/// bytes for identical pixels). Throws std::runtime_error on failure.
void write_png(const std::string& path, const ImageU8& image);

/// Reads an 8-bit gray or RGB PNG. Palette/alpha inputs are rejected.
ImageU8 read_png(const std::string& path);

}  // namespace proca
