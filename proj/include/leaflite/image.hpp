#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "leaflite/error.hpp"

namespace leaflite {

// Interleaved 8-bit RGB raster, row-major.
class Image {
 public:
  Image() = default;
  Image(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3, fill) {
    if (width < 0 || height < 0) throw ShapeError("negative image extent");
  }
  Image(int width, int height, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3) {
      throw ShapeError("pixel buffer does not match image extent");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  std::uint8_t& at(int x, int y, int c) { return pixels_[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c) const { return pixels_[index(x, y, c)]; }

  std::span<std::uint8_t> pixels() noexcept { return pixels_; }
  std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3 + static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Hunter Lab planes. L in [0, 100].
struct LabImage {
  int width = 0;
  int height = 0;
  std::vector<float> L;
  std::vector<float> a;
  std::vector<float> b;
};

// PNG and JPEG are decoded by content sniffing, not extension.
Image read_image(const std::filesystem::path& path);

// Always writes PNG. Output bytes depend only on pixel content.
void write_png(const std::filesystem::path& path, const Image& img);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace leaflite
