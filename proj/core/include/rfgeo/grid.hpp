// Copyright (c) 2026, The rfgeo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

namespace rfgeo {

inline constexpr float kInvalid = std::numeric_limits<float>::quiet_NaN();

/// Row-major float raster with interleaved channels. Element (x, y, c) lives at
/// ((y * width + x) * channels + c). Pixel (0, 0) is the top-left pixel and
/// pixel centers sit on integer coordinates.
class Grid2 {
 public:
  Grid2(int width, int height, int channels, float fill = 0.0f);
  Grid2(int width, int height, int channels, std::vector<float> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  float& at(int x, int y, int c = 0) noexcept { return data_[index(x, y, c)]; }
  float at(int x, int y, int c = 0) const noexcept { return data_[index(x, y, c)]; }
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  /// True when every channel of (x, y) is finite.
  bool finite_at(int x, int y) const noexcept;

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool same_shape(const Grid2& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }
  bool same_size(const Grid2& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  /// Bitwise equality, so NaN payloads compare equal to themselves.
  bool bit_equal(const Grid2& other) const noexcept;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_;
  int height_;
  int channels_;
  std::vector<float> data_;
};

/// Single-channel grid whose values are exactly 0 or 1.
class Mask {
 public:
  Mask(int width, int height) : grid_(width, height, 1, 0.0f) {}
  /// Validates that `grid` is single-channel binary.
  explicit Mask(Grid2 grid);

  int width() const noexcept { return grid_.width(); }
  int height() const noexcept { return grid_.height(); }
  bool operator()(int x, int y) const noexcept { return grid_.at(x, y) != 0.0f; }
  bool contains(int x, int y) const noexcept { return grid_.contains(x, y); }
  void set(int x, int y, bool v) noexcept { grid_.at(x, y) = v ? 1.0f : 0.0f; }
  std::size_t count() const noexcept;

  const Grid2& grid() const noexcept { return grid_; }

 private:
  Grid2 grid_;
};

void write_grid(const std::filesystem::path& path, const Grid2& grid);
Grid2 read_grid(const std::filesystem::path& path);

/// Same byte layout as the file format, for in-memory round trips.
std::vector<std::uint8_t> encode_grid(const Grid2& grid);
Grid2 decode_grid(std::span<const std::uint8_t> bytes);

enum class PreviewKind {
  kMinMax,  ///< per-channel min-max normalization of finite values
  kNormal,  ///< [-1, 1] mapped to [0, 255]
};

/// 8-bit PNG preview. 2-channel grids get a zero blue channel. Non-finite pixels are black.
void write_png_preview(const std::filesystem::path& path, const Grid2& grid,
                       PreviewKind kind = PreviewKind::kMinMax);

}  // namespace rfgeo
