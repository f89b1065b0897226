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

#include "rfgeo/grid.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rfgeo/errors.hpp"

namespace rfgeo {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'R', 'F', 'G', '1'};
constexpr std::uint32_t kDtypeFloat32 = 1;
constexpr std::size_t kHeaderBytes = 20;

void check_dims(int width, int height, int channels) {
  if (width < 1 || height < 1) throw ShapeError("grid dimensions must be >= 1");
  if (channels < 1 || channels > 3) throw ShapeError("grid channels must be 1, 2 or 3");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[at + i]) << (8 * i);
  return v;
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void png_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& body) {
  put_u32_be(out, static_cast<std::uint32_t>(body.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), body.begin(), body.end());
  const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(body.size() + 4));
  put_u32_be(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

Grid2::Grid2(int width, int height, int channels, float fill)
    : width_(width), height_(height), channels_(channels) {
  check_dims(width, height, channels);
  data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
}

Grid2::Grid2(int width, int height, int channels, std::vector<float> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  check_dims(width, height, channels);
  if (data_.size() != static_cast<std::size_t>(width) * height * channels)
    throw ShapeError("grid data length does not match width*height*channels");
}

bool Grid2::finite_at(int x, int y) const noexcept {
  for (int c = 0; c < channels_; ++c)
    if (!std::isfinite(at(x, y, c))) return false;
  return true;
}

bool Grid2::bit_equal(const Grid2& other) const noexcept {
  return same_shape(other) &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

Mask::Mask(Grid2 grid) : grid_(std::move(grid)) {
  if (grid_.channels() != 1) throw ShapeError("mask must have one channel");
  for (float v : grid_.data())
    if (v != 0.0f && v != 1.0f) throw DomainError("mask values must be exactly 0 or 1");
}

std::size_t Mask::count() const noexcept {
  return static_cast<std::size_t>(std::count(grid_.data().begin(), grid_.data().end(), 1.0f));
}

std::vector<std::uint8_t> encode_grid(const Grid2& grid) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  out.reserve(kHeaderBytes + grid.data().size() * 4);
  put_u32(out, static_cast<std::uint32_t>(grid.width()));
  put_u32(out, static_cast<std::uint32_t>(grid.height()));
  put_u32(out, static_cast<std::uint32_t>(grid.channels()));
  put_u32(out, kDtypeFloat32);
  for (float v : grid.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Grid2 decode_grid(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) throw FormatError("truncated RFG1 header", bytes.size());
  for (std::size_t i = 0; i < kMagic.size(); ++i)
    if (bytes[i] != kMagic[i]) throw FormatError("bad RFG1 magic", i);
  const std::uint32_t width = get_u32(bytes, 4);
  const std::uint32_t height = get_u32(bytes, 8);
  const std::uint32_t channels = get_u32(bytes, 12);
  const std::uint32_t dtype = get_u32(bytes, 16);
  if (width < 1 || height < 1 || width > (1u << 20) || height > (1u << 20))
    throw FormatError("bad RFG1 dimensions", 4);
  if (channels < 1 || channels > 3) throw FormatError("bad RFG1 channel count", 12);
  if (dtype != kDtypeFloat32) throw FormatError("unsupported RFG1 dtype", 16);
  const std::size_t n = std::size_t{width} * height * channels;
  if (bytes.size() < kHeaderBytes + 4 * n)
    throw FormatError("truncated RFG1 payload", bytes.size());
  if (bytes.size() > kHeaderBytes + 4 * n)
    throw FormatError("trailing bytes after RFG1 payload", kHeaderBytes + 4 * n);
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i));
  return Grid2(static_cast<int>(width), static_cast<int>(height), static_cast<int>(channels), std::move(data));
}

void write_grid(const std::filesystem::path& path, const Grid2& grid) {
  const auto bytes = encode_grid(grid);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("write failed: " + path.string());
}

Grid2 read_grid(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_grid(bytes);
}

void write_png_preview(const std::filesystem::path& path, const Grid2& grid, PreviewKind kind) {
  const int w = grid.width();
  const int h = grid.height();
  const int nc = grid.channels();
  const int out_c = nc == 1 ? 1 : 3;

  std::vector<float> lo(nc, 0.0f);
  std::vector<float> hi(nc, 1.0f);
  if (kind == PreviewKind::kMinMax) {
    for (int c = 0; c < nc; ++c) {
      float mn = std::numeric_limits<float>::infinity();
      float mx = -mn;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const float v = grid.at(x, y, c);
          if (std::isfinite(v)) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
          }
        }
      lo[c] = std::isfinite(mn) ? mn : 0.0f;
      hi[c] = std::isfinite(mx) ? mx : 1.0f;
    }
  } else {
    std::fill(lo.begin(), lo.end(), -1.0f);
  }

  // Filter byte 0 (none) at the start of each scanline.
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(h) * (1 + w * out_c));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);
    for (int x = 0; x < w; ++x) {
      const bool ok = grid.finite_at(x, y);
      for (int c = 0; c < out_c; ++c) {
        std::uint8_t byte = 0;
        if (ok && c < nc) {
          const float span = hi[c] - lo[c];
          const float t = span > 0.0f ? (grid.at(x, y, c) - lo[c]) / span : 0.5f;
          byte = static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0f, 1.0f) * 255.0f));
        }
        raw.push_back(byte);
      }
    }
  }

  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw Error("zlib compression failed for " + path.string());
  z.resize(zlen);

  std::vector<std::uint8_t> png{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(w));
  put_u32_be(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);                  // bit depth
  ihdr.push_back(out_c == 1 ? 0 : 2);  // grayscale or truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  png_chunk(png, "IHDR", ihdr);
  png_chunk(png, "IDAT", z);
  png_chunk(png, "IEND", {});

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
}

}  // namespace rfgeo
