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
#include <span>
#include <vector>

#include "rfgeo/grid.hpp"

namespace rfgeo {

/// Gray code of n, with n restricted to [0, 2^bits).
std::uint32_t gray_encode(std::uint32_t n, int bits = 10);
/// Inverse of gray_encode.
std::uint32_t gray_decode(std::uint32_t code, int bits = 10);

/// Frame order: `bits` vertical-stripe frames (most significant bit first), `bits`
/// horizontal-stripe frames, then one all-white and one all-black reference frame.
struct PatternLayout {
  int bits = 10;
  int pattern_width = 256;
  int pattern_height = 256;

  int frame_count() const noexcept { return 2 * bits + 2; }
  int white_index() const noexcept { return 2 * bits; }
  int black_index() const noexcept { return 2 * bits + 1; }
  /// Throws DomainError when bits < 1 or a dimension exceeds 2^bits.
  void validate() const;
};

struct PatternStack {
  PatternLayout layout;
  /// pattern_width x pattern_height single-channel frames with values in {0, 1}.
  std::vector<Grid2> frames;
};

PatternStack gen_patterns(int bits, int pattern_width, int pattern_height);

/// Per-pixel decoded background cell (u, v) in integer pattern units; NaN where undecodable.
struct CorrespondenceMap {
  Grid2 grid;
  int pattern_width = 0;
  int pattern_height = 0;
};

/// Per-pixel (dx, dy) refractive offset in camera pixels; NaN outside the mask or
/// where no correspondence was decoded.
struct FlowField {
  Grid2 grid;
};

struct DecodeOptions {
  /// Minimum white-minus-black contrast as a fraction of the largest contrast in the stack.
  float min_contrast = 0.05f;
};

/// Thresholds every frame at its pixel's (white + black) / 2 and decodes the gray codes.
/// Throws ShapeError when frame count or resolutions disagree with `layout`.
CorrespondenceMap decode_stack(std::span<const Grid2> captured, const PatternLayout& layout,
                               const DecodeOptions& options = {});

struct FlowOptions {
  /// Side of the square window for the local affine fit of the reference mapping.
  int fit_window = 5;
  /// Radius of the nearest-match search around the global affine prediction.
  int search_radius = 4;
};

/// Inverts the no-object reference mapping at each masked pixel's decoded cell and
/// returns the pixel displacement to that location.
FlowField flow_from_correspondence(const CorrespondenceMap& object, const CorrespondenceMap& reference,
                                   const Mask& mask, const FlowOptions& options = {});

/// Writes frame_000.rfg ... plus manifest.json into `dir` (created if missing).
void write_stack(const std::filesystem::path& dir, std::span<const Grid2> frames, const PatternLayout& layout);

struct StackOnDisk {
  PatternLayout layout;
  std::vector<Grid2> frames;
};
StackOnDisk read_stack(const std::filesystem::path& dir);

}  // namespace rfgeo
