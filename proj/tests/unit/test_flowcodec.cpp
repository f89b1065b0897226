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


#include <gtest/gtest.h>

#include <bit>
#include <filesystem>

#include "rfgeo/errors.hpp"
#include "rfgeo/flowcodec.hpp"
#include "rfgeo/parallel.hpp"
#include "support/scenes.hpp"

namespace rfgeo {
namespace {

Mask full_mask(int w, int h) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, true);
  return m;
}

/// Correspondence map of an axis-aligned mapping u = x / s + offset.
CorrespondenceMap linear_map(int w, int h, double s, double offset_u) {
  CorrespondenceMap m{Grid2(w, h, 2, 0.0f), 1024, 1024};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      m.grid.at(x, y, 0) = static_cast<float>(x / s + offset_u);
      m.grid.at(x, y, 1) = static_cast<float>(y / s);
    }
  return m;
}

TEST(GrayCode, Examples) {
  EXPECT_EQ(gray_encode(0), 0u);
  EXPECT_EQ(gray_encode(5), 7u);
  EXPECT_THROW(gray_encode(1024, 10), DomainError);
  EXPECT_THROW(gray_decode(4096, 10), DomainError);
  EXPECT_THROW(gray_encode(0, 0), DomainError);
}

TEST(GrayCode, ExhaustiveRoundTripUpTo12Bits) {
  for (int bits = 1; bits <= 12; ++bits) {
    const std::uint32_t n_codes = 1u << bits;
    for (std::uint32_t n = 0; n < n_codes; ++n) {
      ASSERT_EQ(gray_decode(gray_encode(n, bits), bits), n);
      if (n + 1 < n_codes) ASSERT_EQ(std::popcount(gray_encode(n, bits) ^ gray_encode(n + 1, bits)), 1);
    }
  }
}

TEST(Patterns, OneBitStack) {
  const PatternStack s = gen_patterns(1, 2, 2);
  ASSERT_EQ(s.frames.size(), 4u);
  EXPECT_EQ(s.frames[0].at(0, 0), 0.0f);
  EXPECT_EQ(s.frames[0].at(1, 0), 1.0f);
  EXPECT_EQ(s.frames[2].at(0, 0), 1.0f);  // white
  EXPECT_EQ(s.frames[3].at(1, 1), 0.0f);  // black
}

TEST(Patterns, TenBitsGive22Frames) {
  EXPECT_EQ(gen_patterns(10, 256, 256).frames.size(), 22u);
  EXPECT_THROW(gen_patterns(4, 17, 16), DomainError);
}

TEST(Patterns, ColumnsAndRowsDecodeToTheirIndex) {
  const int bits = 8;
  const PatternStack s = gen_patterns(bits, 200, 150);
  for (int u = 0; u < 200; ++u) {
    std::uint32_t code = 0;
    for (int k = 0; k < bits; ++k) code = (code << 1) | (s.frames[k].at(u, 0) > 0.5f ? 1u : 0u);
    ASSERT_EQ(gray_decode(code, bits), static_cast<std::uint32_t>(u));
  }
  for (int v = 0; v < 150; ++v) {
    std::uint32_t code = 0;
    for (int k = 0; k < bits; ++k) code = (code << 1) | (s.frames[bits + k].at(0, v) > 0.5f ? 1u : 0u);
    ASSERT_EQ(gray_decode(code, bits), static_cast<std::uint32_t>(v));
  }
}

TEST(Decode, IdentityOpticsGivesPixelCoordinates) {
  const PatternStack s = gen_patterns(10, 64, 48);
  const CorrespondenceMap m = decode_stack(s.frames, s.layout);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x) {
      ASSERT_EQ(m.grid.at(x, y, 0), static_cast<float>(x));
      ASSERT_EQ(m.grid.at(x, y, 1), static_cast<float>(y));
    }
}

TEST(Decode, AffineIntensityChangeIsInvisible) {
  const PatternStack s = gen_patterns(10, 64, 48);
  const CorrespondenceMap base = decode_stack(s.frames, s.layout);
  for (const auto [a, b] : {std::pair{0.5f, 10.0f}, {0.3f, 0.0f}, {1.0f, 0.1f}, {0.77f, 0.05f}}) {
    const CorrespondenceMap m = decode_stack(testing::affine_frames(s.frames, a, b), s.layout);
    EXPECT_EQ(testing::differing_entries(m.grid, base.grid), 0u) << "a=" << a << " b=" << b;
  }
}

TEST(Decode, LowContrastPixelsAreInvalid) {
  PatternStack s = gen_patterns(6, 8, 8);
  auto frames = s.frames;
  frames[s.layout.white_index()].at(3, 3) = 0.01f;
  const CorrespondenceMap m = decode_stack(frames, s.layout);
  EXPECT_TRUE(std::isnan(m.grid.at(3, 3, 0)));
  EXPECT_FALSE(std::isnan(m.grid.at(4, 3, 0)));
}

TEST(Decode, ShapeErrors) {
  const PatternStack s = gen_patterns(6, 8, 8);
  auto frames = s.frames;
  frames.pop_back();
  EXPECT_THROW(decode_stack(frames, s.layout), ShapeError);
  frames = s.frames;
  frames[3] = Grid2(7, 8, 1);
  EXPECT_THROW(decode_stack(frames, s.layout), ShapeError);
}

TEST(Flow, IdenticalMapsGiveZeroFlow) {
  const CorrespondenceMap ref = linear_map(40, 30, 2.0, 0.0);
  const FlowField f = flow_from_correspondence(ref, ref, full_mask(40, 30));
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) {
      ASSERT_NEAR(f.grid.at(x, y, 0), 0.0f, 1e-4);
      ASSERT_NEAR(f.grid.at(x, y, 1), 0.0f, 1e-4);
    }
}

TEST(Flow, ShiftedCodesGiveScaledFlow) {
  const double s = 2.0;
  const int k = 3;
  const CorrespondenceMap ref = linear_map(40, 30, s, 0.0);
  const CorrespondenceMap obj = linear_map(40, 30, s, k);
  Mask mask(40, 30);
  for (int y = 5; y < 25; ++y)
    for (int x = 5; x < 25; ++x) mask.set(x, y, true);
  const FlowField f = flow_from_correspondence(obj, ref, mask);
  for (int y = 5; y < 25; ++y)
    for (int x = 5; x < 25; ++x) {
      ASSERT_NEAR(f.grid.at(x, y, 0), k * s, 1e-4);
      ASSERT_NEAR(f.grid.at(x, y, 1), 0.0, 1e-4);
    }
}

TEST(Flow, FinitenessMatchesMaskAndDecodability) {
  CorrespondenceMap ref = linear_map(30, 30, 1.0, 0.0);
  CorrespondenceMap obj = linear_map(30, 30, 1.0, 1.0);
  obj.grid.at(10, 10, 0) = kInvalid;
  obj.grid.at(10, 10, 1) = kInvalid;
  Mask mask(30, 30);
  for (int y = 8; y < 20; ++y)
    for (int x = 8; x < 20; ++x) mask.set(x, y, true);
  const FlowField f = flow_from_correspondence(obj, ref, mask);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) {
      const bool expect = mask(x, y) && !(x == 10 && y == 10);
      ASSERT_EQ(f.grid.finite_at(x, y), expect) << x << "," << y;
    }
}

TEST(Flow, EmptyReferenceGivesNoFlow) {
  CorrespondenceMap ref{Grid2(10, 10, 2, kInvalid), 16, 16};
  const FlowField f = flow_from_correspondence(linear_map(10, 10, 1.0, 0.0), ref, full_mask(10, 10));
  for (float v : f.grid.data()) ASSERT_TRUE(std::isnan(v));
}

TEST(Flow, MatchesOracleOnRenderedShell) {
  const Scene scene = testing::random_shell_scene(11);
  const GeoChannels ch = render_channels(scene);
  const testing::Decoded d = testing::decode_scene(scene, ch.mask);
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < ch.mask.height(); ++y)
    for (int x = 0; x < ch.mask.width(); ++x)
      if (d.flow.grid.finite_at(x, y) && ch.gt_flow.grid.finite_at(x, y)) {
        const double dx = d.flow.grid.at(x, y, 0) - ch.gt_flow.grid.at(x, y, 0);
        const double dy = d.flow.grid.at(x, y, 1) - ch.gt_flow.grid.at(x, y, 1);
        sum += dx * dx + dy * dy;
        ++n;
      }
  ASSERT_GT(n, 100);
  EXPECT_LE(std::sqrt(sum / n), 1.0);
}

TEST(Flow, ThreadCountDoesNotChangeOutput) {
  const Scene scene = testing::random_shell_scene(5);
  const GeoChannels ch = render_channels(scene);
  set_thread_count(1);
  const testing::Decoded a = testing::decode_scene(scene, ch.mask);
  set_thread_count(3);
  const testing::Decoded b = testing::decode_scene(scene, ch.mask);
  set_thread_count(1);
  EXPECT_TRUE(a.flow.grid.bit_equal(b.flow.grid));
  EXPECT_TRUE(a.object.grid.bit_equal(b.object.grid));
}

TEST(Stack, DirectoryRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "rfgeo_unit" / "stack";
  std::filesystem::remove_all(dir);
  const PatternStack s = gen_patterns(5, 20, 12);
  write_stack(dir, s.frames, s.layout);
  EXPECT_TRUE(std::filesystem::exists(dir / "frame_011.rfg"));
  const StackOnDisk back = read_stack(dir);
  EXPECT_EQ(back.layout.bits, 5);
  EXPECT_EQ(back.layout.pattern_width, 20);
  ASSERT_EQ(back.frames.size(), s.frames.size());
  for (std::size_t i = 0; i < s.frames.size(); ++i) EXPECT_TRUE(back.frames[i].bit_equal(s.frames[i]));
}

}  // namespace
}  // namespace rfgeo
