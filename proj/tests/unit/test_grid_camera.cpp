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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "rfgeo/camera.hpp"
#include "rfgeo/errors.hpp"
#include "rfgeo/grid.hpp"

namespace rfgeo {
namespace {

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "rfgeo_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

TEST(Project, PrincipalAxisMapsToPrincipalPoint) {
  const Camera cam(100, 100, 100.0, 100.0, 50.0, 50.0);
  const Eigen::Vector2d p = project(cam, {0.0, 0.0, 1.0});
  EXPECT_EQ(p, Eigen::Vector2d(50.0, 50.0));
  EXPECT_EQ(project(cam, {0.5, 0.0, 1.0}), Eigen::Vector2d(100.0, 50.0));
}

TEST(Project, DefaultIntrinsics) {
  const Camera cam(256, 256, 320.0, 320.0, 128.0, 128.0);
  const Eigen::Vector2d p = project(cam, {0.1, -0.2, 2.0});
  EXPECT_NEAR(p.x(), 144.0, 1e-12);
  EXPECT_NEAR(p.y(), 96.0, 1e-12);
}

TEST(Project, RejectsPointsBehindCamera) {
  const Camera cam = default_camera();
  EXPECT_THROW(project(cam, {0.0, 0.0, 0.0}), DomainError);
  EXPECT_THROW(project(cam, {0.0, 0.0, -1.0}), DomainError);
}

TEST(Backproject, Examples) {
  const Camera cam(100, 100, 100.0, 100.0, 50.0, 50.0);
  EXPECT_EQ(backproject(cam, {50.0, 50.0}, 1.0), Eigen::Vector3d(0.0, 0.0, 1.0));
  EXPECT_EQ(backproject(cam, {100.0, 50.0}, 2.0), Eigen::Vector3d(1.0, 0.0, 2.0));
  EXPECT_THROW(backproject(cam, {1.0, 1.0}, 0.0), DomainError);
}

TEST(Backproject, RoundTripRandomSamples) {
  const Camera cam = default_camera();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> px(-50.0, 300.0);
  std::uniform_real_distribution<double> d(0.01, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector2d p(px(rng), px(rng));
    const double depth = d(rng);
    const Eigen::Vector3d q = backproject(cam, p, depth);
    ASSERT_EQ(q.z(), depth);
    ASSERT_LT((project(cam, q) - p).norm(), 1e-6);
  }
}

TEST(Camera, RejectsNonRotation) {
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 0) = -1.0;  // reflection
  EXPECT_THROW(validate_rotation(bad), DomainError);
  bad = Eigen::Matrix3d::Identity() * 1.01;
  EXPECT_THROW(Camera(10, 10, 1.0, 1.0, 5.0, 5.0, RigidTransform(bad, Eigen::Vector3d::Zero())), DomainError);
  EXPECT_NO_THROW(validate_rotation(axis_angle({1.0, 2.0, 3.0}, 0.7)));
}

TEST(Camera, JsonRoundTrip) {
  const Camera cam(64, 48, 70.0, 71.0, 31.5, 23.5,
                   RigidTransform(axis_angle({0.0, 1.0, 0.0}, 0.3), Eigen::Vector3d(0.1, 0.2, 0.3)));
  EXPECT_EQ(camera_from_json(to_json(cam)), cam);
}

TEST(RigidTransform, InverseComposesToIdentity) {
  const RigidTransform t(axis_angle({1.0, -1.0, 0.5}, 1.1), Eigen::Vector3d(0.3, -0.2, 0.9));
  const RigidTransform id = t * t.inverse();
  EXPECT_TRUE(id.rotation.isIdentity(1e-12));
  EXPECT_LT(id.translation.norm(), 1e-12);
  const Eigen::Vector3d p(0.4, 0.5, 0.6);
  EXPECT_LT((t.apply_inverse(t.apply(p)) - p).norm(), 1e-12);
}

TEST(Grid, SingleValueFileIs24Bytes) {
  const auto path = temp_path("one.rfg");
  write_grid(path, Grid2(1, 1, 1, 3.5f));
  EXPECT_EQ(std::filesystem::file_size(path), 24u);
  const Grid2 g = read_grid(path);
  EXPECT_EQ(g.width(), 1);
  EXPECT_EQ(g.channels(), 1);
  EXPECT_EQ(g.at(0, 0), 3.5f);
}

TEST(Grid, HeaderLayoutIsLittleEndian) {
  const auto bytes = encode_grid(Grid2(3, 2, 2, 1.0f));
  ASSERT_EQ(bytes.size(), 20u + 3 * 2 * 2 * 4);
  EXPECT_EQ(std::memcmp(bytes.data(), "RFG1", 4), 0);
  EXPECT_EQ(bytes[4], 3);
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 2);
  EXPECT_EQ(bytes[16], 1);
}

TEST(Grid, RandomRoundTripIsBitExactIncludingNaN) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-100.0f, 100.0f);
  for (int trial = 0; trial < 20; ++trial) {
    Grid2 g(1 + trial % 7, 1 + trial % 5, 1 + trial % 3);
    for (float& v : g.data()) v = u(rng);
    g.data()[0] = kInvalid;
    std::uint32_t payload = 0x7fc01234u;
    std::memcpy(&g.data()[g.data().size() - 1], &payload, 4);
    const auto path = temp_path("rand.rfg");
    write_grid(path, g);
    EXPECT_TRUE(read_grid(path).bit_equal(g));
  }
}

TEST(Grid, BadMagicAndTruncationReportOffsets) {
  auto bytes = encode_grid(Grid2(2, 2, 2, 0.5f));
  auto bad = bytes;
  bad[1] = 'X';
  try {
    decode_grid(bad);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 1u);
  }
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(decode_grid(bytes), FormatError);
  EXPECT_THROW(decode_grid(std::vector<std::uint8_t>(5, 0)), FormatError);
}

TEST(Mask, RejectsNonBinaryValues) {
  Grid2 g(2, 2, 1, 0.0f);
  g.at(1, 1) = 0.5f;
  EXPECT_THROW(Mask{g}, DomainError);
  g.at(1, 1) = 1.0f;
  const Mask m{g};
  EXPECT_EQ(m.count(), 1u);
  EXPECT_TRUE(m(1, 1));
}

TEST(Preview, WritesPng) {
  const auto path = temp_path("preview.png");
  Grid2 g(4, 3, 3, 0.0f);
  g.at(1, 1, 2) = 1.0f;
  write_png_preview(path, g, PreviewKind::kNormal);
  std::ifstream f(path, std::ios::binary);
  char sig[8];
  f.read(sig, 8);
  EXPECT_EQ(std::memcmp(sig, "\x89PNG\r\n\x1a\n", 8), 0);
}

}  // namespace
}  // namespace rfgeo
