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

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rfgeo/errors.hpp"
#include "rfgeo/harness.hpp"

namespace rfgeo {
namespace {

namespace fs = std::filesystem;

Grid2 unit_normals(int w, int h, const Eigen::Vector3d& n) {
  Grid2 g(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) g.at(x, y, c) = static_cast<float>(n[c]);
  return g;
}

Mask full_mask(int w, int h) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, true);
  return m;
}

Eigen::Vector3d tilted(double deg) {
  const double t = deg * M_PI / 180.0;
  return {std::sin(t), 0.0, -std::cos(t)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

TEST(Metrics, IdenticalNormals) {
  const Grid2 gt = unit_normals(8, 6, Eigen::Vector3d(0.0, 0.0, -1.0));
  const NormalMetrics m = angular_error_stats(gt, gt, full_mask(8, 6));
  EXPECT_EQ(m.mean_deg, 0.0);
  EXPECT_EQ(m.median_deg, 0.0);
  EXPECT_EQ(m.pct_11_25, 100.0);
  EXPECT_EQ(m.pct_22_5, 100.0);
  EXPECT_EQ(m.pct_30, 100.0);
  EXPECT_EQ(m.n_pixels, 48u);
}

TEST(Metrics, UniformFifteenDegrees) {
  const NormalMetrics m = angular_error_stats(unit_normals(8, 6, tilted(15.0)), unit_normals(8, 6, tilted(0.0)),
                                              full_mask(8, 6));
  EXPECT_NEAR(m.mean_deg, 15.0, 1e-4);  // float storage of the normals
  EXPECT_EQ(m.pct_11_25, 0.0);
  EXPECT_EQ(m.pct_22_5, 100.0);
  EXPECT_EQ(m.pct_30, 100.0);
}

TEST(Metrics, HalfFiveHalfTwentyFive) {
  Grid2 pred(8, 6, 3);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) {
      const Eigen::Vector3d n = tilted(x < 4 ? 5.0 : 25.0);
      for (int c = 0; c < 3; ++c) pred.at(x, y, c) = static_cast<float>(n[c]);
    }
  const NormalMetrics m = angular_error_stats(pred, unit_normals(8, 6, tilted(0.0)), full_mask(8, 6));
  EXPECT_NEAR(m.mean_deg, 15.0, 1e-4);
  EXPECT_NEAR(m.median_deg, 15.0, 1e-4);
  EXPECT_EQ(m.pct_11_25, 50.0);
  EXPECT_EQ(m.pct_22_5, 50.0);
  EXPECT_EQ(m.pct_30, 100.0);
}

TEST(Metrics, OnlyMaskedMutuallyFinitePixelsCount) {
  Grid2 pred = unit_normals(4, 4, tilted(0.0));
  Grid2 gt = unit_normals(4, 4, tilted(0.0));
  pred.at(0, 0, 0) = kInvalid;
  gt.at(1, 0, 2) = kInvalid;
  Mask mask = full_mask(4, 4);
  mask.set(3, 3, false);
  // Garbage outside the mask must not matter.
  pred.at(3, 3, 0) = 5.0f;
  const NormalMetrics m = angular_error_stats(pred, gt, mask);
  EXPECT_EQ(m.n_pixels, 13u);
  EXPECT_EQ(m.mean_deg, 0.0);
  EXPECT_THROW(angular_error_stats(pred, gt, Mask(4, 4)), DomainError);
  EXPECT_THROW(angular_error_stats(pred, Grid2(4, 3, 3), mask), ShapeError);
}

TEST(Metrics, PermutationInvariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  Grid2 pred(10, 10, 3);
  Grid2 gt(10, 10, 3);
  for (auto* grid : {&pred, &gt})
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) {
        const Eigen::Vector3d n = Eigen::Vector3d(g(rng), g(rng), g(rng)).normalized();
        for (int c = 0; c < 3; ++c) grid->at(x, y, c) = static_cast<float>(n[c]);
      }
  // Transposing the image permutes the pixels.
  Grid2 pred_t(10, 10, 3);
  Grid2 gt_t(10, 10, 3);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      for (int c = 0; c < 3; ++c) {
        pred_t.at(y, x, c) = pred.at(x, y, c);
        gt_t.at(y, x, c) = gt.at(x, y, c);
      }
  const NormalMetrics a = angular_error_stats(pred, gt, full_mask(10, 10));
  const NormalMetrics b = angular_error_stats(pred_t, gt_t, full_mask(10, 10));
  EXPECT_NEAR(a.mean_deg, b.mean_deg, 1e-12);
  EXPECT_EQ(a.median_deg, b.median_deg);
  EXPECT_EQ(a.pct_22_5, b.pct_22_5);
}

TEST(FlowRmse, Examples) {
  const FlowField a{Grid2(6, 5, 2, 1.0f)};
  EXPECT_EQ(flow_rmse(a, a, full_mask(6, 5)), 0.0);
  FlowField b = a;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      b.grid.at(x, y, 0) += 3.0f;
      b.grid.at(x, y, 1) += 4.0f;
    }
  EXPECT_DOUBLE_EQ(flow_rmse(b, a, full_mask(6, 5)), 5.0);
  EXPECT_THROW(flow_rmse(a, b, Mask(6, 5)), DomainError);
}

TEST(FlowRmse, MatchesBruteForceSum) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<float> u(-10.0f, 10.0f);
  FlowField a{Grid2(17, 11, 2)};
  FlowField b{Grid2(17, 11, 2)};
  for (float& v : a.grid.data()) v = u(rng);
  for (float& v : b.grid.data()) v = u(rng);
  Mask mask(17, 11);
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 17; ++x) mask.set(x, y, (x * 7 + y * 3) % 4 != 0);
  a.grid.at(2, 2, 1) = kInvalid;
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < 11; ++y)
    for (int x = 0; x < 17; ++x) {
      if (!mask(x, y) || !a.grid.finite_at(x, y)) continue;
      const double dx = static_cast<double>(a.grid.at(x, y, 0)) - b.grid.at(x, y, 0);
      const double dy = static_cast<double>(a.grid.at(x, y, 1)) - b.grid.at(x, y, 1);
      sum += dx * dx + dy * dy;
      ++n;
    }
  EXPECT_NEAR(flow_rmse(a, b, mask), std::sqrt(sum / n), 1e-12);
}

TEST(DepthRmse, ConstantOffset) {
  Grid2 a(4, 4, 1, 0.5f);
  Grid2 b(4, 4, 1, 0.503f);
  EXPECT_NEAR(depth_rmse(a, b, full_mask(4, 4)), 0.003, 1e-7);
}

TEST(Dataset, ObjectCountsAreUniform) {
  const DatasetConfig cfg = default_dataset_config();
  std::array<int, 6> hist{};
  const int n = 500;
  for (int i = 0; i < n; ++i) ++hist[sample_scene(cfg, 77, i).objects.size()];
  EXPECT_EQ(hist[0], 0);
  const double p = 0.2;
  const double sigma = std::sqrt(n * p * (1.0 - p));
  for (int k = 1; k <= 5; ++k) EXPECT_NEAR(hist[k], n * p, 3.0 * sigma) << k;
}

TEST(Dataset, ScenesRestOnTheTableWithoutOverlap) {
  const DatasetConfig cfg = default_dataset_config();
  const Eigen::Vector3d down(0.0, 0.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    const Scene s = sample_scene(cfg, 5, i);
    for (std::size_t a = 0; a < s.objects.size(); ++a) {
      const auto& o = s.objects[a];
      const double lowest = o.pose.translation.z() + o.support(down);
      EXPECT_LE(s.plane.distance - lowest, 0.001);
      EXPECT_GE(s.plane.distance - lowest, 0.0);
      for (std::size_t b = a + 1; b < s.objects.size(); ++b)
        EXPECT_GE((o.pose.translation - s.objects[b].pose.translation).norm(),
                  o.bounding_radius() + s.objects[b].bounding_radius());
    }
  }
}

TEST(Dataset, SeedsControlScenes) {
  const DatasetConfig cfg = default_dataset_config();
  EXPECT_EQ(to_json(sample_scene(cfg, 3, 0)).dump(), to_json(sample_scene(cfg, 3, 0)).dump());
  EXPECT_NE(to_json(sample_scene(cfg, 3, 0)).dump(), to_json(sample_scene(cfg, 4, 0)).dump());
  EXPECT_NE(to_json(sample_scene(cfg, 3, 0)).dump(), to_json(sample_scene(cfg, 3, 1)).dump());
}

TEST(Dataset, ConfigJsonAndValidation) {
  DatasetConfig cfg = default_dataset_config();
  cfg.families = {"solid_sphere"};
  cfg.max_objects = 3;
  EXPECT_EQ(to_json(dataset_config_from_json(to_json(cfg))).dump(), to_json(cfg).dump());
  cfg.families = {"teapot"};
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = default_dataset_config();
  cfg.max_attempts = 1;
  cfg.min_objects = cfg.max_objects = 5;
  cfg.radius = {0.04, 0.04};
  EXPECT_THROW(
      {
        for (int i = 0; i < 20; ++i) sample_scene(cfg, 1, i);
      },
      Error);
}

TEST(Stage, Names) {
  for (int i = 0; i < kStageCount; ++i)
    EXPECT_EQ(stage_from_string(to_string(static_cast<Stage>(i))), static_cast<Stage>(i));
  EXPECT_THROW(stage_from_string("render"), DomainError);
}

TEST(PipelineParams, JsonRoundTrip) {
  PipelineParams p;
  p.weights.lambda_smooth = 0.02;
  p.grasp.n_candidates = 33;
  p.normal_passes = 3;
  EXPECT_EQ(to_json(pipeline_params_from_json(to_json(p))).dump(), to_json(p).dump());
  EXPECT_THROW(pipeline_params_from_json({{"normal_passes", 0}}), DomainError);
  EXPECT_THROW(pipeline_params_from_json({{"weights", {{"boundary_atten", 2.0}}}}), DomainError);
}

/// One generated dataset shared by the pipeline tests.
class PipelineTest : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / "rfgeo_unit_pipeline"; }
  static fs::path data() { return root() / "data"; }

  static void SetUpTestSuite() {
    fs::remove_all(root());
    DatasetConfig cfg = default_dataset_config();
    cfg.families = {"sphere_shell"};
    cfg.max_objects = 1;
    gen_dataset(cfg, 2, 21, data());
  }

  static PipelineParams fast() {
    PipelineParams p;
    p.previews = false;
    p.grasp.n_candidates = 40;
    return p;
  }
};

TEST_F(PipelineTest, DatasetLayoutAndInvariants) {
  const auto infos = read_manifest(data());
  ASSERT_EQ(infos.size(), 2u);
  EXPECT_EQ(infos[0].sample_id, "sample_0000");
  for (const auto& s : infos) {
    const fs::path d = data() / s.sample_id;
    for (const char* f : {"gt_depth.rfg", "gt_normal.rfg", "mask.rfg", "boundary.rfg", "gt_flow.rfg",
                          "sensor_depth.rfg", "scene.json", "sample.json", "capture/manifest.json",
                          "capture/frame_021.rfg", "reference/frame_000.rfg"})
      EXPECT_TRUE(fs::exists(d / f)) << f;
    const Mask mask(read_grid(d / "mask.rfg"));
    const Mask boundary(read_grid(d / "boundary.rfg"));
    EXPECT_GT(mask.count(), 0u);
    EXPECT_EQ(mask.count(), s.mask_pixels);
    const Mask dil = dilate(mask);
    for (int y = 0; y < mask.height(); ++y)
      for (int x = 0; x < mask.width(); ++x)
        if (boundary(x, y)) ASSERT_TRUE(dil(x, y));

    // The stored scene reproduces the sample.
    std::ifstream f(d / "scene.json");
    const Scene scene = scene_from_json(nlohmann::json::parse(f));
    EXPECT_TRUE(render_channels(scene).gt_depth.bit_equal(read_grid(d / "gt_depth.rfg")));
  }
}

TEST_F(PipelineTest, RegenerationIsBitExact) {
  DatasetConfig cfg = default_dataset_config();
  cfg.families = {"sphere_shell"};
  cfg.max_objects = 1;
  const fs::path again = root() / "again";
  gen_dataset(cfg, 1, 21, again);
  for (const auto& e : fs::recursive_directory_iterator(again / "sample_0000")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), again);
    EXPECT_EQ(slurp(e.path()), slurp(data() / rel)) << rel;
  }
}

TEST_F(PipelineTest, RepeatedRunsAgreeAndSuffixesReload) {
  const fs::path sample = data() / "sample_0000";
  const PipelineResult a = run_pipeline(sample, root() / "run_a", fast());
  const PipelineResult b = run_pipeline(sample, root() / "run_b", fast());
  EXPECT_EQ(slurp(root() / "run_a" / "metrics.csv"), slurp(root() / "run_b" / "metrics.csv"));
  EXPECT_TRUE(a.depth.bit_equal(b.depth));
  EXPECT_TRUE(a.normals.bit_equal(b.normals));
  EXPECT_TRUE(std::isfinite(a.metrics.mean_deg));
  EXPECT_TRUE(std::isfinite(a.metrics.flow_rmse_px));

  for (Stage start : {Stage::kNormals, Stage::kDepth, Stage::kCloud, Stage::kGrasp}) {
    const fs::path dir = root() / (std::string("resume_") + to_string(start));
    fs::remove_all(dir);
    fs::copy(root() / "run_a", dir, fs::copy_options::recursive);
    fs::remove(dir / "grasps.json");
    fs::remove(dir / "metrics.csv");
    PipelineParams p = fast();
    p.start = start;
    run_pipeline(sample, dir, p);
    EXPECT_EQ(slurp(dir / "grasps.json"), slurp(root() / "run_a" / "grasps.json")) << to_string(start);
    EXPECT_EQ(slurp(dir / "metrics.csv"), slurp(root() / "run_a" / "metrics.csv")) << to_string(start);
    EXPECT_EQ(slurp(dir / "depth.rfg"), slurp(root() / "run_a" / "depth.rfg")) << to_string(start);
  }
}

TEST_F(PipelineTest, UndecodableCaptureFailsAtDecode) {
  const fs::path broken = root() / "broken";
  fs::remove_all(broken);
  fs::copy(data() / "sample_0001", broken, fs::copy_options::recursive);
  // White frame equal to black: no pixel has contrast.
  fs::copy_file(broken / "capture" / "frame_021.rfg", broken / "capture" / "frame_020.rfg",
                fs::copy_options::overwrite_existing);
  try {
    run_pipeline(broken, root() / "broken_out", fast());
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "decode");
  }
}

TEST_F(PipelineTest, EvaluateWritesOneRowPerSample) {
  const EvaluationSummary s = evaluate(data(), root() / "eval", fast());
  EXPECT_TRUE(s.failed.empty());
  ASSERT_EQ(s.rows.size(), 2u);
  std::ifstream f(root() / "eval" / "metrics.csv");
  std::string header, r0, r1;
  std::getline(f, header);
  std::getline(f, r0);
  std::getline(f, r1);
  EXPECT_EQ(header, MetricsRow::csv_header());
  EXPECT_EQ(r0.rfind("sample_0000,", 0), 0u);
  EXPECT_EQ(r1.rfind("sample_0001,", 0), 0u);
  EXPECT_TRUE(fs::exists(root() / "eval" / "timing.csv"));
}

}  // namespace
}  // namespace rfgeo
