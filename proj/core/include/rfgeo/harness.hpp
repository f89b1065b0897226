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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rfgeo/depthopt.hpp"
#include "rfgeo/flow2normal.hpp"
#include "rfgeo/flowcodec.hpp"
#include "rfgeo/graspisf.hpp"
#include "rfgeo/raysim.hpp"

namespace rfgeo {

struct NormalMetrics {
  double mean_deg = 0.0;
  double median_deg = 0.0;
  double pct_11_25 = 0.0;
  double pct_22_5 = 0.0;
  double pct_30 = 0.0;
  std::size_t n_pixels = 0;
};

/// Statistics of per-pixel angular error over masked pixels where both normals are finite.
/// The median of an even count averages the two central values. Throws DomainError when no
/// pixel is evaluable.
NormalMetrics angular_error_stats(const Grid2& pred, const Grid2& gt, const Mask& mask);

/// Root mean squared endpoint error over masked pixels where both flows are finite.
double flow_rmse(const FlowField& pred, const FlowField& gt, const Mask& mask);

/// Root mean squared depth difference over masked pixels where both are finite, meters.
double depth_rmse(const Grid2& pred, const Grid2& gt, const Mask& mask);

// ---------------------------------------------------------------------------------------
// Dataset generation

struct DatasetConfig {
  /// Camera, plane, sensor and lighting shared by every sample; its objects are ignored.
  Scene base;
  int min_objects = 1;
  int max_objects = 5;
  /// Any of "sphere_shell", "solid_sphere", "cylinder_shell".
  std::vector<std::string> families{"sphere_shell", "cylinder_shell", "solid_sphere"};
  std::array<double, 2> radius{0.02, 0.04};
  double thickness = 0.003;
  std::array<double, 2> cylinder_height{0.04, 0.08};
  std::array<double, 2> ior{1.45, 1.55};
  /// Fraction of cylinders placed lying on their side.
  double lying_fraction = 0.3;
  /// Clearance between an object's lowest point and the table.
  double table_gap = 0.0005;
  /// Object centres project at least this far inside the image.
  int border_px = 40;
  int max_attempts = 10000;

  void validate() const;
};

DatasetConfig default_dataset_config();
nlohmann::json to_json(const DatasetConfig& config);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

/// Draws the scene of sample `index` (deterministic in seed and index).
Scene sample_scene(const DatasetConfig& config, std::uint64_t seed, int index);

struct SampleInfo {
  std::string sample_id;
  std::uint64_t seed = 0;
  int n_objects = 0;
  std::size_t mask_pixels = 0;
};

/// Renders ground truth, sensor depth and the object/reference capture stacks of a scene
/// into `dir`.
SampleInfo write_sample(const std::filesystem::path& dir, const std::string& sample_id, const Scene& scene);

/// Writes sample_0000 ... plus manifest.csv under `out_dir`.
std::vector<SampleInfo> gen_dataset(const DatasetConfig& config, int n_samples, std::uint64_t seed,
                                    const std::filesystem::path& out_dir);

std::vector<SampleInfo> read_manifest(const std::filesystem::path& dataset_dir);

// ---------------------------------------------------------------------------------------
// Pipeline

enum class Stage { kDecode = 0, kNormals, kDepth, kCloud, kGrasp };
inline constexpr int kStageCount = 5;
const char* to_string(Stage s);
Stage stage_from_string(const std::string& name);

struct PipelineParams {
  DecodeOptions decode;
  FlowOptions flow;
  double ior = 1.5;
  /// First-pass surface depth is plane depth minus this height.
  double nominal_height = 0.05;
  /// Normal/depth alternations before the final depth solve.
  int normal_passes = 2;
  EnergyWeights weights;
  RefineOptions refine;
  GripperModel gripper;
  GraspConfig grasp;
  Stage start = Stage::kDecode;
  bool previews = true;
  /// Optional external mask grid replacing the sample's ground-truth mask.
  std::optional<std::filesystem::path> mask_path;
};

nlohmann::json to_json(const PipelineParams& params);
PipelineParams pipeline_params_from_json(const nlohmann::json& j);

struct MetricsRow {
  std::string sample_id;
  std::uint64_t seed = 0;
  int n_objects = 0;
  double flow_rmse_px = 0.0;
  double mean_deg = 0.0;
  double median_deg = 0.0;
  double pct11 = 0.0;
  double pct22 = 0.0;
  double pct30 = 0.0;
  double depth_rmse_mm = 0.0;
  double best_grasp_energy = 0.0;

  static std::string csv_header();
  std::string to_csv() const;
};

struct PipelineResult {
  MetricsRow metrics;
  std::array<double, kStageCount> stage_ms{};
  Grid2 depth{1, 1, 1};
  Grid2 normals{1, 1, 3};
  PointCloudN cloud;
  GraspPlan grasps;
};

/// decode -> normals -> depth -> cloud -> grasp on one sample directory. Outputs land in
/// `out_dir` (flow.rfg, normals.rfg, depth.rfg, cloud.txt, grasps.json, metrics.csv,
/// timing.csv and PNG previews). Stages before params.start are reloaded from `out_dir`.
/// Failures raise StageError; artifacts of completed stages stay on disk.
PipelineResult run_pipeline(const std::filesystem::path& sample_dir, const std::filesystem::path& out_dir,
                            const PipelineParams& params);

struct EvaluationSummary {
  std::vector<MetricsRow> rows;
  std::vector<std::string> failed;
};

/// Runs the pipeline on every manifest sample, writing `out_dir`/<sample_id>/ and an
/// aggregated metrics.csv ordered by sample id.
EvaluationSummary evaluate(const std::filesystem::path& dataset_dir, const std::filesystem::path& out_dir,
                           const PipelineParams& params);

}  // namespace rfgeo
