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

#include "rfgeo/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "rfgeo/errors.hpp"

namespace rfgeo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
}

}  // namespace

NormalMetrics angular_error_stats(const Grid2& pred, const Grid2& gt, const Mask& mask) {
  if (!pred.same_shape(gt) || pred.channels() != 3 || pred.width() != mask.width() || pred.height() != mask.height())
    throw ShapeError("angular_error_stats: grids must be aligned 3-channel maps");
  std::vector<double> err;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || !pred.finite_at(x, y) || !gt.finite_at(x, y)) continue;
      double dot = 0.0;
      for (int c = 0; c < 3; ++c) dot += static_cast<double>(pred.at(x, y, c)) * gt.at(x, y, c);
      err.push_back(std::acos(std::clamp(dot, -1.0, 1.0)) * 180.0 / M_PI);
    }
  if (err.empty()) throw DomainError("angular_error_stats: no evaluable pixels");

  NormalMetrics m;
  m.n_pixels = err.size();
  std::size_t below[3] = {0, 0, 0};
  long double sum = 0.0L;
  for (double e : err) {
    sum += e;
    below[0] += e < 11.25;
    below[1] += e < 22.5;
    below[2] += e < 30.0;
  }
  const double n = static_cast<double>(err.size());
  m.mean_deg = static_cast<double>(sum / err.size());
  std::sort(err.begin(), err.end());
  const std::size_t mid = err.size() / 2;
  m.median_deg = err.size() % 2 ? err[mid] : 0.5 * (err[mid - 1] + err[mid]);
  m.pct_11_25 = 100.0 * below[0] / n;
  m.pct_22_5 = 100.0 * below[1] / n;
  m.pct_30 = 100.0 * below[2] / n;
  return m;
}

double flow_rmse(const FlowField& pred, const FlowField& gt, const Mask& mask) {
  if (!pred.grid.same_shape(gt.grid) || pred.grid.channels() != 2 || pred.grid.width() != mask.width() ||
      pred.grid.height() != mask.height())
    throw ShapeError("flow_rmse: fields must be aligned 2-channel grids");
  long double sum = 0.0L;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || !pred.grid.finite_at(x, y) || !gt.grid.finite_at(x, y)) continue;
      const double dx = static_cast<double>(pred.grid.at(x, y, 0)) - gt.grid.at(x, y, 0);
      const double dy = static_cast<double>(pred.grid.at(x, y, 1)) - gt.grid.at(x, y, 1);
      sum += dx * dx + dy * dy;
      ++n;
    }
  if (n == 0) throw DomainError("flow_rmse: no evaluable pixels");
  return std::sqrt(static_cast<double>(sum / n));
}

double depth_rmse(const Grid2& pred, const Grid2& gt, const Mask& mask) {
  if (!pred.same_shape(gt) || pred.channels() != 1 || pred.width() != mask.width() || pred.height() != mask.height())
    throw ShapeError("depth_rmse: grids must be aligned 1-channel maps");
  long double sum = 0.0L;
  std::size_t n = 0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y) || !pred.finite_at(x, y) || !gt.finite_at(x, y)) continue;
      const double d = static_cast<double>(pred.at(x, y)) - gt.at(x, y);
      sum += d * d;
      ++n;
    }
  if (n == 0) throw DomainError("depth_rmse: no evaluable pixels");
  return std::sqrt(static_cast<double>(sum / n));
}

// ---------------------------------------------------------------------------------------

void DatasetConfig::validate() const {
  base.validate();
  if (!(min_objects >= 1 && max_objects >= min_objects)) throw DomainError("dataset needs 1 <= min_objects <= max_objects");
  if (families.empty()) throw DomainError("dataset needs at least one shape family");
  for (const auto& f : families)
    if (f != "sphere_shell" && f != "solid_sphere" && f != "cylinder_shell")
      throw DomainError("unknown shape family '" + f + "'");
  if (!(radius[0] > thickness && radius[1] >= radius[0])) throw DomainError("radius range must exceed the thickness");
  if (!(cylinder_height[0] > 0.0 && cylinder_height[1] >= cylinder_height[0]))
    throw DomainError("bad cylinder height range");
  if (!(ior[0] > 1.0 && ior[1] >= ior[0])) throw DomainError("bad ior range");
  if (!(table_gap >= 0.0 && table_gap <= 0.001)) throw DomainError("table_gap must lie in [0, 1 mm]");
  if (2 * border_px >= std::min(base.camera.width(), base.camera.height())) throw DomainError("border_px too large");
  if (max_attempts < 1) throw DomainError("max_attempts must be positive");
}

DatasetConfig default_dataset_config() {
  DatasetConfig c;
  c.base.plane.distance = 0.6;
  return c;
}

json to_json(const DatasetConfig& c) {
  json base = to_json(c.base);
  base.erase("objects");
  return {{"base", base},
          {"min_objects", c.min_objects},
          {"max_objects", c.max_objects},
          {"families", c.families},
          {"radius", c.radius},
          {"thickness", c.thickness},
          {"cylinder_height", c.cylinder_height},
          {"ior", c.ior},
          {"lying_fraction", c.lying_fraction},
          {"table_gap", c.table_gap},
          {"border_px", c.border_px},
          {"max_attempts", c.max_attempts}};
}

DatasetConfig dataset_config_from_json(const json& j) {
  DatasetConfig c = default_dataset_config();
  try {
    if (j.contains("base")) c.base = scene_from_json(j.at("base"));
    c.base.objects.clear();
    c.min_objects = j.value("min_objects", c.min_objects);
    c.max_objects = j.value("max_objects", c.max_objects);
    c.families = j.value("families", c.families);
    c.radius = j.value("radius", c.radius);
    c.thickness = j.value("thickness", c.thickness);
    c.cylinder_height = j.value("cylinder_height", c.cylinder_height);
    c.ior = j.value("ior", c.ior);
    c.lying_fraction = j.value("lying_fraction", c.lying_fraction);
    c.table_gap = j.value("table_gap", c.table_gap);
    c.border_px = j.value("border_px", c.border_px);
    c.max_attempts = j.value("max_attempts", c.max_attempts);
  } catch (const json::exception& e) {
    throw DomainError(std::string("bad dataset config: ") + e.what());
  }
  c.validate();
  return c;
}

Scene sample_scene(const DatasetConfig& config, std::uint64_t seed, int index) {
  config.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  Scene scene = config.base;
  scene.objects.clear();
  const int n = std::uniform_int_distribution<int>(config.min_objects, config.max_objects)(rng);
  scene.seed = rng();

  const Camera& cam = scene.camera;
  const Eigen::Vector3d down = cam.pose().rotation.col(2);  // towards the table
  int attempts = 0;
  while (static_cast<int>(scene.objects.size()) < n) {
    if (++attempts > config.max_attempts)
      throw Error("gen_dataset: scene " + std::to_string(index) + " exceeded " +
                  std::to_string(config.max_attempts) + " placement attempts");
    const std::string& family =
        config.families[std::uniform_int_distribution<std::size_t>(0, config.families.size() - 1)(rng)];
    const double r = uniform(config.radius[0], config.radius[1]);
    const double yaw = uniform(-M_PI, M_PI);
    const double lie = uniform(0.0, 1.0);
    const double cyl_h = uniform(config.cylinder_height[0], config.cylinder_height[1]);
    const double px = uniform(config.border_px, cam.width() - 1 - config.border_px);
    const double py = uniform(config.border_px, cam.height() - 1 - config.border_px);

    TransparentObject obj;
    obj.ior = uniform(config.ior[0], config.ior[1]);
    Eigen::Matrix3d rot = cam.pose().rotation;
    if (family == "sphere_shell") {
      obj.shape = SphereShell{r, config.thickness};
    } else if (family == "solid_sphere") {
      obj.shape = SolidSphere{r};
    } else {
      obj.shape = CylinderShell{r, config.thickness, cyl_h};
      rot = rot * axis_angle(Eigen::Vector3d::UnitZ(), yaw);
      if (lie < config.lying_fraction) rot = rot * axis_angle(Eigen::Vector3d::UnitX(), 0.5 * M_PI);
    }
    obj.pose.rotation = rot;
    // Rest the lowest point table_gap above the table.
    const double depth = scene.plane.distance - config.table_gap - obj.support(down);
    obj.pose.translation = cam.pose().apply(backproject(cam, {px, py}, depth));

    bool clear = true;
    for (const auto& other : scene.objects)
      if ((other.pose.translation - obj.pose.translation).norm() < other.bounding_radius() + obj.bounding_radius()) {
        clear = false;
        break;
      }
    if (clear) scene.objects.push_back(obj);
  }
  scene.validate();
  return scene;
}

SampleInfo write_sample(const fs::path& dir, const std::string& sample_id, const Scene& scene) {
  fs::create_directories(dir);
  const GeoChannels ch = render_channels(scene);
  write_grid(dir / "gt_depth.rfg", ch.gt_depth);
  write_grid(dir / "gt_normal.rfg", ch.gt_normal);
  write_grid(dir / "mask.rfg", ch.mask.grid());
  write_grid(dir / "boundary.rfg", ch.boundary.grid());
  write_grid(dir / "gt_flow.rfg", ch.gt_flow.grid);
  write_grid(dir / "sensor_depth.rfg", ch.sensor_depth);

  const PatternLayout& layout = scene.plane.layout;
  const PatternStack stack = gen_patterns(layout.bits, layout.pattern_width, layout.pattern_height);
  write_stack(dir / "capture", render_capture(scene, stack), layout);
  write_stack(dir / "reference", render_capture(reference_scene(scene), stack), layout);
  write_text(dir / "scene.json", to_json(scene).dump(2) + "\n");

  SampleInfo info{sample_id, scene.seed, static_cast<int>(scene.objects.size()), ch.mask.count()};
  write_text(dir / "sample.json",
             json{{"sample_id", info.sample_id}, {"seed", info.seed}, {"n_objects", info.n_objects}}.dump(2) + "\n");
  return info;
}

std::vector<SampleInfo> gen_dataset(const DatasetConfig& config, int n_samples, std::uint64_t seed,
                                    const fs::path& out_dir) {
  if (n_samples < 0) throw DomainError("gen_dataset: n_samples must be non-negative");
  fs::create_directories(out_dir);
  std::vector<SampleInfo> infos;
  for (int i = 0; i < n_samples; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "sample_%04d", i);
    infos.push_back(write_sample(out_dir / id, id, sample_scene(config, seed, i)));
  }
  std::string manifest = "sample_id,seed,n_objects,mask_pixels\n";
  for (const auto& s : infos)
    manifest += s.sample_id + "," + std::to_string(s.seed) + "," + std::to_string(s.n_objects) + "," +
                std::to_string(s.mask_pixels) + "\n";
  write_text(out_dir / "manifest.csv", manifest);
  write_text(out_dir / "config.json", to_json(config).dump(2) + "\n");
  return infos;
}

std::vector<SampleInfo> read_manifest(const fs::path& dataset_dir) {
  std::ifstream f(dataset_dir / "manifest.csv");
  if (!f) throw Error("cannot open " + (dataset_dir / "manifest.csv").string());
  std::vector<SampleInfo> out;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream in(line);
    SampleInfo s;
    std::string field;
    std::getline(in, s.sample_id, ',');
    std::getline(in, field, ',');
    s.seed = std::stoull(field);
    std::getline(in, field, ',');
    s.n_objects = std::stoi(field);
    std::getline(in, field, ',');
    s.mask_pixels = std::stoull(field);
    out.push_back(s);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; });
  return out;
}

// ---------------------------------------------------------------------------------------

const char* to_string(Stage s) {
  switch (s) {
    case Stage::kDecode:
      return "decode";
    case Stage::kNormals:
      return "normals";
    case Stage::kDepth:
      return "depth";
    case Stage::kCloud:
      return "cloud";
    case Stage::kGrasp:
      return "grasp";
  }
  return "unknown";
}

Stage stage_from_string(const std::string& name) {
  for (int i = 0; i < kStageCount; ++i)
    if (name == to_string(static_cast<Stage>(i))) return static_cast<Stage>(i);
  throw DomainError("unknown pipeline stage '" + name + "'");
}

json to_json(const PipelineParams& p) {
  return {{"ior", p.ior},
          {"nominal_height", p.nominal_height},
          {"normal_passes", p.normal_passes},
          {"min_contrast", p.decode.min_contrast},
          {"fit_window", p.flow.fit_window},
          {"search_radius", p.flow.search_radius},
          {"weights",
           {{"lambda_data", p.weights.lambda_data},
            {"lambda_smooth", p.weights.lambda_smooth},
            {"lambda_normal", p.weights.lambda_normal},
            {"boundary_atten", p.weights.boundary_atten}}},
          {"cg", {{"tol", p.refine.tol}, {"max_iter", p.refine.max_iter}}},
          {"gripper", to_json(p.gripper)},
          {"grasp",
           {{"n", p.grasp.n_candidates},
            {"seed", p.grasp.seed},
            {"iterations", p.grasp.iterations},
            {"gamma", p.grasp.gamma},
            {"k_min", p.grasp.k_min}}}};
}

PipelineParams pipeline_params_from_json(const json& j) {
  PipelineParams p;
  try {
    p.ior = j.value("ior", p.ior);
    p.nominal_height = j.value("nominal_height", p.nominal_height);
    p.normal_passes = j.value("normal_passes", p.normal_passes);
    p.decode.min_contrast = j.value("min_contrast", p.decode.min_contrast);
    p.flow.fit_window = j.value("fit_window", p.flow.fit_window);
    p.flow.search_radius = j.value("search_radius", p.flow.search_radius);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      p.weights.lambda_data = w.value("lambda_data", p.weights.lambda_data);
      p.weights.lambda_smooth = w.value("lambda_smooth", p.weights.lambda_smooth);
      p.weights.lambda_normal = w.value("lambda_normal", p.weights.lambda_normal);
      p.weights.boundary_atten = w.value("boundary_atten", p.weights.boundary_atten);
    }
    if (j.contains("cg")) {
      p.refine.tol = j.at("cg").value("tol", p.refine.tol);
      p.refine.max_iter = j.at("cg").value("max_iter", p.refine.max_iter);
    }
    if (j.contains("gripper")) p.gripper = gripper_from_json(j.at("gripper"));
    if (j.contains("grasp")) {
      const auto& g = j.at("grasp");
      p.grasp.n_candidates = g.value("n", p.grasp.n_candidates);
      p.grasp.seed = g.value("seed", p.grasp.seed);
      p.grasp.iterations = g.value("iterations", p.grasp.iterations);
      p.grasp.gamma = g.value("gamma", p.grasp.gamma);
      p.grasp.k_min = g.value("k_min", p.grasp.k_min);
    }
  } catch (const json::exception& e) {
    throw DomainError(std::string("bad pipeline config: ") + e.what());
  }
  if (p.normal_passes < 1) throw DomainError("normal_passes must be >= 1");
  p.weights.validate();
  p.grasp.validate();
  return p;
}

std::string MetricsRow::csv_header() {
  return "sample_id,seed,n_objects,flow_rmse_px,mean_deg,median_deg,pct11,pct22,pct30,depth_rmse_mm,"
         "best_grasp_energy";
}

std::string MetricsRow::to_csv() const {
  return sample_id + "," + std::to_string(seed) + "," + std::to_string(n_objects) + "," + fmt(flow_rmse_px) + "," +
         fmt(mean_deg) + "," + fmt(median_deg) + "," + fmt(pct11) + "," + fmt(pct22) + "," + fmt(pct30) + "," +
         fmt(depth_rmse_mm) + "," + fmt(best_grasp_energy);
}

namespace {

struct SampleInputs {
  Scene scene;
  Mask mask{1, 1};
  Mask boundary{1, 1};
  Grid2 sensor_depth{1, 1, 1};
  std::string sample_id;
  std::uint64_t seed = 0;
};

SampleInputs load_sample(const fs::path& dir, const PipelineParams& params) {
  SampleInputs in;
  in.scene = scene_from_json(read_json(dir / "scene.json"));
  in.mask = Mask(read_grid(params.mask_path ? *params.mask_path : dir / "mask.rfg"));
  in.boundary = params.mask_path ? boundary_from_mask(in.mask) : Mask(read_grid(dir / "boundary.rfg"));
  in.sensor_depth = read_grid(dir / "sensor_depth.rfg");
  in.sample_id = dir.filename().string();
  in.seed = in.scene.seed;
  if (fs::exists(dir / "sample.json")) {
    const json s = read_json(dir / "sample.json");
    in.sample_id = s.value("sample_id", in.sample_id);
  }
  if (in.mask.width() != in.scene.camera.width() || in.mask.height() != in.scene.camera.height() ||
      !in.sensor_depth.same_size(in.mask.grid()) || in.boundary.width() != in.mask.width())
    throw ShapeError("sample grids do not match the camera resolution");
  return in;
}

template <typename Fn>
auto run_stage(Stage stage, std::array<double, kStageCount>& ms, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      ms[static_cast<int>(stage)] =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    } else {
      auto r = fn();
      ms[static_cast<int>(stage)] =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      return r;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(to_string(stage), e.what());
  }
}

template <typename Fn>
double metric_or_nan(Fn&& fn) {
  try {
    return fn();
  } catch (const DomainError&) {
    return kNaN;
  }
}

}  // namespace

PipelineResult run_pipeline(const fs::path& sample_dir, const fs::path& out_dir, const PipelineParams& params) {
  params.weights.validate();
  const SampleInputs in = load_sample(sample_dir, params);
  const Camera& cam = in.scene.camera;
  fs::create_directories(out_dir);

  PipelineResult res;
  const bool run_decode = params.start <= Stage::kDecode;
  const bool run_normals = params.start <= Stage::kNormals;
  const bool run_depth = params.start <= Stage::kDepth;
  const bool run_cloud = params.start <= Stage::kCloud;

  InversionParams inv;
  inv.ior = params.ior;
  inv.plane_depth = in.scene.plane.distance;
  inv.nominal_depth = in.scene.plane.distance - params.nominal_height;

  FlowField flow{Grid2(1, 1, 2)};
  if (run_decode) {
    flow = run_stage(Stage::kDecode, res.stage_ms, [&] {
      const StackOnDisk obj = read_stack(sample_dir / "capture");
      const StackOnDisk ref = read_stack(sample_dir / "reference");
      const CorrespondenceMap c_obj = decode_stack(obj.frames, obj.layout, params.decode);
      const CorrespondenceMap c_ref = decode_stack(ref.frames, ref.layout, params.decode);
      FlowField f = flow_from_correspondence(c_obj, c_ref, in.mask, params.flow);
      std::size_t finite = 0;
      for (int y = 0; y < in.mask.height(); ++y)
        for (int x = 0; x < in.mask.width(); ++x) finite += in.mask(x, y) && f.grid.finite_at(x, y);
      if (finite == 0) throw Error("no decodable pixel inside the mask");
      write_grid(out_dir / "flow.rfg", f.grid);
      if (params.previews) write_png_preview(out_dir / "flow.png", f.grid);
      return f;
    });
  } else {
    flow.grid = read_grid(out_dir / "flow.rfg");
  }

  auto refine = [&](const Grid2& normals) {
    return refine_depth(in.sensor_depth, in.mask, in.boundary, normals, cam, params.weights, params.refine);
  };

  if (run_normals) {
    res.normals = run_stage(Stage::kNormals, res.stage_ms, [&] {
      NormalMap nm = normal_map_from_flow(flow, in.mask, cam, inv);
      for (int pass = 1; pass < params.normal_passes; ++pass) {
        const RefineResult d = refine(nm.grid);
        nm = normal_map_from_flow(flow, in.mask, cam, inv, &d.depth);
      }
      write_grid(out_dir / "normals.rfg", nm.grid);
      if (params.previews) write_png_preview(out_dir / "normals.png", nm.grid, PreviewKind::kNormal);
      return nm.grid;
    });
  } else {
    res.normals = read_grid(out_dir / "normals.rfg");
  }

  if (run_depth) {
    res.depth = run_stage(Stage::kDepth, res.stage_ms, [&] {
      RefineResult d = refine(res.normals);
      write_grid(out_dir / "depth.rfg", d.depth);
      if (params.previews) write_png_preview(out_dir / "depth.png", d.depth);
      return d.depth;
    });
  } else {
    res.depth = read_grid(out_dir / "depth.rfg");
  }

  if (run_cloud) {
    res.cloud = run_stage(Stage::kCloud, res.stage_ms, [&] {
      PointCloudN c = largest_component(depth_to_pointcloud(res.depth, res.normals, in.mask, cam));
      write_pointcloud(out_dir / "cloud.txt", c);
      return c;
    });
  } else {
    res.cloud = read_pointcloud(out_dir / "cloud.txt");
  }

  res.grasps = run_stage(Stage::kGrasp, res.stage_ms, [&] {
    GraspConfig cfg = params.grasp;
    cfg.up = -cam.pose().rotation.col(2);
    GraspPlan plan = plan_grasp(res.cloud, params.gripper, cfg);
    write_text(out_dir / "grasps.json", to_json(plan).dump(2) + "\n");
    return plan;
  });

  // Metrics against ground truth.
  const Grid2 gt_depth = read_grid(sample_dir / "gt_depth.rfg");
  const Grid2 gt_normal = read_grid(sample_dir / "gt_normal.rfg");
  const FlowField gt_flow{read_grid(sample_dir / "gt_flow.rfg")};
  MetricsRow& m = res.metrics;
  m.sample_id = in.sample_id;
  m.seed = in.seed;
  m.n_objects = static_cast<int>(in.scene.objects.size());
  m.flow_rmse_px = metric_or_nan([&] { return flow_rmse(flow, gt_flow, in.mask); });
  try {
    const NormalMetrics nm = angular_error_stats(res.normals, gt_normal, in.mask);
    m.mean_deg = nm.mean_deg;
    m.median_deg = nm.median_deg;
    m.pct11 = nm.pct_11_25;
    m.pct22 = nm.pct_22_5;
    m.pct30 = nm.pct_30;
  } catch (const DomainError&) {
    m.mean_deg = m.median_deg = m.pct11 = m.pct22 = m.pct30 = kNaN;
  }
  m.depth_rmse_mm = metric_or_nan([&] { return 1000.0 * depth_rmse(res.depth, gt_depth, in.mask); });
  m.best_grasp_energy = res.grasps.found() ? res.grasps.best().energy : kNaN;

  write_text(out_dir / "metrics.csv", MetricsRow::csv_header() + "\n" + m.to_csv() + "\n");
  std::string timing = "sample_id,stage,wall_ms\n";
  for (int s = 0; s < kStageCount; ++s)
    timing += m.sample_id + "," + to_string(static_cast<Stage>(s)) + "," + fmt(res.stage_ms[s]) + "\n";
  write_text(out_dir / "timing.csv", timing);
  return res;
}

EvaluationSummary evaluate(const fs::path& dataset_dir, const fs::path& out_dir, const PipelineParams& params) {
  EvaluationSummary summary;
  fs::create_directories(out_dir);
  std::string timing = "sample_id,stage,wall_ms\n";
  for (const SampleInfo& s : read_manifest(dataset_dir)) {
    try {
      const PipelineResult r = run_pipeline(dataset_dir / s.sample_id, out_dir / s.sample_id, params);
      summary.rows.push_back(r.metrics);
      for (int k = 0; k < kStageCount; ++k)
        timing += s.sample_id + "," + to_string(static_cast<Stage>(k)) + "," + fmt(r.stage_ms[k]) + "\n";
    } catch (const std::exception& e) {
      std::cerr << s.sample_id << ": " << e.what() << "\n";
      summary.failed.push_back(s.sample_id);
    }
  }
  std::string csv = MetricsRow::csv_header() + "\n";
  for (const auto& r : summary.rows) csv += r.to_csv() + "\n";
  write_text(out_dir / "metrics.csv", csv);
  write_text(out_dir / "timing.csv", timing);
  return summary;
}

}  // namespace rfgeo
