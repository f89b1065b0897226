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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rfgeo/depthopt.hpp"
#include "rfgeo/errors.hpp"
#include "rfgeo/flow2normal.hpp"
#include "rfgeo/flowcodec.hpp"
#include "rfgeo/graspisf.hpp"
#include "rfgeo/harness.hpp"
#include "rfgeo/parallel.hpp"
#include "rfgeo/raysim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw rfgeo::Error("cannot open " + path);
  return json::parse(f);
}

void save_json(const std::string& path, const json& j) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw rfgeo::Error("cannot open " + path + " for writing");
  f << j.dump(2) << "\n";
}

// A camera file may hold a bare camera or a whole scene.
rfgeo::Camera load_camera(const std::string& path) {
  const json j = load_json(path);
  return rfgeo::camera_from_json(j.contains("camera") ? j.at("camera") : j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rfgeo: refractive flow geometry for transparent objects"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  // gen-patterns
  auto* gp = app.add_subcommand("gen-patterns", "Write the gray-code pattern stack");
  int gp_bits = 10, gp_w = 256, gp_h = 256;
  std::string gp_out;
  gp->add_option("--bits", gp_bits)->check(CLI::Range(1, 16));
  gp->add_option("--width", gp_w);
  gp->add_option("--height", gp_h);
  gp->add_option("--out", gp_out)->required();

  // decode-flow
  auto* df = app.add_subcommand("decode-flow", "Decode captures into refractive flow");
  std::string df_obj, df_ref, df_mask, df_out, df_corr;
  float df_contrast = 0.05f;
  df->add_option("--obj", df_obj, "Object capture stack directory")->required();
  df->add_option("--ref", df_ref, "Reference capture stack directory")->required();
  df->add_option("--mask", df_mask)->required();
  df->add_option("--out", df_out)->required();
  df->add_option("--correspondence", df_corr, "Also write the object correspondence map");
  df->add_option("--min-contrast", df_contrast);

  // render
  auto* rd = app.add_subcommand("render", "Ray trace a scene into ground truth, sensor depth and captures");
  std::string rd_scene, rd_out;
  rd->add_option("--scene", rd_scene)->required();
  rd->add_option("--out", rd_out)->required();

  // flow2normal
  auto* fn = app.add_subcommand("flow2normal", "Invert refractive flow into surface normals");
  fn->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  std::string fn_flow, fn_mask, fn_cam, fn_out, fn_depth;
  double fn_ior = 1.5, fn_h = 0.8, fn_d0 = 0.5;
  fn->add_option("--flow", fn_flow)->required();
  fn->add_option("--mask", fn_mask)->required();
  fn->add_option("--camera", fn_cam)->required();
  fn->add_option("--ior", fn_ior);
  fn->add_option("--h", fn_h, "Background plane depth");
  fn->add_option("--d0", fn_d0, "Nominal surface depth");
  fn->add_option("--depth", fn_depth, "Per-pixel surface depth prior");
  fn->add_option("--out", fn_out)->required();

  // refine-depth
  auto* rf = app.add_subcommand("refine-depth", "Refine masked depth from normals by sparse least squares");
  std::string rf_depth, rf_mask, rf_boundary, rf_normal, rf_cam, rf_out, rf_cloud;
  rfgeo::EnergyWeights rf_w;
  rf->add_option("--depth", rf_depth, "Sensor depth")->required();
  rf->add_option("--mask", rf_mask)->required();
  rf->add_option("--boundary", rf_boundary)->required();
  rf->add_option("--normal", rf_normal)->required();
  rf->add_option("--camera", rf_cam)->required();
  rf->add_option("--out", rf_out)->required();
  rf->add_option("--cloud", rf_cloud, "Also export the singulated oriented point cloud");
  rf->add_option("--lambda-data", rf_w.lambda_data);
  rf->add_option("--lambda-smooth", rf_w.lambda_smooth);
  rf->add_option("--lambda-normal", rf_w.lambda_normal);
  rf->add_option("--boundary-atten", rf_w.boundary_atten);

  // plan-grasp
  auto* pg = app.add_subcommand("plan-grasp", "Plan top-down grasps on an oriented point cloud");
  std::string pg_cloud, pg_gripper, pg_out;
  rfgeo::GraspConfig pg_cfg;
  pg->add_option("--cloud", pg_cloud)->required();
  pg->add_option("--gripper", pg_gripper);
  pg->add_option("--n", pg_cfg.n_candidates);
  pg->add_option("--seed", pg_cfg.seed);
  pg->add_option("--iters", pg_cfg.iterations);
  pg->add_option("--out", pg_out)->required();

  // gen-dataset
  auto* gd = app.add_subcommand("gen-dataset", "Generate randomized table-top samples");
  std::string gd_cfg, gd_out;
  int gd_n = 10;
  std::uint64_t gd_seed = 1;
  gd->add_option("--config", gd_cfg);
  gd->add_option("--n", gd_n)->check(CLI::NonNegativeNumber);
  gd->add_option("--seed", gd_seed);
  gd->add_option("--out", gd_out)->required();

  // pipeline / evaluate share the parameter document
  auto* pl = app.add_subcommand("pipeline", "Run decode, normals, depth, cloud and grasp on one sample");
  std::string pl_sample, pl_out, pl_cfg, pl_start = "decode", pl_mask;
  std::optional<std::uint64_t> pl_seed;
  bool pl_no_png = false;
  pl->add_option("--sample", pl_sample)->required();
  pl->add_option("--out", pl_out)->required();
  pl->add_option("--config", pl_cfg);
  pl->add_option("--seed", pl_seed, "Grasp sampling seed");
  pl->add_option("--start", pl_start, "First stage to run; earlier outputs are reloaded from --out")
      ->check(CLI::IsMember({"decode", "normals", "depth", "cloud", "grasp"}));
  pl->add_option("--mask", pl_mask, "External mask replacing the ground-truth one");
  pl->add_flag("--no-png", pl_no_png);

  auto* ev = app.add_subcommand("evaluate", "Run the pipeline over a dataset and aggregate metrics");
  std::string ev_data, ev_out, ev_cfg;
  std::optional<std::uint64_t> ev_seed;
  ev->add_option("--dataset", ev_data)->required();
  ev->add_option("--out", ev_out)->required();
  ev->add_option("--config", ev_cfg);
  ev->add_option("--seed", ev_seed, "Grasp sampling seed");

  CLI11_PARSE(app, argc, argv);
  rfgeo::set_thread_count(threads);

  try {
    if (*gp) {
      const rfgeo::PatternStack s = rfgeo::gen_patterns(gp_bits, gp_w, gp_h);
      rfgeo::write_stack(gp_out, s.frames, s.layout);
    } else if (*df) {
      const auto obj = rfgeo::read_stack(df_obj);
      const auto ref = rfgeo::read_stack(df_ref);
      const rfgeo::Mask mask(rfgeo::read_grid(df_mask));
      rfgeo::DecodeOptions opt;
      opt.min_contrast = df_contrast;
      const auto c_obj = rfgeo::decode_stack(obj.frames, obj.layout, opt);
      const auto c_ref = rfgeo::decode_stack(ref.frames, ref.layout, opt);
      if (!df_corr.empty()) rfgeo::write_grid(df_corr, c_obj.grid);
      rfgeo::write_grid(df_out, rfgeo::flow_from_correspondence(c_obj, c_ref, mask).grid);
    } else if (*rd) {
      const rfgeo::Scene scene = rfgeo::scene_from_json(load_json(rd_scene));
      rfgeo::write_sample(rd_out, fs::path(rd_out).filename().string(), scene);
      const fs::path out(rd_out);
      rfgeo::write_png_preview(out / "gt_depth.png", rfgeo::read_grid(out / "gt_depth.rfg"));
      rfgeo::write_png_preview(out / "gt_normal.png", rfgeo::read_grid(out / "gt_normal.rfg"),
                               rfgeo::PreviewKind::kNormal);
      rfgeo::write_png_preview(out / "mask.png", rfgeo::read_grid(out / "mask.rfg"));
      rfgeo::write_png_preview(out / "boundary.png", rfgeo::read_grid(out / "boundary.rfg"));
      rfgeo::write_png_preview(out / "gt_flow.png", rfgeo::read_grid(out / "gt_flow.rfg"));
      rfgeo::write_png_preview(out / "sensor_depth.png", rfgeo::read_grid(out / "sensor_depth.rfg"));
    } else if (*fn) {
      rfgeo::InversionParams p;
      p.ior = fn_ior;
      p.plane_depth = fn_h;
      p.nominal_depth = fn_d0;
      const rfgeo::FlowField flow{rfgeo::read_grid(fn_flow)};
      const rfgeo::Mask mask(rfgeo::read_grid(fn_mask));
      std::optional<rfgeo::Grid2> prior;
      if (!fn_depth.empty()) prior = rfgeo::read_grid(fn_depth);
      const auto nm =
          rfgeo::normal_map_from_flow(flow, mask, load_camera(fn_cam), p, prior ? &*prior : nullptr);
      rfgeo::write_grid(fn_out, nm.grid);
      std::cerr << "inversion failures: " << nm.failures << "\n";
    } else if (*rf) {
      const rfgeo::Camera cam = load_camera(rf_cam);
      const rfgeo::Mask mask(rfgeo::read_grid(rf_mask));
      const rfgeo::Mask boundary(rfgeo::read_grid(rf_boundary));
      const rfgeo::Grid2 normals = rfgeo::read_grid(rf_normal);
      const auto r = rfgeo::refine_depth(rfgeo::read_grid(rf_depth), mask, boundary, normals, cam, rf_w);
      rfgeo::write_grid(rf_out, r.depth);
      if (!rf_cloud.empty())
        rfgeo::write_pointcloud(rf_cloud,
                                rfgeo::largest_component(rfgeo::depth_to_pointcloud(r.depth, normals, mask, cam)));
      std::cerr << "cg iterations: " << r.solve.iterations << ", relative residual " << r.solve.relative_residual
                << "\n";
    } else if (*pg) {
      const rfgeo::GripperModel g =
          pg_gripper.empty() ? rfgeo::GripperModel{} : rfgeo::gripper_from_json(load_json(pg_gripper));
      const auto plan = rfgeo::plan_grasp(rfgeo::read_pointcloud(pg_cloud), g, pg_cfg);
      save_json(pg_out, rfgeo::to_json(plan));
      if (!plan.found()) std::cerr << "no grasp found\n";
    } else if (*gd) {
      const rfgeo::DatasetConfig cfg = gd_cfg.empty() ? rfgeo::default_dataset_config()
                                                      : rfgeo::dataset_config_from_json(load_json(gd_cfg));
      rfgeo::gen_dataset(cfg, gd_n, gd_seed, gd_out);
    } else if (*pl) {
      rfgeo::PipelineParams p = pl_cfg.empty() ? rfgeo::PipelineParams{}
                                               : rfgeo::pipeline_params_from_json(load_json(pl_cfg));
      if (pl_seed) p.grasp.seed = *pl_seed;
      p.start = rfgeo::stage_from_string(pl_start);
      p.previews = !pl_no_png;
      if (!pl_mask.empty()) p.mask_path = pl_mask;
      const auto r = rfgeo::run_pipeline(pl_sample, pl_out, p);
      std::cout << rfgeo::MetricsRow::csv_header() << "\n" << r.metrics.to_csv() << "\n";
    } else if (*ev) {
      rfgeo::PipelineParams p = ev_cfg.empty() ? rfgeo::PipelineParams{}
                                               : rfgeo::pipeline_params_from_json(load_json(ev_cfg));
      if (ev_seed) p.grasp.seed = *ev_seed;
      const auto s = rfgeo::evaluate(ev_data, ev_out, p);
      std::cout << s.rows.size() << " samples evaluated, " << s.failed.size() << " failed\n";
      if (!s.failed.empty()) return 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
