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

#include <benchmark/benchmark.h>

#include "rfgeo/depthopt.hpp"
#include "rfgeo/flow2normal.hpp"
#include "rfgeo/flowcodec.hpp"
#include "rfgeo/graspisf.hpp"
#include "rfgeo/raysim.hpp"
#include "scenes.hpp"

namespace {

using namespace rfgeo;

void BM_GrayRoundTrip(benchmark::State& state) {
  std::uint32_t acc = 0;
  for (auto _ : state) {
    for (std::uint32_t n = 0; n < 1024; ++n) acc ^= gray_decode(gray_encode(n, 10), 10);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_GrayRoundTrip);

void BM_DecodeStack(benchmark::State& state) {
  const Scene scene = testing::random_shell_scene(3);
  const PatternLayout& l = scene.plane.layout;
  const auto captured = render_capture(scene, gen_patterns(l.bits, l.pattern_width, l.pattern_height));
  for (auto _ : state) benchmark::DoNotOptimize(decode_stack(captured, l));
}
BENCHMARK(BM_DecodeStack)->Unit(benchmark::kMillisecond);

void BM_FlowFromCorrespondence(benchmark::State& state) {
  const Scene scene = testing::random_shell_scene(3);
  const GeoChannels geo = render_channels(scene);
  const testing::Decoded d = testing::decode_scene(scene, geo.mask);
  for (auto _ : state) benchmark::DoNotOptimize(flow_from_correspondence(d.object, d.reference, geo.mask));
}
BENCHMARK(BM_FlowFromCorrespondence)->Unit(benchmark::kMillisecond);

void BM_TracePixel(benchmark::State& state) {
  const Scene scene = testing::random_shell_scene(5);
  const Eigen::Vector2d pixel = project(scene.camera, scene.objects.front().pose.translation);
  for (auto _ : state) benchmark::DoNotOptimize(trace_pixel(scene, pixel));
}
BENCHMARK(BM_TracePixel);

void BM_RenderChannels(benchmark::State& state) {
  const Scene scene = testing::random_shell_scene(5);
  for (auto _ : state) benchmark::DoNotOptimize(render_channels(scene));
}
BENCHMARK(BM_RenderChannels)->Unit(benchmark::kMillisecond);

void BM_NormalMap(benchmark::State& state) {
  const Scene scene = testing::tilted_block_scene(20.0, 30.0);
  const GeoChannels geo = render_channels(scene);
  InversionParams params;
  params.plane_depth = scene.plane.distance;
  params.nominal_depth = 0.35;
  for (auto _ : state) benchmark::DoNotOptimize(normal_map_from_flow(geo.gt_flow, geo.mask, scene.camera, params));
}
BENCHMARK(BM_NormalMap)->Unit(benchmark::kMillisecond);

void BM_RefineDepth(benchmark::State& state) {
  const Scene scene = testing::cap_scene(128.0, 128.0);
  const GeoChannels geo = render_channels(scene);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        refine_depth(geo.sensor_depth, geo.mask, geo.boundary, geo.gt_normal, scene.camera, EnergyWeights{}));
}
BENCHMARK(BM_RefineDepth)->Unit(benchmark::kMillisecond);

void BM_PlanGrasp(benchmark::State& state) {
  const PointCloudN cloud = testing::cylinder_cloud({0.02, -0.01, 0.6}, 0.03, 0.08);
  GraspConfig config;
  config.n_candidates = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(plan_grasp(cloud, GripperModel{}, config));
}
BENCHMARK(BM_PlanGrasp)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
