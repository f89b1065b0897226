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

// Scene builders and oracles shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "rfgeo/depthopt.hpp"
#include "rfgeo/flowcodec.hpp"
#include "rfgeo/raysim.hpp"

namespace rfgeo::testing {

inline Scene empty_scene(double plane_distance, int pattern_size = 256) {
  Scene s;
  s.plane.distance = plane_distance;
  s.plane.layout = PatternLayout{10, pattern_size, pattern_size};
  return s;
}

/// Sphere shell floating between camera and plane, centred on pixel (px, py).
inline TransparentObject shell_at(const Camera& cam, double px, double py, double depth, double radius,
                                  double thickness, double ior = 1.5) {
  TransparentObject o;
  o.shape = SphereShell{radius, thickness};
  o.pose.translation = backproject(cam, {px, py}, depth);
  o.ior = ior;
  return o;
}

/// Random floating sphere shell scene, plane at 0.8 m.
inline Scene random_shell_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scene s = empty_scene(0.8);
  s.seed = seed;
  const double r = 0.03 + 0.03 * u(rng);
  s.objects.push_back(shell_at(s.camera, 88.0 + 80.0 * u(rng), 88.0 + 80.0 * u(rng), 0.42 + 0.12 * u(rng), r,
                               0.002 + 0.003 * u(rng), 1.45 + 0.1 * u(rng)));
  return s;
}

/// Thick block whose front face is tilted by `tilt_deg` about `axis_deg` (in-image direction)
/// and sits at `front_depth` on the optical axis; its back runs past the plane, so every ray
/// meets exactly one interface before the background.
inline Scene tilted_block_scene(double tilt_deg, double axis_deg, double front_depth = 0.35,
                                double plane_distance = 0.6) {
  Scene s = empty_scene(plane_distance);
  TransparentObject o;
  const double thickness = 0.5;
  o.shape = Slab{thickness, 0.9, 0.9};
  const Eigen::Vector3d axis(std::cos(axis_deg * M_PI / 180.0), std::sin(axis_deg * M_PI / 180.0), 0.0);
  o.pose.rotation = axis_angle(axis, tilt_deg * M_PI / 180.0);
  // Front face centre on the optical axis at front_depth.
  const Eigen::Vector3d front_normal = o.pose.rotation * Eigen::Vector3d(0.0, 0.0, -1.0);
  const Eigen::Vector3d front_point(0.0, 0.0, front_depth);
  o.pose.translation = front_point - 0.5 * thickness * front_normal;
  o.ior = 1.5;
  s.objects.push_back(o);
  return s;
}

/// Solid sphere centred on the plane: the visible dome refracts once into glass that runs
/// to the background.
inline Scene dome_scene(double radius = 0.12, double plane_distance = 0.6) {
  Scene s = empty_scene(plane_distance);
  TransparentObject o;
  o.shape = SolidSphere{radius};
  o.pose.translation = Eigen::Vector3d(0.0, 0.0, plane_distance);
  o.ior = 1.5;
  s.objects.push_back(o);
  return s;
}

/// Spherical-shell cap standing on the plane: sphere centre `sink` beyond the plane.
inline Scene cap_scene(double px, double py, double radius = 0.06, double sink = 0.03, double plane_distance = 0.5) {
  Scene s = empty_scene(plane_distance);
  TransparentObject o;
  o.shape = SphereShell{radius, 0.004};
  const Eigen::Vector3d ray = s.camera.ray({px, py});
  o.pose.translation = ray * ((plane_distance + sink) / ray.z());
  o.ior = 1.5;
  s.objects.push_back(o);
  return s;
}

/// Outer surface of an upright cylinder standing on the plane z = table_z (up is -z).
inline PointCloudN cylinder_cloud(const Eigen::Vector3d& base_center, double radius, double height,
                                  double spacing = 0.0015) {
  PointCloudN c;
  const int n_theta = static_cast<int>(std::round(2.0 * M_PI * radius / spacing));
  const int n_z = static_cast<int>(std::round(height / spacing));
  for (int k = 0; k <= n_z; ++k) {
    const double z = base_center.z() - height * k / n_z;
    for (int i = 0; i < n_theta; ++i) {
      const double t = 2.0 * M_PI * i / n_theta;
      const Eigen::Vector3d n(std::cos(t), std::sin(t), 0.0);
      c.points.emplace_back(base_center.x() + radius * n.x(), base_center.y() + radius * n.y(), z);
      c.normals.push_back(n);
      c.labels.push_back(0);
    }
  }
  c.component_count = 1;
  return c;
}

/// Distance between the cylinder axis (through base_center along z) and the grasp's
/// closing line, converted to the angle between the closing axis and the diameter through
/// the contacts.
inline double diameter_misalignment_deg(const Eigen::Vector3d& center, const Eigen::Vector3d& closing,
                                        const Eigen::Vector3d& base_center, double radius) {
  Eigen::Vector2d c(center.x() - base_center.x(), center.y() - base_center.y());
  Eigen::Vector2d d(closing.x(), closing.y());
  d.normalize();
  const double offset = std::abs(c.x() * d.y() - c.y() * d.x());
  return std::asin(std::min(1.0, offset / radius)) * 180.0 / M_PI;
}

/// Applies a x + b to every frame.
inline std::vector<Grid2> affine_frames(const std::vector<Grid2>& frames, float a, float b) {
  std::vector<Grid2> out = frames;
  for (auto& f : out)
    for (float& v : f.data()) v = a * v + b;
  return out;
}

inline std::size_t differing_entries(const Grid2& a, const Grid2& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const float x = a.data()[i];
    const float y = b.data()[i];
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) ++n;
  }
  return n;
}

/// Object and reference correspondence maps plus decoded flow for a scene.
struct Decoded {
  CorrespondenceMap object;
  CorrespondenceMap reference;
  FlowField flow;
};

inline Decoded decode_scene(const Scene& scene, const Mask& mask) {
  const PatternLayout& l = scene.plane.layout;
  const PatternStack stack = gen_patterns(l.bits, l.pattern_width, l.pattern_height);
  const auto obj = render_capture(scene, stack);
  const auto ref = render_capture(reference_scene(scene), stack);
  Decoded d{decode_stack(obj, l), decode_stack(ref, l), FlowField{Grid2(1, 1, 2)}};
  d.flow = flow_from_correspondence(d.object, d.reference, mask);
  return d;
}

}  // namespace rfgeo::testing
