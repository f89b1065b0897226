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

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "rfgeo/camera.hpp"
#include "rfgeo/flowcodec.hpp"
#include "rfgeo/grid.hpp"

namespace rfgeo {

struct SolidSphere {
  double radius = 0.05;
};

/// Glass between two concentric spheres.
struct SphereShell {
  double outer_radius = 0.05;
  double thickness = 0.003;
};

/// Open tube: glass between two coaxial cylinders, axis along local z, centered at the origin.
struct CylinderShell {
  double radius = 0.04;
  double thickness = 0.003;
  double height = 0.1;
};

/// Box with `thickness` along local z and extents along local x and y.
struct Slab {
  double thickness = 0.005;
  double extent_x = 0.1;
  double extent_y = 0.1;
};

using Shape = std::variant<SolidSphere, SphereShell, CylinderShell, Slab>;

struct TransparentObject {
  Shape shape;
  /// Object-to-world.
  RigidTransform pose;
  double ior = 1.5;

  void validate() const;
  /// Radius of a sphere about pose.translation that encloses the object.
  double bounding_radius() const;
  /// Largest extent of the object along world direction `dir` (unit), measured from the
  /// pose origin.
  double support(const Eigen::Vector3d& dir) const;
};

/// Fronto-parallel background plane at camera z-depth `distance`. Its pattern coordinates are
/// tied to the direct view: a plane point imaged at pixel (px, py) carries pattern coordinate
/// ((px + 0.5) / scale + offset_u, (py + 0.5) / scale + offset_v).
struct PatternPlane {
  double distance = 0.8;
  double scale_px_per_unit = 1.0;
  double offset_u = 0.0;
  double offset_v = 0.0;
  PatternLayout layout;
};

/// Type I / Type II depth sensor error model.
struct SensorModel {
  double p_fail = 0.3;
  double grazing_deg = 70.0;
  double noise_sigma_m = 0.001;
};

struct Scene {
  Camera camera = default_camera();
  PatternPlane plane;
  std::vector<TransparentObject> objects;
  SensorModel sensor;
  std::uint64_t seed = 1;
  /// Radiance added to every captured frame (black level).
  double ambient = 0.0;
  double ior_air = 1.0;

  /// Objects may cross the background plane (they then rest in optical contact with it), but
  /// must lie in front of the camera.
  void validate() const;
};

enum class RayStatus { kBackgroundDirect, kBackgroundRefracted, kTirLost, kMiss };

const char* to_string(RayStatus s);

/// Result of tracing one camera ray. All geometry is in the camera frame.
struct RayOutcome {
  RayStatus status = RayStatus::kMiss;
  double first_hit_depth = std::numeric_limits<double>::quiet_NaN();
  Eigen::Vector3d first_hit_normal = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  Eigen::Vector3d background_point = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  Eigen::Vector2d background_pattern_coord = Eigen::Vector2d::Constant(std::numeric_limits<double>::quiet_NaN());
  /// Angle between the first-hit normal and the reversed view ray, degrees.
  double first_hit_incidence_deg = std::numeric_limits<double>::quiet_NaN();
  /// Product of Fresnel transmittances along the path; 0 when the ray is lost.
  double transmittance = 0.0;
  int interfaces = 0;

  bool hit_object() const { return std::isfinite(first_hit_depth); }
};

/// Snell refraction. `normal` must face against `incident`; `eta` = n1 / n2.
/// Returns std::nullopt on total internal reflection. Throws DomainError for non-unit
/// inputs (tolerance 1e-9) or a normal facing along the incident direction.
std::optional<Eigen::Vector3d> refract_dir(const Eigen::Vector3d& incident, const Eigen::Vector3d& normal,
                                           double eta);

/// Unpolarized Fresnel transmittance at a dielectric interface.
double fresnel_transmittance(double cos_incident, double cos_transmitted, double n1, double n2);

/// World-frame polyline of a traced ray, starting at the ray origin.
struct TracePath {
  std::vector<Eigen::Vector3d> vertices;
  Eigen::Vector3d final_direction = Eigen::Vector3d::Zero();
  RayStatus status = RayStatus::kMiss;
};

/// Traces an arbitrary world-frame ray through the scene objects until it reaches the
/// background plane, escapes, or is lost to total internal reflection.
TracePath trace_ray(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                    RayOutcome* outcome = nullptr);

/// Traces the camera ray through `pixel` (continuous coordinates).
RayOutcome trace_pixel(const Scene& scene, const Eigen::Vector2d& pixel);

/// Depth the simulated sensor reports for one ray.
/// Direct background: plane depth plus Gaussian noise. Refracted: z-depth of the background
/// point (Type II). Object hits whose incidence exceeds `grazing_deg` drop out with
/// probability `p_fail` (Type I). Lost rays report NaN.
double sensor_model(const RayOutcome& outcome, const SensorModel& sensor, std::mt19937_64& rng);

/// Per-pixel generator seeded from (seed, x, y).
std::mt19937_64 pixel_rng(std::uint64_t seed, int x, int y);

/// Morphological gradient (3x3 dilation minus 3x3 erosion). Pixels outside the image count as 0.
Mask boundary_from_mask(const Mask& mask);
Mask dilate(const Mask& mask);
Mask erode(const Mask& mask);

struct GeoChannels {
  Grid2 gt_depth;
  Grid2 gt_normal;
  Mask mask;
  Mask boundary;
  FlowField gt_flow;
  Grid2 sensor_depth;
};

GeoChannels render_channels(const Scene& scene);

/// Camera frames seen while the background displays each frame of `stack`:
/// ambient + transmittance * pattern value at the traced background cell.
std::vector<Grid2> render_capture(const Scene& scene, const PatternStack& stack);

/// The same scene with every object removed.
Scene reference_scene(const Scene& scene);

nlohmann::json to_json(const TransparentObject& object);
TransparentObject object_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

}  // namespace rfgeo
