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

#include <cstddef>
#include <optional>

#include <Eigen/Core>

#include "rfgeo/camera.hpp"
#include "rfgeo/flowcodec.hpp"
#include "rfgeo/grid.hpp"

namespace rfgeo {

/// Single-interface (thin object) inversion settings. Light leaves the background plane at
/// depth `plane_depth`, travels through glass and refracts once into air at the surface
/// point on the view ray at depth `nominal_depth`.
struct InversionParams {
  double ior = 1.5;
  double plane_depth = 0.8;
  double nominal_depth = 0.5;
  int max_iter = 60;
  double tol_rad = 1e-4;
  /// Flows shorter than this are below codec resolution and map to normal incidence.
  double min_flow_px = 0.5;
  double bracket_max_deg = 85.0;

  /// Throws DomainError unless 0 < nominal_depth < plane_depth, ior > 1 and tol_rad > 0.
  void validate() const;
};

struct PixelInversion {
  /// Unit normal in the camera frame, facing the camera.
  Eigen::Vector3d normal;
  /// Angle between the normal and the direction back to the camera.
  double tilt_rad = 0.0;
  /// Snell mismatch at the returned tilt (0 for sub-threshold flow).
  double residual_rad = 0.0;
  int iterations = 0;
};

/// Recovers the surface normal at `pixel` from its refractive flow by bisection on the tilt
/// angle inside the plane spanned by the exit and in-glass directions. `surface_depth`
/// overrides params.nominal_depth when given. Returns std::nullopt when the residual has no
/// sign change over the bracket.
std::optional<PixelInversion> normal_from_flow_pixel(const Eigen::Vector2d& flow, const Eigen::Vector2d& pixel,
                                                     const Camera& camera, const InversionParams& params,
                                                     std::optional<double> surface_depth = std::nullopt);

struct NormalMap {
  /// 3-channel unit normals, NaN outside the mask and at failed pixels.
  Grid2 grid;
  std::size_t failures = 0;
};

/// Per-pixel inversion over the mask. `depth_prior`, when given, supplies the surface depth
/// wherever it is finite and strictly between 0 and the plane depth.
NormalMap normal_map_from_flow(const FlowField& flow, const Mask& mask, const Camera& camera,
                               const InversionParams& params, const Grid2* depth_prior = nullptr);

}  // namespace rfgeo
