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

#include "rfgeo/flow2normal.hpp"

#include <atomic>
#include <cmath>

#include "rfgeo/errors.hpp"
#include "rfgeo/parallel.hpp"

namespace rfgeo {

void InversionParams::validate() const {
  if (!(ior > 1.0)) throw DomainError("inversion ior must exceed 1");
  if (!(nominal_depth > 0.0 && nominal_depth < plane_depth))
    throw DomainError("inversion needs 0 < nominal_depth < plane_depth");
  if (!(tol_rad > 0.0)) throw DomainError("tol_rad must be positive");
  if (max_iter < 1) throw DomainError("max_iter must be >= 1");
  if (!(bracket_max_deg > 0.0 && bracket_max_deg < 90.0)) throw DomainError("bracket must lie in (0, 90) degrees");
}

std::optional<PixelInversion> normal_from_flow_pixel(const Eigen::Vector2d& flow, const Eigen::Vector2d& pixel,
                                                     const Camera& camera, const InversionParams& params,
                                                     std::optional<double> surface_depth) {
  if (!flow.allFinite()) throw DomainError("normal_from_flow_pixel: flow must be finite");
  const Eigen::Vector3d view = camera.ray(pixel).normalized();
  const Eigen::Vector3d to_camera = -view;

  PixelInversion out;
  out.normal = to_camera;
  if (flow.norm() < params.min_flow_px) return out;

  const double depth = surface_depth.value_or(params.nominal_depth);
  const Eigen::Vector3d surface = camera.ray(pixel) * depth;
  const Eigen::Vector3d background = camera.ray(pixel + flow) * params.plane_depth;
  const Eigen::Vector3d in_glass = (surface - background).normalized();

  // In-plane frame: `to_camera`, and the unit direction from it towards the in-glass ray.
  const double cos_dev = std::clamp(in_glass.dot(to_camera), -1.0, 1.0);
  const Eigen::Vector3d side_raw = in_glass - cos_dev * to_camera;
  if (side_raw.norm() < 1e-12) return out;
  const Eigen::Vector3d side = side_raw.normalized();
  const double deviation = std::acos(cos_dev);

  // Normal at tilt phi: cos(phi) to_camera + sin(phi) side. Exit angle is phi, in-glass
  // angle is (phi - deviation) measured in the same plane; the residual is strictly
  // decreasing in phi.
  auto residual = [&](double phi) { return std::asin(std::sin(phi) / params.ior) - (phi - deviation); };

  double lo = 0.0;
  double hi = params.bracket_max_deg * M_PI / 180.0;
  double r_lo = residual(lo);
  const double r_hi = residual(hi);
  if (std::signbit(r_lo) == std::signbit(r_hi)) return std::nullopt;

  double phi = 0.5 * (lo + hi);
  double r = residual(phi);
  int it = 1;
  while (std::abs(r) >= params.tol_rad && it < params.max_iter) {
    if (std::signbit(r) == std::signbit(r_lo)) {
      lo = phi;
      r_lo = r;
    } else {
      hi = phi;
    }
    phi = 0.5 * (lo + hi);
    r = residual(phi);
    ++it;
  }
  if (std::abs(r) >= params.tol_rad) return std::nullopt;

  out.normal = (std::cos(phi) * to_camera + std::sin(phi) * side).normalized();
  out.tilt_rad = phi;
  out.residual_rad = r;
  out.iterations = it;
  return out;
}

NormalMap normal_map_from_flow(const FlowField& flow, const Mask& mask, const Camera& camera,
                               const InversionParams& params, const Grid2* depth_prior) {
  params.validate();
  const Grid2& f = flow.grid;
  if (f.channels() != 2 || mask.width() != f.width() || mask.height() != f.height())
    throw ShapeError("normal_map_from_flow: flow and mask must share one resolution");
  if (depth_prior && !depth_prior->same_size(f)) throw ShapeError("normal_map_from_flow: depth prior size mismatch");

  NormalMap out{Grid2(f.width(), f.height(), 3, kInvalid), 0};
  std::vector<int> row_failures(f.height(), 0);
  parallel_for(0, f.height(), [&](int y) {
    for (int x = 0; x < f.width(); ++x) {
      if (!mask(x, y)) continue;
      if (!f.finite_at(x, y)) {
        ++row_failures[y];
        continue;
      }
      std::optional<double> depth;
      if (depth_prior) {
        const double d = depth_prior->at(x, y);
        if (std::isfinite(d) && d > 0.0 && d < params.plane_depth) depth = d;
      }
      const auto inv = normal_from_flow_pixel({f.at(x, y, 0), f.at(x, y, 1)}, {x, y}, camera, params, depth);
      if (!inv) {
        ++row_failures[y];
        continue;
      }
      for (int c = 0; c < 3; ++c) out.grid.at(x, y, c) = static_cast<float>(inv->normal[c]);
    }
  });
  for (int n : row_failures) out.failures += static_cast<std::size_t>(n);
  return out;
}

}  // namespace rfgeo
