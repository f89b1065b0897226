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

#include <filesystem>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "rfgeo/camera.hpp"
#include "rfgeo/grid.hpp"

namespace rfgeo {

/// Weights of the depth refinement energy
///
///   E(D) = lambda_data   * sum_obs (D_p - D0_p)^2
///        + lambda_smooth * sum_(p,q) w_pq (D_p - D_q)^2
///        + lambda_normal * sum_(p,q) w_pq (n_p . (P_q - P_p))^2
///
/// over 4-neighbour edges, where P = backproject(pixel, D) and w_pq = boundary_atten when
/// either end of the edge lies on the boundary map, else 1. The normal sum runs over both
/// orientations of every edge whose source pixel carries a finite normal.
struct EnergyWeights {
  double lambda_data = 1000.0;
  double lambda_smooth = 1e-3;
  double lambda_normal = 1.0;
  double boundary_atten = 0.01;

  void validate() const;
};

struct AssembleOptions {
  /// Width in pixels of the observed band outside the mask that anchors the solution.
  int ring_width = 2;
  double regularization = 1e-10;
};

/// Normal equations A x = b of the refinement energy. Unknowns are the mask pixels plus the
/// ring pixels with a finite observation, numbered in raster order. Sensor depth inside the
/// mask is ignored.
struct SparseSystem {
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  Eigen::VectorXd rhs;
  /// Constant term, so that E(x) = x'Ax - 2 b'x + energy_constant.
  double energy_constant = 0.0;
  /// Linear pixel index (y * width + x) of each unknown.
  std::vector<int> pixel_of;
  /// Unknown index of each pixel, -1 for pixels outside the system.
  std::vector<int> unknown_of;
  /// Observed depth of each unknown (NaN when unobserved).
  Eigen::VectorXd observed;
  int width = 0;
  int height = 0;

  int size() const { return static_cast<int>(pixel_of.size()); }
};

/// Throws UnderConstrainedError when a connected group of unknowns has no observation
/// (e.g. a mask touching the image border with no ring).
SparseSystem assemble_system(const Grid2& sensor_depth, const Mask& mask, const Mask& boundary,
                             const Grid2& normal_map, const Camera& camera, const EnergyWeights& weights,
                             const AssembleOptions& options = {});

struct CgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
  /// False when max_iter ran out or the energy stopped decreasing before the residual test held.
  bool converged = false;
  /// Quadratic objective 0.5 x'Ax - b'x at the initial guess and after every accepted step.
  /// relative_residual is the true ||b - Ax|| / ||b||, not the recurrence.
  std::vector<double> energies;
};

/// Jacobi-preconditioned conjugate gradient. Throws NumericError on non-finite values.
CgResult solve_cg(const SparseSystem& system, const Eigen::VectorXd& init, double tol = 1e-8,
                  int max_iter = 10000);
CgResult solve_cg(const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix, const Eigen::VectorXd& rhs,
                  const Eigen::VectorXd& init, double tol = 1e-8, int max_iter = 10000);

struct RefineOptions {
  AssembleOptions assemble;
  double tol = 1e-8;
  int max_iter = 10000;
  /// Solves of the normal term. It is linear in z-depth, so later passes only warm-start
  /// from the previous solution and stop once the residual test holds.
  int passes = 2;
};

struct RefineResult {
  /// Sensor depth outside the mask, refined depth inside.
  Grid2 depth;
  CgResult solve;
};

RefineResult refine_depth(const Grid2& sensor_depth, const Mask& mask, const Mask& boundary,
                          const Grid2& normal_map, const Camera& camera, const EnergyWeights& weights,
                          const RefineOptions& options = {});

/// Oriented points in the camera frame, one per masked pixel with finite depth and normal.
struct PointCloudN {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;
  std::vector<Eigen::Vector2i> pixels;
  /// 4-connected component of the source pixel, numbered in raster order of first pixel.
  std::vector<int> labels;
  int component_count = 0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

/// Throws DomainError when no masked pixel yields a point.
PointCloudN depth_to_pointcloud(const Grid2& depth, const Grid2& normal_map, const Mask& mask, const Camera& camera);

/// Points of the largest component (lowest label on ties), relabelled to 0.
PointCloudN largest_component(const PointCloudN& cloud);

/// ASCII table, one "x y z nx ny nz label" line per point, printed for exact round trips.
void write_pointcloud(const std::filesystem::path& path, const PointCloudN& cloud);
PointCloudN read_pointcloud(const std::filesystem::path& path);

}  // namespace rfgeo
