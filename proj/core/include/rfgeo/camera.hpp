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

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

namespace rfgeo {

/// Rigid transform with a validated rotation (orthonormal, det +1).
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  RigidTransform() = default;
  RigidTransform(const Eigen::Matrix3d& r, const Eigen::Vector3d& t);

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Eigen::Vector3d apply_inverse(const Eigen::Vector3d& p) const {
    return rotation.transpose() * (p - translation);
  }
  RigidTransform inverse() const;
  RigidTransform operator*(const RigidTransform& rhs) const;
  Eigen::Matrix4d matrix() const;
};

inline bool operator==(const RigidTransform& a, const RigidTransform& b) {
  return a.rotation == b.rotation && a.translation == b.translation;
}

/// Throws DomainError unless `r` is orthonormal with determinant +1 (tol 1e-9).
void validate_rotation(const Eigen::Matrix3d& r);

/// Rotation of `angle_rad` about `axis` (need not be normalized).
Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle_rad);

/// Pinhole camera. Camera frame: x right, y down, z along the principal axis.
/// Depths are z-depths (projection on the principal axis), not ray lengths.
class Camera {
 public:
  Camera(int width, int height, double fx, double fy, double cx, double cy,
         RigidTransform pose = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double fx() const noexcept { return fx_; }
  double fy() const noexcept { return fy_; }
  double cx() const noexcept { return cx_; }
  double cy() const noexcept { return cy_; }
  /// Camera-to-world.
  const RigidTransform& pose() const noexcept { return pose_; }

  /// Camera-frame direction through `pixel`, scaled so that z == 1.
  Eigen::Vector3d ray(const Eigen::Vector2d& pixel) const noexcept {
    return {(pixel.x() - cx_) / fx_, (pixel.y() - cy_) / fy_, 1.0};
  }

  bool operator==(const Camera&) const = default;

 private:
  int width_;
  int height_;
  double fx_;
  double fy_;
  double cx_;
  double cy_;
  RigidTransform pose_;
};

/// Camera-frame point to continuous pixel coordinates. Throws DomainError for z <= 0.
Eigen::Vector2d project(const Camera& camera, const Eigen::Vector3d& point);

/// Pixel plus z-depth to camera-frame point. Throws DomainError for depth <= 0.
Eigen::Vector3d backproject(const Camera& camera, const Eigen::Vector2d& pixel, double depth);

/// Default 256x256 simulation camera (fx = fy = 320, principal point at 128).
Camera default_camera();

nlohmann::json to_json(const RigidTransform& t);
RigidTransform transform_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Camera& camera);
Camera camera_from_json(const nlohmann::json& j);

}  // namespace rfgeo
