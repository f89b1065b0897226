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

#include "rfgeo/camera.hpp"

#include <cmath>

#include "rfgeo/errors.hpp"

namespace rfgeo {

void validate_rotation(const Eigen::Matrix3d& r) {
  if (!r.allFinite()) throw DomainError("rotation has non-finite entries");
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9) throw DomainError("rotation is not orthonormal");
  if (std::abs(r.determinant() - 1.0) > 1e-9) throw DomainError("rotation determinant is not +1");
}

Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
  if (axis.norm() == 0.0) throw DomainError("zero rotation axis");
  return Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix();
}

RigidTransform::RigidTransform(const Eigen::Matrix3d& r, const Eigen::Vector3d& t)
    : rotation(r), translation(t) {
  validate_rotation(r);
  if (!t.allFinite()) throw DomainError("translation has non-finite entries");
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(rotation.transpose() * translation);
  return out;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Camera::Camera(int width, int height, double fx, double fy, double cx, double cy, RigidTransform pose)
    : width_(width), height_(height), fx_(fx), fy_(fy), cx_(cx), cy_(cy), pose_(std::move(pose)) {
  if (width < 1 || height < 1) throw DomainError("camera resolution must be positive");
  if (!(fx > 0.0) || !(fy > 0.0)) throw DomainError("focal lengths must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw DomainError("principal point outside the image");
  validate_rotation(pose_.rotation);
}

Eigen::Vector2d project(const Camera& camera, const Eigen::Vector3d& point) {
  if (!(point.z() > 0.0)) throw DomainError("project: point must have positive z");
  return {camera.fx() * point.x() / point.z() + camera.cx(), camera.fy() * point.y() / point.z() + camera.cy()};
}

Eigen::Vector3d backproject(const Camera& camera, const Eigen::Vector2d& pixel, double depth) {
  if (!(depth > 0.0)) throw DomainError("backproject: depth must be positive");
  Eigen::Vector3d p = camera.ray(pixel) * depth;
  p.z() = depth;
  return p;
}

Camera default_camera() { return Camera(256, 256, 320.0, 320.0, 128.0, 128.0); }

nlohmann::json to_json(const RigidTransform& t) {
  nlohmann::json r = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.push_back(t.rotation(i, j));
  return {{"rotation", r}, {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
}

RigidTransform transform_from_json(const nlohmann::json& j) {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  if (j.contains("rotation")) {
    const auto& a = j.at("rotation");
    if (a.size() != 9) throw DomainError("rotation must have 9 row-major entries");
    for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = a.at(i).get<double>();
  } else if (j.contains("axis_angle_deg")) {
    const auto& a = j.at("axis_angle_deg");
    if (a.size() != 4) throw DomainError("axis_angle_deg must be [ax, ay, az, degrees]");
    r = axis_angle({a[0].get<double>(), a[1].get<double>(), a[2].get<double>()},
                   a[3].get<double>() * M_PI / 180.0);
  }
  if (j.contains("translation")) {
    const auto& a = j.at("translation");
    if (a.size() != 3) throw DomainError("translation must have 3 entries");
    t = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  }
  return RigidTransform(r, t);
}

nlohmann::json to_json(const Camera& camera) {
  return {{"width", camera.width()}, {"height", camera.height()}, {"fx", camera.fx()},
          {"fy", camera.fy()},       {"cx", camera.cx()},         {"cy", camera.cy()},
          {"pose", to_json(camera.pose())}};
}

Camera camera_from_json(const nlohmann::json& j) {
  RigidTransform pose;
  if (j.contains("pose")) pose = transform_from_json(j.at("pose"));
  return Camera(j.at("width").get<int>(), j.at("height").get<int>(), j.at("fx").get<double>(),
                j.at("fy").get<double>(), j.at("cx").get<double>(), j.at("cy").get<double>(), pose);
}

}  // namespace rfgeo
