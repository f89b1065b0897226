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

#include <array>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "rfgeo/camera.hpp"
#include "rfgeo/depthopt.hpp"

namespace rfgeo {

/// Parallel-jaw gripper. In the gripper frame x is the closing axis, the pads sit at
/// x = +-opening/2 with their normals facing each other, z points away from the object
/// (approach along -z), and the pad centres lie at z = 0. Fingers rise from the pad bottom
/// to `finger_length`, where the palm box starts.
struct GripperModel {
  double pad_width = 0.018;   // along y
  double pad_height = 0.028;  // along z
  double min_open = 0.0;
  double max_open = 0.08;
  double finger_thickness = 0.008;
  double finger_length = 0.058;
  double palm_width = 0.2;  // along x
  double palm_depth = 0.06;
  double palm_height = 0.06;

  void validate() const;
};

struct GraspConfig {
  int n_candidates = 200;
  std::uint64_t seed = 1;
  int iterations = 10;
  double gamma = 0.25;
  int k_min = 15;
  /// Half-thickness of the slab in front of each pad that captures points.
  double capture_slab = 0.006;
  double clearance = 0.005;
  double roll_jitter_deg = 10.0;
  double collision_margin = 0.002;
  /// Radius of the line probe used for the initial antipodal width.
  double probe_radius = 0.003;
  /// World up in the cloud frame; the default suits a camera looking down at a table.
  Eigen::Vector3d up = Eigen::Vector3d(0.0, 0.0, -1.0);

  void validate() const;
};

struct GraspCandidate {
  /// Gripper-to-cloud-frame transform.
  RigidTransform pose;
  double opening = 0.0;
  double energy = std::numeric_limits<double>::infinity();
  /// Captured points on the pad at +x and at -x.
  std::array<int, 2> contacts{0, 0};
  /// Energy before fitting and after every accepted iteration.
  std::vector<double> energy_history;
  /// Position in the sampled list; ranking tie-break.
  int index = 0;

  Eigen::Vector3d closing_axis() const { return pose.rotation.col(0); }
  Eigen::Vector3d center() const { return pose.translation; }
};

/// Throws DomainError for an empty cloud.
std::vector<GraspCandidate> sample_candidates(const PointCloudN& cloud, const GripperModel& gripper,
                                              const GraspConfig& config);

/// Energy of a fixed pose: mean over captured points of squared pad-plane distance plus
/// gamma * (1 + n_point . pad_normal)^2; +inf when a pad captures fewer than k_min points.
double grasp_energy(const GraspCandidate& candidate, const PointCloudN& cloud, const GripperModel& gripper,
                    const GraspConfig& config, std::array<int, 2>* contacts = nullptr);

/// Gauss-Newton over (shift along the closing axis, roll about the approach axis, opening)
/// with backtracking, so the recorded energy never increases.
GraspCandidate fit_surface(const GraspCandidate& candidate, const PointCloudN& cloud, const GripperModel& gripper,
                           const GraspConfig& config);

/// True when some point lies inside the swept finger volume or the palm box.
bool collision_check(const GraspCandidate& candidate, const PointCloudN& cloud, const GripperModel& gripper,
                     const GraspConfig& config);

struct GraspPlan {
  /// Collision-free finite-energy candidates, ascending energy, index tie-break.
  std::vector<GraspCandidate> ranked;
  std::size_t sampled = 0;

  bool found() const { return !ranked.empty(); }
  const GraspCandidate& best() const { return ranked.front(); }
};

GraspPlan plan_grasp(const PointCloudN& cloud, const GripperModel& gripper, const GraspConfig& config);

/// Unit mean normals of the points captured by the +x and -x pads (zero when none).
std::array<Eigen::Vector3d, 2> contact_normals(const GraspCandidate& candidate, const PointCloudN& cloud,
                                               const GripperModel& gripper, const GraspConfig& config);

nlohmann::json to_json(const GripperModel& gripper);
GripperModel gripper_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GraspPlan& plan);

}  // namespace rfgeo
