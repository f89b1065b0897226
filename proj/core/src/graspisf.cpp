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

#include "rfgeo/graspisf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "rfgeo/errors.hpp"
#include "rfgeo/parallel.hpp"

namespace rfgeo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Matrix3d frame_from(const Eigen::Vector3d& closing, const Eigen::Vector3d& up) {
  Eigen::Matrix3d r;
  r.col(0) = closing;
  r.col(2) = up;
  r.col(1) = up.cross(closing);
  return r;
}

Eigen::Vector3d horizontal(const Eigen::Vector3d& v, const Eigen::Vector3d& up) { return v - v.dot(up) * up; }

/// Points captured by pad `side` (0: +x, 1: -x) expressed in the gripper frame.
template <typename Fn>
void for_each_captured(const GraspCandidate& c, const PointCloudN& cloud, const GripperModel& g,
                       const GraspConfig& cfg, Fn&& fn) {
  const Eigen::Matrix3d rt = c.pose.rotation.transpose();
  const double hw = 0.5 * g.pad_width;
  const double hh = 0.5 * g.pad_height;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d q = rt * (cloud.points[i] - c.pose.translation);
    if (std::abs(q.y()) > hw || std::abs(q.z()) > hh) continue;
    for (int side = 0; side < 2; ++side) {
      const double s = side == 0 ? 1.0 : -1.0;
      if (std::abs(q.x() - s * 0.5 * c.opening) <= cfg.capture_slab) fn(side, s, q, rt * cloud.normals[i]);
    }
  }
}

}  // namespace

void GripperModel::validate() const {
  if (!(pad_width > 0.0 && pad_height > 0.0)) throw DomainError("gripper pad dimensions must be positive");
  if (!(min_open >= 0.0 && min_open < max_open)) throw DomainError("gripper needs 0 <= min_open < max_open");
  if (!(finger_thickness > 0.0 && finger_length > 0.5 * pad_height))
    throw DomainError("gripper fingers must be thicker than 0 and longer than half a pad");
  if (!(palm_width > 0.0 && palm_depth > 0.0 && palm_height > 0.0)) throw DomainError("palm dimensions must be positive");
}

void GraspConfig::validate() const {
  if (n_candidates < 0 || iterations < 0 || k_min < 1) throw DomainError("grasp config counts out of range");
  if (!(gamma >= 0.0 && capture_slab > 0.0 && clearance >= 0.0 && collision_margin >= 0.0 && probe_radius > 0.0))
    throw DomainError("grasp config distances out of range");
  if (std::abs(up.norm() - 1.0) > 1e-9) throw DomainError("grasp up vector must be unit");
}

std::vector<GraspCandidate> sample_candidates(const PointCloudN& cloud, const GripperModel& gripper,
                                              const GraspConfig& config) {
  gripper.validate();
  config.validate();
  if (cloud.empty()) throw DomainError("sample_candidates: empty point cloud");
  const Eigen::Vector3d& up = config.up;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, cloud.size() - 1);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double jitter = config.roll_jitter_deg * M_PI / 180.0;

  std::vector<GraspCandidate> out;
  out.reserve(config.n_candidates);
  for (int k = 0; k < config.n_candidates; ++k) {
    const std::size_t i = pick(rng);
    const double roll = jitter * unit(rng);
    const double fallback_angle = M_PI * unit(rng);
    const Eigen::Vector3d& p = cloud.points[i];

    Eigen::Vector3d x = horizontal(cloud.normals[i], up);
    if (x.norm() < 0.2) x = horizontal(p - centroid, up);
    if (x.norm() < 1e-9) {
      // Any horizontal direction will do.
      Eigen::Vector3d a = std::abs(up.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
      a = horizontal(a, up).normalized();
      x = std::cos(fallback_angle) * a + std::sin(fallback_angle) * up.cross(a);
    }
    x.normalize();
    const Eigen::Vector3d y0 = up.cross(x);
    x = (std::cos(roll) * x + std::sin(roll) * y0).normalized();

    // Antipodal width: farthest point behind p along -x within the probe radius.
    double width = 0.0;
    for (const auto& q : cloud.points) {
      const Eigen::Vector3d d = q - p;
      const double t = -d.dot(x);
      if (t <= width) continue;
      if ((d + t * x).norm() <= config.probe_radius) width = t;
    }

    GraspCandidate c;
    c.index = k;
    c.opening = std::clamp(width + config.clearance, gripper.min_open, gripper.max_open);
    c.pose = RigidTransform(frame_from(x, up), p - 0.5 * width * x);
    out.push_back(std::move(c));
  }
  return out;
}

double grasp_energy(const GraspCandidate& candidate, const PointCloudN& cloud, const GripperModel& gripper,
                    const GraspConfig& config, std::array<int, 2>* contacts) {
  std::array<int, 2> count{0, 0};
  double sum = 0.0;
  for_each_captured(candidate, cloud, gripper, config,
                    [&](int side, double s, const Eigen::Vector3d& q, const Eigen::Vector3d& n) {
                      const double d = q.x() - s * 0.5 * candidate.opening;
                      const double a = 1.0 - s * n.x();
                      sum += d * d + config.gamma * a * a;
                      ++count[side];
                    });
  if (contacts) *contacts = count;
  if (count[0] < config.k_min || count[1] < config.k_min) return kInf;
  return sum / static_cast<double>(count[0] + count[1]);
}

namespace {

GraspCandidate apply_step(const GraspCandidate& c, const Eigen::Vector3d& step, const GripperModel& g) {
  GraspCandidate out = c;
  const Eigen::Vector3d x = c.pose.rotation.col(0);
  const Eigen::Vector3d y = c.pose.rotation.col(1);
  const Eigen::Vector3d z = c.pose.rotation.col(2);
  const double psi = step[1];
  const Eigen::Vector3d x_new = (std::cos(psi) * x + std::sin(psi) * y).normalized();
  out.pose = RigidTransform(frame_from(x_new, z), c.pose.translation + step[0] * x);
  out.opening = std::clamp(c.opening + step[2], g.min_open, g.max_open);
  return out;
}

}  // namespace

GraspCandidate fit_surface(const GraspCandidate& candidate, const PointCloudN& cloud, const GripperModel& gripper,
                           const GraspConfig& config) {
  GraspCandidate best = candidate;
  best.energy = grasp_energy(best, cloud, gripper, config, &best.contacts);
  best.energy_history = {best.energy};
  if (!std::isfinite(best.energy)) return best;

  const double sg = std::sqrt(config.gamma);
  for (int it = 0; it < config.iterations; ++it) {
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jtr = Eigen::Vector3d::Zero();
    for_each_captured(best, cloud, gripper, config,
                      [&](int, double s, const Eigen::Vector3d& q, const Eigen::Vector3d& n) {
                        // Parameters: shift along x, roll about z, opening.
                        const Eigen::Vector3d jd(-1.0, q.y(), -0.5 * s);
                        const double rd = q.x() - s * 0.5 * best.opening;
                        const Eigen::Vector3d jn(0.0, -s * sg * n.y(), 0.0);
                        const double rn = sg * (1.0 - s * n.x());
                        jtj += jd * jd.transpose() + jn * jn.transpose();
                        jtr += jd * rd + jn * rn;
                      });
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(jtj);
    const Eigen::Vector3d ev = eig.eigenvalues();
    if (!(ev[2] > 0.0) || ev[0] <= 1e-12 * ev[2]) break;  // rank deficient
    const Eigen::Vector3d step = -jtj.ldlt().solve(jtr);
    if (!step.allFinite() || step.norm() < 1e-15) break;

    bool accepted = false;
    double scale = 1.0;
    for (int ls = 0; ls < 12 && !accepted; ++ls, scale *= 0.5) {
      GraspCandidate trial = apply_step(best, scale * step, gripper);
      trial.energy = grasp_energy(trial, cloud, gripper, config, &trial.contacts);
      if (trial.energy <= best.energy) {
        trial.energy_history = std::move(best.energy_history);
        trial.energy_history.push_back(trial.energy);
        best = std::move(trial);
        accepted = true;
      }
    }
    if (!accepted) break;
  }
  return best;
}

bool collision_check(const GraspCandidate& candidate, const PointCloudN& cloud, const GripperModel& gripper,
                     const GraspConfig& config) {
  const double m = config.collision_margin;
  const Eigen::Matrix3d rt = candidate.pose.rotation.transpose();
  const double z_pad_bottom = -0.5 * gripper.pad_height;
  const double z_palm = z_pad_bottom + gripper.finger_length;
  for (const auto& p : cloud.points) {
    const Eigen::Vector3d q = rt * (p - candidate.pose.translation);
    // Fingers sweep from full opening down to the pads; points within the margin of the
    // pad face count as contact.
    const double ax = std::abs(q.x());
    if (ax >= 0.5 * candidate.opening + m && ax <= 0.5 * gripper.max_open + gripper.finger_thickness + m &&
        std::abs(q.y()) <= 0.5 * gripper.pad_width + m && q.z() >= z_pad_bottom - m && q.z() <= z_palm + m)
      return true;
    if (ax <= 0.5 * gripper.palm_width + m && std::abs(q.y()) <= 0.5 * gripper.palm_depth + m &&
        q.z() >= z_palm - m && q.z() <= z_palm + gripper.palm_height + m)
      return true;
  }
  return false;
}

GraspPlan plan_grasp(const PointCloudN& cloud, const GripperModel& gripper, const GraspConfig& config) {
  GraspPlan plan;
  const std::vector<GraspCandidate> sampled = sample_candidates(cloud, gripper, config);
  plan.sampled = sampled.size();
  std::vector<GraspCandidate> fitted(sampled.size());
  std::vector<char> keep(sampled.size(), 0);
  parallel_for(0, static_cast<int>(sampled.size()), [&](int i) {
    fitted[i] = fit_surface(sampled[i], cloud, gripper, config);
    keep[i] = std::isfinite(fitted[i].energy) && !collision_check(fitted[i], cloud, gripper, config);
  });
  for (std::size_t i = 0; i < fitted.size(); ++i)
    if (keep[i]) plan.ranked.push_back(std::move(fitted[i]));
  std::stable_sort(plan.ranked.begin(), plan.ranked.end(), [](const GraspCandidate& a, const GraspCandidate& b) {
    return a.energy < b.energy || (a.energy == b.energy && a.index < b.index);
  });
  return plan;
}

std::array<Eigen::Vector3d, 2> contact_normals(const GraspCandidate& candidate, const PointCloudN& cloud,
                                               const GripperModel& gripper, const GraspConfig& config) {
  std::array<Eigen::Vector3d, 2> sum{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
  for_each_captured(candidate, cloud, gripper, config,
                    [&](int side, double, const Eigen::Vector3d&, const Eigen::Vector3d& n) { sum[side] += n; });
  for (auto& s : sum) {
    if (s.norm() > 0.0) s = candidate.pose.rotation * s.normalized();
  }
  return sum;
}

nlohmann::json to_json(const GripperModel& g) {
  return {{"pad_width", g.pad_width},
          {"pad_height", g.pad_height},
          {"min_open", g.min_open},
          {"max_open", g.max_open},
          {"finger_thickness", g.finger_thickness},
          {"finger_length", g.finger_length},
          {"palm", {{"width", g.palm_width}, {"depth", g.palm_depth}, {"height", g.palm_height}}}};
}

GripperModel gripper_from_json(const nlohmann::json& j) {
  GripperModel g;
  try {
    g.pad_width = j.value("pad_width", g.pad_width);
    g.pad_height = j.value("pad_height", g.pad_height);
    g.min_open = j.value("min_open", g.min_open);
    g.max_open = j.value("max_open", g.max_open);
    g.finger_thickness = j.value("finger_thickness", g.finger_thickness);
    g.finger_length = j.value("finger_length", g.finger_length);
    if (j.contains("palm")) {
      const auto& p = j.at("palm");
      g.palm_width = p.value("width", g.palm_width);
      g.palm_depth = p.value("depth", g.palm_depth);
      g.palm_height = p.value("height", g.palm_height);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("bad gripper description: ") + e.what());
  }
  g.validate();
  return g;
}

nlohmann::json to_json(const GraspPlan& plan) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : plan.ranked) {
    const Eigen::Matrix4d m = c.pose.matrix();
    std::vector<double> rows;
    for (int r = 0; r < 4; ++r)
      for (int k = 0; k < 4; ++k) rows.push_back(m(r, k));
    list.push_back({{"index", c.index},
                    {"pose", rows},
                    {"opening", c.opening},
                    {"energy", c.energy},
                    {"contacts", {c.contacts[0], c.contacts[1]}}});
  }
  return {{"sampled", plan.sampled}, {"no_grasp", !plan.found()}, {"grasps", list}};
}

}  // namespace rfgeo
