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

#include "rfgeo/raysim.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "rfgeo/errors.hpp"
#include "rfgeo/parallel.hpp"

namespace rfgeo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kMinT = 1e-9;
constexpr int kMaxInterfaces = 64;

/// Surface hit in object-local coordinates. `normal` points out of the glass.
struct LocalHit {
  double t = std::numeric_limits<double>::infinity();
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();

  void offer(double candidate, const Eigen::Vector3d& n) {
    if (candidate > kMinT && candidate < t) {
      t = candidate;
      normal = n;
    }
  }
  bool valid() const { return std::isfinite(t); }
};

/// Roots of |o + t d|^2 = r^2 restricted to the xy components when `planar`.
int quadric_roots(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r, bool planar,
                  std::array<double, 2>& roots) {
  double a, b, c;
  if (planar) {
    a = d.x() * d.x() + d.y() * d.y();
    b = 2.0 * (o.x() * d.x() + o.y() * d.y());
    c = o.x() * o.x() + o.y() * o.y() - r * r;
  } else {
    a = d.squaredNorm();
    b = 2.0 * o.dot(d);
    c = o.squaredNorm() - r * r;
  }
  if (a <= 0.0) return 0;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return 0;
  const double s = std::sqrt(disc);
  // Numerically stable pair of roots.
  const double q = -0.5 * (b + std::copysign(s, b));
  double t0 = q / a;
  double t1 = q != 0.0 ? c / q : t0;
  if (t0 > t1) std::swap(t0, t1);
  roots = {t0, t1};
  return 2;
}

void sphere_hits(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r, double sign, LocalHit& hit) {
  std::array<double, 2> roots{};
  if (quadric_roots(o, d, r, false, roots) == 0) return;
  for (double t : roots) hit.offer(t, sign * (o + t * d) / r);
}

void tube_hits(const Eigen::Vector3d& o, const Eigen::Vector3d& d, double r, double half_h, double sign,
               LocalHit& hit) {
  std::array<double, 2> roots{};
  if (quadric_roots(o, d, r, true, roots) == 0) return;
  for (double t : roots) {
    const Eigen::Vector3d p = o + t * d;
    if (std::abs(p.z()) <= half_h) hit.offer(t, sign * Eigen::Vector3d(p.x(), p.y(), 0.0) / r);
  }
}

LocalHit intersect_local(const Shape& shape, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  LocalHit hit;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SolidSphere>) {
          sphere_hits(o, d, s.radius, 1.0, hit);
        } else if constexpr (std::is_same_v<T, SphereShell>) {
          sphere_hits(o, d, s.outer_radius, 1.0, hit);
          sphere_hits(o, d, s.outer_radius - s.thickness, -1.0, hit);
        } else if constexpr (std::is_same_v<T, CylinderShell>) {
          const double half_h = 0.5 * s.height;
          const double r_in = s.radius - s.thickness;
          tube_hits(o, d, s.radius, half_h, 1.0, hit);
          tube_hits(o, d, r_in, half_h, -1.0, hit);
          if (d.z() != 0.0) {
            for (double zc : {half_h, -half_h}) {
              const double t = (zc - o.z()) / d.z();
              const Eigen::Vector3d p = o + t * d;
              const double rho2 = p.x() * p.x() + p.y() * p.y();
              if (rho2 >= r_in * r_in && rho2 <= s.radius * s.radius)
                hit.offer(t, Eigen::Vector3d(0.0, 0.0, zc > 0.0 ? 1.0 : -1.0));
            }
          }
        } else {
          const Eigen::Vector3d half(0.5 * s.extent_x, 0.5 * s.extent_y, 0.5 * s.thickness);
          for (int axis = 0; axis < 3; ++axis) {
            if (d[axis] == 0.0) continue;
            for (double sign : {1.0, -1.0}) {
              const double t = (sign * half[axis] - o[axis]) / d[axis];
              const Eigen::Vector3d p = o + t * d;
              const int a1 = (axis + 1) % 3;
              const int a2 = (axis + 2) % 3;
              if (std::abs(p[a1]) <= half[a1] && std::abs(p[a2]) <= half[a2])
                hit.offer(t, sign * Eigen::Vector3d::Unit(axis));
            }
          }
        }
      },
      shape);
  return hit;
}

Eigen::Vector2d pattern_coord(const Scene& scene, const Eigen::Vector3d& cam_point) {
  const Eigen::Vector2d px = project(scene.camera, cam_point);
  const PatternPlane& pl = scene.plane;
  return {(px.x() + 0.5) / pl.scale_px_per_unit + pl.offset_u, (px.y() + 0.5) / pl.scale_px_per_unit + pl.offset_v};
}

bool is_unit(const Eigen::Vector3d& v) { return std::abs(v.norm() - 1.0) <= 1e-9; }

}  // namespace

const char* to_string(RayStatus s) {
  switch (s) {
    case RayStatus::kBackgroundDirect:
      return "background_direct";
    case RayStatus::kBackgroundRefracted:
      return "background_refracted";
    case RayStatus::kTirLost:
      return "tir_lost";
    case RayStatus::kMiss:
      return "miss";
  }
  return "unknown";
}

void TransparentObject::validate() const {
  if (!(ior > 1.0)) throw DomainError("object ior must exceed 1");
  validate_rotation(pose.rotation);
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SolidSphere>) {
          if (!(s.radius > 0.0)) throw DomainError("sphere radius must be positive");
        } else if constexpr (std::is_same_v<T, SphereShell>) {
          if (!(s.outer_radius > 0.0) || !(s.thickness > 0.0) || !(s.thickness < s.outer_radius))
            throw DomainError("sphere shell needs 0 < thickness < outer radius");
        } else if constexpr (std::is_same_v<T, CylinderShell>) {
          if (!(s.radius > 0.0) || !(s.thickness > 0.0) || !(s.thickness < s.radius) || !(s.height > 0.0))
            throw DomainError("cylinder shell needs 0 < thickness < radius and positive height");
        } else {
          if (!(s.thickness > 0.0) || !(s.extent_x > 0.0) || !(s.extent_y > 0.0))
            throw DomainError("slab dimensions must be positive");
        }
      },
      shape);
}

double TransparentObject::bounding_radius() const {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SolidSphere>) {
          return s.radius;
        } else if constexpr (std::is_same_v<T, SphereShell>) {
          return s.outer_radius;
        } else if constexpr (std::is_same_v<T, CylinderShell>) {
          return std::hypot(s.radius, 0.5 * s.height);
        } else {
          return 0.5 * std::sqrt(s.extent_x * s.extent_x + s.extent_y * s.extent_y + s.thickness * s.thickness);
        }
      },
      shape);
}

double TransparentObject::support(const Eigen::Vector3d& dir) const {
  const Eigen::Vector3d local = pose.rotation.transpose() * dir;
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SolidSphere>) {
          return s.radius;
        } else if constexpr (std::is_same_v<T, SphereShell>) {
          return s.outer_radius;
        } else if constexpr (std::is_same_v<T, CylinderShell>) {
          return s.radius * std::hypot(local.x(), local.y()) + 0.5 * s.height * std::abs(local.z());
        } else {
          return 0.5 * (s.extent_x * std::abs(local.x()) + s.extent_y * std::abs(local.y()) +
                        s.thickness * std::abs(local.z()));
        }
      },
      shape);
}

void Scene::validate() const {
  if (!(plane.distance > 0.0)) throw DomainError("plane distance must be positive");
  if (!(plane.scale_px_per_unit > 0.0)) throw DomainError("pattern scale must be positive");
  plane.layout.validate();
  if (!(ior_air > 0.0)) throw DomainError("ior_air must be positive");
  for (const auto& obj : objects) {
    obj.validate();
    const Eigen::Vector3d c = camera.pose().apply_inverse(obj.pose.translation);
    if (!(c.z() - obj.support(camera.pose().rotation.col(2)) > 0.0))
      throw DomainError("objects must lie in front of the camera");
  }
}

std::optional<Eigen::Vector3d> refract_dir(const Eigen::Vector3d& incident, const Eigen::Vector3d& normal,
                                           double eta) {
  if (!is_unit(incident) || !is_unit(normal)) throw DomainError("refract_dir: inputs must be unit vectors");
  if (!(eta > 0.0)) throw DomainError("refract_dir: eta must be positive");
  const double cos_i = -normal.dot(incident);
  if (!(cos_i > 0.0)) throw DomainError("refract_dir: normal must face against the incident ray");
  const double sin2_t = eta * eta * std::max(0.0, 1.0 - cos_i * cos_i);
  if (sin2_t > 1.0) return std::nullopt;
  const double cos_t = std::sqrt(1.0 - sin2_t);
  return Eigen::Vector3d((eta * incident + (eta * cos_i - cos_t) * normal).normalized());
}

double fresnel_transmittance(double cos_incident, double cos_transmitted, double n1, double n2) {
  const double rs = (n1 * cos_incident - n2 * cos_transmitted) / (n1 * cos_incident + n2 * cos_transmitted);
  const double rp = (n1 * cos_transmitted - n2 * cos_incident) / (n1 * cos_transmitted + n2 * cos_incident);
  return 1.0 - 0.5 * (rs * rs + rp * rp);
}

TracePath trace_ray(const Scene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                    RayOutcome* outcome) {
  const RigidTransform& cam = scene.camera.pose();
  const Eigen::Vector3d plane_normal = cam.rotation.col(2);
  const Eigen::Vector3d plane_point = cam.apply(Eigen::Vector3d(0.0, 0.0, scene.plane.distance));

  TracePath path;
  path.vertices.push_back(origin);
  RayOutcome out;
  out.transmittance = 1.0;

  Eigen::Vector3d pos = origin;
  Eigen::Vector3d dir = direction.normalized();
  int medium = -1;  // -1 is air, otherwise an index into scene.objects
  bool first = true;

  for (;;) {
    LocalHit best;
    int best_obj = -1;
    for (int k = 0; k < static_cast<int>(scene.objects.size()); ++k) {
      if (medium >= 0 && k != medium) continue;
      const TransparentObject& obj = scene.objects[k];
      const Eigen::Vector3d o = obj.pose.apply_inverse(pos);
      const Eigen::Vector3d d = obj.pose.rotation.transpose() * dir;
      LocalHit h = intersect_local(obj.shape, o, d);
      if (h.valid() && h.t < best.t) {
        best = h;
        best_obj = k;
      }
    }

    const double facing = dir.dot(plane_normal);
    const double t_plane = facing > 0.0 ? (plane_point - pos).dot(plane_normal) / facing
                                        : std::numeric_limits<double>::infinity();
    if (std::isfinite(t_plane) && t_plane < best.t) {
      pos += t_plane * dir;
      path.vertices.push_back(pos);
      path.status = first ? RayStatus::kBackgroundDirect : RayStatus::kBackgroundRefracted;
      out.status = path.status;
      out.background_point = cam.apply_inverse(pos);
      out.background_pattern_coord = pattern_coord(scene, out.background_point);
      break;
    }
    if (best_obj < 0 || out.interfaces >= kMaxInterfaces) {
      path.status = RayStatus::kMiss;
      out.status = RayStatus::kMiss;
      out.transmittance = 0.0;
      break;
    }

    const TransparentObject& obj = scene.objects[best_obj];
    pos += best.t * dir;
    path.vertices.push_back(pos);
    const Eigen::Vector3d n_out = (obj.pose.rotation * best.normal).normalized();
    const bool entering = dir.dot(n_out) < 0.0;
    const Eigen::Vector3d n_face = entering ? n_out : Eigen::Vector3d(-n_out);
    const double n1 = entering ? scene.ior_air : obj.ior;
    const double n2 = entering ? obj.ior : scene.ior_air;
    const double cos_i = std::clamp(-dir.dot(n_face), 0.0, 1.0);

    if (first) {
      out.first_hit_depth = cam.apply_inverse(pos).z();
      out.first_hit_normal = cam.rotation.transpose() * n_out;
      out.first_hit_incidence_deg = std::acos(cos_i) * 180.0 / M_PI;
      first = false;
    }
    ++out.interfaces;

    const auto refracted = refract_dir(dir, n_face, n1 / n2);
    if (!refracted) {
      path.status = RayStatus::kTirLost;
      out.status = RayStatus::kTirLost;
      out.transmittance = 0.0;
      break;
    }
    out.transmittance *= fresnel_transmittance(cos_i, -refracted->dot(n_face), n1, n2);
    dir = *refracted;
    medium = entering ? best_obj : -1;
  }
  path.final_direction = dir;
  if (outcome) *outcome = out;
  return path;
}

RayOutcome trace_pixel(const Scene& scene, const Eigen::Vector2d& pixel) {
  const RigidTransform& cam = scene.camera.pose();
  const Eigen::Vector3d dir = cam.rotation * scene.camera.ray(pixel).normalized();
  RayOutcome out;
  trace_ray(scene, cam.translation, dir, &out);
  return out;
}

std::mt19937_64 pixel_rng(std::uint64_t seed, int x, int y) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)};
  return std::mt19937_64(seq);
}

double sensor_model(const RayOutcome& outcome, const SensorModel& sensor, std::mt19937_64& rng) {
  switch (outcome.status) {
    case RayStatus::kBackgroundDirect: {
      std::normal_distribution<double> noise(0.0, sensor.noise_sigma_m);
      return outcome.background_point.z() + noise(rng);
    }
    case RayStatus::kBackgroundRefracted: {
      if (outcome.first_hit_incidence_deg > sensor.grazing_deg) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng) < sensor.p_fail) return kNaN;
      }
      return outcome.background_point.z();
    }
    case RayStatus::kTirLost:
    case RayStatus::kMiss:
      return kNaN;
  }
  return kNaN;
}

namespace {

Mask morph(const Mask& mask, bool dilation) {
  Mask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      bool any = false;
      bool all = true;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const bool v = mask.contains(x + dx, y + dy) && mask(x + dx, y + dy);
          any = any || v;
          all = all && v;
        }
      out.set(x, y, dilation ? any : all);
    }
  return out;
}

}  // namespace

Mask dilate(const Mask& mask) { return morph(mask, true); }
Mask erode(const Mask& mask) { return morph(mask, false); }

Mask boundary_from_mask(const Mask& mask) {
  const Mask d = dilate(mask);
  const Mask e = erode(mask);
  Mask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) out.set(x, y, d(x, y) && !e(x, y));
  return out;
}

GeoChannels render_channels(const Scene& scene) {
  scene.validate();
  const Camera& cam = scene.camera;
  const int w = cam.width();
  const int h = cam.height();
  GeoChannels ch{Grid2(w, h, 1, kInvalid), Grid2(w, h, 3, kInvalid), Mask(w, h), Mask(w, h),
                 FlowField{Grid2(w, h, 2, kInvalid)}, Grid2(w, h, 1, kInvalid)};

  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector2d px(x, y);
      const RayOutcome r = trace_pixel(scene, px);
      if (r.hit_object()) {
        ch.mask.set(x, y, true);
        ch.gt_depth.at(x, y) = static_cast<float>(r.first_hit_depth);
        for (int c = 0; c < 3; ++c) ch.gt_normal.at(x, y, c) = static_cast<float>(r.first_hit_normal[c]);
      } else {
        ch.gt_depth.at(x, y) = static_cast<float>(scene.plane.distance);
      }
      if (r.status == RayStatus::kBackgroundRefracted) {
        const Eigen::Vector2d direct = project(cam, r.background_point);
        ch.gt_flow.grid.at(x, y, 0) = static_cast<float>(direct.x() - x);
        ch.gt_flow.grid.at(x, y, 1) = static_cast<float>(direct.y() - y);
      }
      auto rng = pixel_rng(scene.seed, x, y);
      ch.sensor_depth.at(x, y) = static_cast<float>(sensor_model(r, scene.sensor, rng));
    }
  });
  ch.boundary = boundary_from_mask(ch.mask);
  return ch;
}

std::vector<Grid2> render_capture(const Scene& scene, const PatternStack& stack) {
  scene.validate();
  const Camera& cam = scene.camera;
  const int w = cam.width();
  const int h = cam.height();
  const int nframes = static_cast<int>(stack.frames.size());
  std::vector<Grid2> frames(nframes, Grid2(w, h, 1, static_cast<float>(scene.ambient)));

  parallel_for(0, h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const RayOutcome r = trace_pixel(scene, Eigen::Vector2d(x, y));
      if (r.status != RayStatus::kBackgroundDirect && r.status != RayStatus::kBackgroundRefracted) continue;
      const double fu = std::floor(r.background_pattern_coord.x());
      const double fv = std::floor(r.background_pattern_coord.y());
      if (fu < 0.0 || fv < 0.0 || fu >= stack.layout.pattern_width || fv >= stack.layout.pattern_height) continue;
      const int u = static_cast<int>(fu);
      const int v = static_cast<int>(fv);
      for (int k = 0; k < nframes; ++k)
        frames[k].at(x, y) = static_cast<float>(scene.ambient + r.transmittance * stack.frames[k].at(u, v));
    }
  });
  return frames;
}

Scene reference_scene(const Scene& scene) {
  Scene ref = scene;
  ref.objects.clear();
  return ref;
}

nlohmann::json to_json(const TransparentObject& object) {
  nlohmann::json j;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SolidSphere>) {
          j["shape"] = "solid_sphere";
          j["params"] = {{"radius", s.radius}};
        } else if constexpr (std::is_same_v<T, SphereShell>) {
          j["shape"] = "sphere_shell";
          j["params"] = {{"outer_r", s.outer_radius}, {"thickness", s.thickness}};
        } else if constexpr (std::is_same_v<T, CylinderShell>) {
          j["shape"] = "cylinder_shell";
          j["params"] = {{"r", s.radius}, {"thickness", s.thickness}, {"height", s.height}};
        } else {
          j["shape"] = "slab";
          j["params"] = {{"thickness", s.thickness}, {"extent", {s.extent_x, s.extent_y}}};
        }
      },
      object.shape);
  j["pose"] = to_json(object.pose);
  j["ior"] = object.ior;
  return j;
}

TransparentObject object_from_json(const nlohmann::json& j) {
  TransparentObject obj;
  const std::string kind = j.at("shape").get<std::string>();
  const nlohmann::json& p = j.at("params");
  if (kind == "solid_sphere") {
    obj.shape = SolidSphere{p.at("radius").get<double>()};
  } else if (kind == "sphere_shell") {
    obj.shape = SphereShell{p.at("outer_r").get<double>(), p.at("thickness").get<double>()};
  } else if (kind == "cylinder_shell") {
    obj.shape = CylinderShell{p.at("r").get<double>(), p.at("thickness").get<double>(), p.at("height").get<double>()};
  } else if (kind == "slab") {
    Slab s;
    s.thickness = p.at("thickness").get<double>();
    const auto& e = p.at("extent");
    if (e.is_array()) {
      s.extent_x = e.at(0).get<double>();
      s.extent_y = e.at(1).get<double>();
    } else {
      s.extent_x = s.extent_y = e.get<double>();
    }
    obj.shape = s;
  } else {
    throw DomainError("unknown shape '" + kind + "'");
  }
  if (j.contains("pose")) obj.pose = transform_from_json(j.at("pose"));
  obj.ior = j.value("ior", 1.5);
  obj.validate();
  return obj;
}

nlohmann::json to_json(const Scene& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : scene.objects) objects.push_back(to_json(o));
  const PatternPlane& pl = scene.plane;
  return {{"camera", to_json(scene.camera)},
          {"plane",
           {{"distance_m", pl.distance},
            {"scale_px_per_unit", pl.scale_px_per_unit},
            {"pattern",
             {{"bits", pl.layout.bits},
              {"width", pl.layout.pattern_width},
              {"height", pl.layout.pattern_height},
              {"offset_u", pl.offset_u},
              {"offset_v", pl.offset_v}}}}},
          {"objects", objects},
          {"sensor",
           {{"p_fail", scene.sensor.p_fail},
            {"grazing_deg", scene.sensor.grazing_deg},
            {"noise_sigma_m", scene.sensor.noise_sigma_m}}},
          {"ambient", scene.ambient},
          {"ior_air", scene.ior_air},
          {"seed", scene.seed}};
}

Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  if (j.contains("camera")) s.camera = camera_from_json(j.at("camera"));
  if (j.contains("plane")) {
    const auto& p = j.at("plane");
    s.plane.distance = p.value("distance_m", s.plane.distance);
    s.plane.scale_px_per_unit = p.value("scale_px_per_unit", s.plane.scale_px_per_unit);
    if (p.contains("pattern")) {
      const auto& pat = p.at("pattern");
      s.plane.layout.bits = pat.value("bits", s.plane.layout.bits);
      s.plane.layout.pattern_width = pat.value("width", s.plane.layout.pattern_width);
      s.plane.layout.pattern_height = pat.value("height", s.plane.layout.pattern_height);
      s.plane.offset_u = pat.value("offset_u", 0.0);
      s.plane.offset_v = pat.value("offset_v", 0.0);
    }
  }
  if (j.contains("objects"))
    for (const auto& o : j.at("objects")) s.objects.push_back(object_from_json(o));
  if (j.contains("sensor")) {
    const auto& se = j.at("sensor");
    s.sensor.p_fail = se.value("p_fail", s.sensor.p_fail);
    s.sensor.grazing_deg = se.value("grazing_deg", s.sensor.grazing_deg);
    s.sensor.noise_sigma_m = se.value("noise_sigma_m", s.sensor.noise_sigma_m);
  }
  s.ambient = j.value("ambient", 0.0);
  s.ior_air = j.value("ior_air", 1.0);
  s.seed = j.value("seed", std::uint64_t{1});
  s.validate();
  return s;
}

}  // namespace rfgeo
