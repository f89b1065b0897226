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

#include "rfgeo/depthopt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rfgeo/errors.hpp"

namespace rfgeo {

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Accumulates squared linear residuals sqrt(weight) * (coeffs . x - target) into normal equations.
class NormalEquations {
 public:
  explicit NormalEquations(int n) : rhs_(Eigen::VectorXd::Zero(n)) {}

  void add(double weight, std::initializer_list<std::pair<int, double>> terms, double target) {
    if (weight == 0.0) return;
    for (const auto& [i, ci] : terms) {
      for (const auto& [j, cj] : terms) triplets_.emplace_back(i, j, weight * ci * cj);
      rhs_[i] += weight * ci * target;
    }
    constant_ += weight * target * target;
  }

  SparseSystem finish(int n, double regularization) {
    for (int i = 0; i < n; ++i) triplets_.emplace_back(i, i, regularization);
    SparseSystem s;
    s.matrix.resize(n, n);
    s.matrix.setFromTriplets(triplets_.begin(), triplets_.end());
    s.matrix.makeCompressed();
    s.rhs = rhs_;
    s.energy_constant = constant_;
    return s;
  }

 private:
  std::vector<Triplet> triplets_;
  Eigen::VectorXd rhs_;
  double constant_ = 0.0;
};

long double dot_ld(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return s;
}

/// Fixed-order sparse product with extended-precision row sums.
void spmv(const SpMat& m, const Eigen::VectorXd& x, Eigen::VectorXd& out) {
  out.resize(m.rows());
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    long double s = 0.0L;
    for (SpMat::InnerIterator it(m, r); it; ++it) s += static_cast<long double>(it.value()) * x[it.col()];
    out[r] = static_cast<double>(s);
  }
}

double objective(const SpMat& m, const Eigen::VectorXd& b, const Eigen::VectorXd& x) {
  long double s = 0.0L;
  for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
    long double row = 0.0L;
    for (SpMat::InnerIterator it(m, r); it; ++it) row += static_cast<long double>(it.value()) * x[it.col()];
    s += static_cast<long double>(x[r]) * (0.5L * row - b[r]);
  }
  return static_cast<double>(s);
}

}  // namespace

void EnergyWeights::validate() const {
  if (lambda_data < 0.0 || lambda_smooth < 0.0 || lambda_normal < 0.0)
    throw DomainError("energy weights must be non-negative");
  if (lambda_data == 0.0 && lambda_smooth == 0.0 && lambda_normal == 0.0)
    throw DomainError("at least one energy weight must be positive");
  if (!(boundary_atten >= 0.0 && boundary_atten <= 1.0)) throw DomainError("boundary_atten must lie in [0, 1]");
}

SparseSystem assemble_system(const Grid2& sensor_depth, const Mask& mask, const Mask& boundary,
                             const Grid2& normal_map, const Camera& camera, const EnergyWeights& weights,
                             const AssembleOptions& options) {
  weights.validate();
  const int w = mask.width();
  const int h = mask.height();
  if (sensor_depth.width() != w || sensor_depth.height() != h || boundary.width() != w || boundary.height() != h ||
      normal_map.width() != w || normal_map.height() != h || normal_map.channels() != 3)
    throw ShapeError("assemble_system: input grids must share the mask resolution");

  // Ring: pixels within `ring_width` (chessboard distance) of the mask.
  std::vector<int> dist(static_cast<std::size_t>(w) * h, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(x, y)) dist[y * w + x] = 0;
  for (int step = 1; step <= options.ring_width; ++step) {
    std::vector<int> next = dist;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (dist[y * w + x] >= 0) continue;
        for (int dy = -1; dy <= 1 && next[y * w + x] < 0; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx >= 0 && ny >= 0 && nx < w && ny < h && dist[ny * w + nx] == step - 1) {
              next[y * w + x] = step;
              break;
            }
          }
      }
    dist = std::move(next);
  }

  SparseSystem sys;
  sys.width = w;
  sys.height = h;
  sys.unknown_of.assign(static_cast<std::size_t>(w) * h, -1);
  std::vector<double> observed;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int d = dist[y * w + x];
      const bool in_mask = d == 0;
      const bool ring = d > 0 && std::isfinite(sensor_depth.at(x, y));
      if (!in_mask && !ring) continue;
      sys.unknown_of[y * w + x] = static_cast<int>(sys.pixel_of.size());
      sys.pixel_of.push_back(y * w + x);
      observed.push_back(ring ? sensor_depth.at(x, y) : std::numeric_limits<double>::quiet_NaN());
    }
  const int n = sys.size();
  sys.observed = Eigen::Map<Eigen::VectorXd>(observed.data(), n);

  NormalEquations eq(n);
  for (int u = 0; u < n; ++u)
    if (std::isfinite(observed[u])) eq.add(weights.lambda_data, {{u, 1.0}}, observed[u]);

  auto normal_at = [&](int x, int y, Eigen::Vector3d& nrm) {
    if (!mask(x, y) || !normal_map.finite_at(x, y)) return false;
    nrm = {normal_map.at(x, y, 0), normal_map.at(x, y, 1), normal_map.at(x, y, 2)};
    return true;
  };

  // Groups of unknowns joined by edges of positive weight; each needs an observation.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](int u) {
    while (parent[u] != u) u = parent[u] = parent[parent[u]];
    return u;
  };

  for (int u = 0; u < n; ++u) {
    const int px = sys.pixel_of[u] % w;
    const int py = sys.pixel_of[u] / w;
    // Right and down neighbours visit each undirected edge once.
    const int nb[2][2] = {{px + 1, py}, {px, py + 1}};
    for (const auto& q : nb) {
      if (q[0] >= w || q[1] >= h) continue;
      const int v = sys.unknown_of[q[1] * w + q[0]];
      if (v < 0) continue;
      const double wpq = (boundary(px, py) || boundary(q[0], q[1])) ? weights.boundary_atten : 1.0;
      eq.add(weights.lambda_smooth * wpq, {{u, 1.0}, {v, -1.0}}, 0.0);

      const Eigen::Vector3d ru = camera.ray({px, py});
      const Eigen::Vector3d rv = camera.ray({q[0], q[1]});
      Eigen::Vector3d nrm;
      // n . (D_v r_v - D_u r_u) = 0, linear in the z-depths.
      if (normal_at(px, py, nrm)) eq.add(weights.lambda_normal * wpq, {{v, nrm.dot(rv)}, {u, -nrm.dot(ru)}}, 0.0);
      const bool has_normal = normal_at(q[0], q[1], nrm);
      if (has_normal) eq.add(weights.lambda_normal * wpq, {{v, nrm.dot(rv)}, {u, -nrm.dot(ru)}}, 0.0);

      const bool normal_term = weights.lambda_normal > 0.0 && (has_normal || normal_at(px, py, nrm));
      if (wpq > 0.0 && (weights.lambda_smooth > 0.0 || normal_term)) parent[root(u)] = root(v);
    }
  }

  std::vector<char> anchored(n, 0);
  for (int u = 0; u < n; ++u)
    if (std::isfinite(observed[u])) anchored[root(u)] = 1;
  for (int u = 0; u < n; ++u)
    if (!anchored[root(u)])
      throw UnderConstrainedError("assemble_system: masked region has no observed depth anchoring it");

  SparseSystem built = eq.finish(n, options.regularization);
  sys.matrix = std::move(built.matrix);
  sys.rhs = std::move(built.rhs);
  sys.energy_constant = built.energy_constant;
  return sys;
}

CgResult solve_cg(const SparseSystem& system, const Eigen::VectorXd& init, double tol, int max_iter) {
  return solve_cg(system.matrix, system.rhs, init, tol, max_iter);
}

CgResult solve_cg(const SpMat& a, const Eigen::VectorXd& b, const Eigen::VectorXd& init, double tol, int max_iter) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n || init.size() != n) throw ShapeError("solve_cg: dimension mismatch");

  Eigen::VectorXd inv_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = a.coeff(i, i);
    if (!(d > 0.0)) throw NumericError("solve_cg: non-positive diagonal entry", 0);
    inv_diag[i] = 1.0 / d;
  }

  CgResult res;
  res.x = init;
  Eigen::VectorXd ax;
  spmv(a, res.x, ax);
  // r_true tracks b - Ax exactly; r is the usual recurrence that drives the directions.
  Eigen::VectorXd r_true = b - ax;
  Eigen::VectorXd r = r_true;
  const double b_norm = std::sqrt(static_cast<double>(dot_ld(b, b)));
  const double scale = b_norm > 0.0 ? b_norm : 1.0;
  // Energies are accumulated from per-step differences. A direct evaluation of
  // 0.5 x'Ax - b'x cancels too much to resolve the last steps of a converging solve.
  long double energy = objective(a, b, res.x);
  res.energies.push_back(static_cast<double>(energy));
  res.relative_residual = std::sqrt(static_cast<double>(dot_ld(r_true, r_true))) / scale;
  if (!std::isfinite(res.relative_residual) || !std::isfinite(res.energies.back()))
    throw NumericError("solve_cg: non-finite initial residual", 0);
  if (res.relative_residual <= tol) {
    res.converged = true;
    return res;
  }

  Eigen::VectorXd z = inv_diag.cwiseProduct(r);
  Eigen::VectorXd p = z;
  long double rz = dot_ld(r, z);
  Eigen::VectorXd ap;
  bool restarted = false;
  for (int k = 1; k <= max_iter; ++k) {
    spmv(a, p, ap);
    const long double pap = dot_ld(p, ap);
    if (!(pap > 0.0L) || !std::isfinite(static_cast<double>(pap)))
      throw NumericError("solve_cg: curvature along search direction is not positive", k);
    const long double alpha = rz / pap;
    // E(x + alpha p) - E(x) = -alpha p'(b - Ax) + alpha^2 p'Ap / 2
    const long double delta = -alpha * dot_ld(p, r_true) + 0.5L * alpha * alpha * pap;
    res.iterations = k;
    if (!std::isfinite(static_cast<double>(delta))) throw NumericError("solve_cg: non-finite step", k);
    if (delta > 0.0L) {
      // The recurrence has drifted from b - Ax. Restart from the true residual once; a
      // second rise in a row means rounding dominates and the current iterate is kept.
      if (restarted) break;
      restarted = true;
      r = r_true;
      z = inv_diag.cwiseProduct(r);
      p = z;
      rz = dot_ld(r, z);
      continue;
    }
    restarted = false;
    res.x += static_cast<double>(alpha) * p;
    r -= static_cast<double>(alpha) * ap;
    spmv(a, res.x, ax);
    r_true = b - ax;
    energy += delta;
    res.relative_residual = std::sqrt(static_cast<double>(dot_ld(r_true, r_true))) / scale;
    if (!std::isfinite(res.relative_residual) || !res.x.allFinite())
      throw NumericError("solve_cg: non-finite iterate", k);
    res.energies.push_back(static_cast<double>(energy));
    if (res.relative_residual <= tol) {
      res.converged = true;
      break;
    }
    z = inv_diag.cwiseProduct(r);
    const long double rz_next = dot_ld(r, z);
    const double beta = static_cast<double>(rz_next / rz);
    rz = rz_next;
    p = z + beta * p;
  }
  return res;
}

RefineResult refine_depth(const Grid2& sensor_depth, const Mask& mask, const Mask& boundary,
                          const Grid2& normal_map, const Camera& camera, const EnergyWeights& weights,
                          const RefineOptions& options) {
  const SparseSystem sys =
      assemble_system(sensor_depth, mask, boundary, normal_map, camera, weights, options.assemble);

  // Start masked unknowns at the median anchor depth.
  std::vector<double> anchors;
  for (int u = 0; u < sys.size(); ++u)
    if (std::isfinite(sys.observed[u])) anchors.push_back(sys.observed[u]);
  std::nth_element(anchors.begin(), anchors.begin() + anchors.size() / 2, anchors.end());
  const double start = anchors[anchors.size() / 2];
  Eigen::VectorXd init(sys.size());
  for (int u = 0; u < sys.size(); ++u) init[u] = std::isfinite(sys.observed[u]) ? sys.observed[u] : start;

  if (options.passes < 1) throw DomainError("refine_depth: passes must be at least 1");
  RefineResult out{sensor_depth, solve_cg(sys, init, options.tol, options.max_iter)};
  for (int pass = 1; pass < options.passes; ++pass) {
    CgResult next = solve_cg(sys, out.solve.x, options.tol, options.max_iter);
    next.iterations += out.solve.iterations;
    next.energies.insert(next.energies.begin(), out.solve.energies.begin(), out.solve.energies.end() - 1);
    out.solve = std::move(next);
  }
  for (int u = 0; u < sys.size(); ++u) {
    const int x = sys.pixel_of[u] % sys.width;
    const int y = sys.pixel_of[u] / sys.width;
    if (mask(x, y)) out.depth.at(x, y) = static_cast<float>(out.solve.x[u]);
  }
  return out;
}

PointCloudN depth_to_pointcloud(const Grid2& depth, const Grid2& normal_map, const Mask& mask, const Camera& camera) {
  const int w = mask.width();
  const int h = mask.height();
  if (depth.width() != w || depth.height() != h || normal_map.width() != w || normal_map.height() != h ||
      normal_map.channels() != 3)
    throw ShapeError("depth_to_pointcloud: input grids must share the mask resolution");

  std::vector<int> index(static_cast<std::size_t>(w) * h, -1);
  PointCloudN cloud;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = depth.at(x, y);
      if (!mask(x, y) || !(d > 0.0) || !std::isfinite(d) || !normal_map.finite_at(x, y)) continue;
      const Eigen::Vector3d n(normal_map.at(x, y, 0), normal_map.at(x, y, 1), normal_map.at(x, y, 2));
      if (n.norm() == 0.0) continue;
      index[y * w + x] = static_cast<int>(cloud.points.size());
      cloud.points.push_back(backproject(camera, {x, y}, d));
      cloud.normals.push_back(n.normalized());
      cloud.pixels.emplace_back(x, y);
    }
  if (cloud.empty()) throw DomainError("depth_to_pointcloud: mask yields no valid points");

  cloud.labels.assign(cloud.size(), -1);
  std::vector<int> stack;
  for (std::size_t s = 0; s < cloud.size(); ++s) {
    if (cloud.labels[s] >= 0) continue;
    const int label = cloud.component_count++;
    cloud.labels[s] = label;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      const Eigen::Vector2i p = cloud.pixels[stack.back()];
      stack.pop_back();
      const int nb[4][2] = {{p.x() + 1, p.y()}, {p.x() - 1, p.y()}, {p.x(), p.y() + 1}, {p.x(), p.y() - 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const int j = index[q[1] * w + q[0]];
        if (j >= 0 && cloud.labels[j] < 0) {
          cloud.labels[j] = label;
          stack.push_back(j);
        }
      }
    }
  }
  return cloud;
}

PointCloudN largest_component(const PointCloudN& cloud) {
  if (cloud.empty()) return cloud;
  std::vector<std::size_t> counts(cloud.component_count, 0);
  for (int l : cloud.labels) ++counts[l];
  const int keep = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  PointCloudN out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels[i] != keep) continue;
    out.points.push_back(cloud.points[i]);
    out.normals.push_back(cloud.normals[i]);
    if (i < cloud.pixels.size()) out.pixels.push_back(cloud.pixels[i]);
    out.labels.push_back(0);
  }
  out.component_count = 1;
  return out;
}

void write_pointcloud(const std::filesystem::path& path, const PointCloudN& cloud) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  char line[512];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const auto& n = cloud.normals[i];
    std::snprintf(line, sizeof(line), "%.17g %.17g %.17g %.17g %.17g %.17g %d\n", p.x(), p.y(), p.z(), n.x(), n.y(),
                  n.z(), cloud.labels.empty() ? 0 : cloud.labels[i]);
    f << line;
  }
}

PointCloudN read_pointcloud(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path.string());
  PointCloudN cloud;
  std::string line;
  std::size_t offset = 0;
  int max_label = -1;
  while (std::getline(f, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream in(line);
    Eigen::Vector3d p, n;
    int label = 0;
    if (!(in >> p.x() >> p.y() >> p.z() >> n.x() >> n.y() >> n.z())) throw FormatError("bad point cloud line", line_start);
    if (!(in >> label)) label = 0;
    cloud.points.push_back(p);
    cloud.normals.push_back(n);
    cloud.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  cloud.component_count = max_label + 1;
  return cloud;
}

}  // namespace rfgeo
