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

#include "rfgeo/flowcodec.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include "rfgeo/errors.hpp"
#include "rfgeo/parallel.hpp"

namespace rfgeo {

namespace {

void check_bits(int bits) {
  if (bits < 1 || bits > 24) throw DomainError("gray code bits must be in [1, 24]");
}

/// m ~= A q + c
struct Affine2 {
  Eigen::Matrix2d a;
  Eigen::Vector2d c;

  std::optional<Eigen::Vector2d> invert(const Eigen::Vector2d& m) const {
    if (std::abs(a.determinant()) < 1e-9) return std::nullopt;
    return Eigen::Vector2d(a.inverse() * (m - c));
  }
};

/// Least-squares affine fit of reference correspondences over [x0,x1]x[y0,y1].
std::optional<Affine2> fit_affine(const Grid2& ref, int x0, int y0, int x1, int y1) {
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, ref.width() - 1);
  y1 = std::min(y1, ref.height() - 1);
  // Centered coordinates keep the normal equations well conditioned.
  const double ox = 0.5 * (x0 + x1);
  const double oy = 0.5 * (y0 + y1);
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Matrix<double, 3, 2> atb = Eigen::Matrix<double, 3, 2>::Zero();
  int n = 0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      if (!ref.finite_at(x, y)) continue;
      const Eigen::Vector3d row(x - ox, y - oy, 1.0);
      ata += row * row.transpose();
      atb.col(0) += row * ref.at(x, y, 0);
      atb.col(1) += row * ref.at(x, y, 1);
      ++n;
    }
  if (n < 3) return std::nullopt;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(ata);
  if (lu.rank() < 3) return std::nullopt;
  const Eigen::Matrix<double, 3, 2> sol = lu.solve(atb);
  Affine2 fit;
  fit.a << sol(0, 0), sol(1, 0), sol(0, 1), sol(1, 1);
  fit.c = Eigen::Vector2d(sol(2, 0), sol(2, 1)) - fit.a * Eigen::Vector2d(ox, oy);
  return fit;
}

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%03d.rfg", i);
  return buf;
}

}  // namespace

std::uint32_t gray_encode(std::uint32_t n, int bits) {
  check_bits(bits);
  if (n >= (1u << bits)) throw DomainError("gray_encode: value out of range for bit count");
  return n ^ (n >> 1);
}

std::uint32_t gray_decode(std::uint32_t code, int bits) {
  check_bits(bits);
  if (code >= (1u << bits)) throw DomainError("gray_decode: code out of range for bit count");
  std::uint32_t n = code;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) n ^= n >> shift;
  return n;
}

void PatternLayout::validate() const {
  check_bits(bits);
  const long long limit = 1LL << bits;
  if (pattern_width < 1 || pattern_height < 1 || pattern_width > limit || pattern_height > limit)
    throw DomainError("pattern dimensions must lie in [1, 2^bits]");
}

PatternStack gen_patterns(int bits, int pattern_width, int pattern_height) {
  PatternStack stack;
  stack.layout = {bits, pattern_width, pattern_height};
  stack.layout.validate();
  stack.frames.reserve(stack.layout.frame_count());
  for (int k = 0; k < bits; ++k) {
    Grid2 frame(pattern_width, pattern_height, 1);
    const int bit = bits - 1 - k;
    for (int y = 0; y < pattern_height; ++y)
      for (int u = 0; u < pattern_width; ++u)
        frame.at(u, y) = static_cast<float>((gray_encode(u, bits) >> bit) & 1u);
    stack.frames.push_back(std::move(frame));
  }
  for (int k = 0; k < bits; ++k) {
    Grid2 frame(pattern_width, pattern_height, 1);
    const int bit = bits - 1 - k;
    for (int v = 0; v < pattern_height; ++v)
      for (int x = 0; x < pattern_width; ++x)
        frame.at(x, v) = static_cast<float>((gray_encode(v, bits) >> bit) & 1u);
    stack.frames.push_back(std::move(frame));
  }
  stack.frames.emplace_back(pattern_width, pattern_height, 1, 1.0f);
  stack.frames.emplace_back(pattern_width, pattern_height, 1, 0.0f);
  return stack;
}

CorrespondenceMap decode_stack(std::span<const Grid2> captured, const PatternLayout& layout,
                               const DecodeOptions& options) {
  layout.validate();
  if (static_cast<int>(captured.size()) != layout.frame_count())
    throw ShapeError("decode_stack: expected " + std::to_string(layout.frame_count()) + " frames, got " +
                     std::to_string(captured.size()));
  const Grid2& first = captured.front();
  for (const Grid2& f : captured)
    if (!f.same_size(first) || f.channels() != 1)
      throw ShapeError("decode_stack: captured frames must share one single-channel resolution");

  CorrespondenceMap out{Grid2(first.width(), first.height(), 2, kInvalid), layout.pattern_width,
                        layout.pattern_height};
  const Grid2& white = captured[layout.white_index()];
  const Grid2& black = captured[layout.black_index()];
  const int bits = layout.bits;

  // Full scale is the strongest white-black swing in the stack, so a global gain leaves
  // the accepted pixel set unchanged.
  double full_scale = 0.0;
  for (int y = 0; y < first.height(); ++y)
    for (int x = 0; x < first.width(); ++x)
      full_scale = std::max(full_scale, static_cast<double>(white.at(x, y)) - black.at(x, y));
  const double min_contrast = options.min_contrast * full_scale;

  parallel_for(0, first.height(), [&](int y) {
    for (int x = 0; x < first.width(); ++x) {
      const double w = white.at(x, y);
      const double k = black.at(x, y);
      if (!(w - k >= min_contrast) || !(w - k > 0.0)) continue;
      // I > (w + k) / 2, evaluated without the division.
      const double twice_threshold = w + k;
      std::uint32_t gu = 0;
      std::uint32_t gv = 0;
      for (int i = 0; i < bits; ++i) {
        gu = (gu << 1) | (2.0 * captured[i].at(x, y) > twice_threshold ? 1u : 0u);
        gv = (gv << 1) | (2.0 * captured[bits + i].at(x, y) > twice_threshold ? 1u : 0u);
      }
      const std::uint32_t u = gray_decode(gu, bits);
      const std::uint32_t v = gray_decode(gv, bits);
      if (u >= static_cast<std::uint32_t>(layout.pattern_width) ||
          v >= static_cast<std::uint32_t>(layout.pattern_height))
        continue;
      out.grid.at(x, y, 0) = static_cast<float>(u);
      out.grid.at(x, y, 1) = static_cast<float>(v);
    }
  });
  return out;
}

FlowField flow_from_correspondence(const CorrespondenceMap& object, const CorrespondenceMap& reference,
                                   const Mask& mask, const FlowOptions& options) {
  const Grid2& obj = object.grid;
  const Grid2& ref = reference.grid;
  if (!obj.same_shape(ref) || obj.channels() != 2 || mask.width() != obj.width() || mask.height() != obj.height())
    throw ShapeError("flow_from_correspondence: maps and mask must share one resolution");

  FlowField flow{Grid2(obj.width(), obj.height(), 2, kInvalid)};
  const auto global = fit_affine(ref, 0, 0, ref.width() - 1, ref.height() - 1);
  if (!global) return flow;

  const int half = options.fit_window / 2;
  const int r = options.search_radius;
  parallel_for(0, obj.height(), [&](int y) {
    for (int x = 0; x < obj.width(); ++x) {
      if (!mask(x, y) || !obj.finite_at(x, y)) continue;
      const Eigen::Vector2d m(obj.at(x, y, 0), obj.at(x, y, 1));
      const auto guess = global->invert(m);
      if (!guess) continue;
      const int gx = std::clamp(static_cast<int>(std::lround(guess->x())), 0, ref.width() - 1);
      const int gy = std::clamp(static_cast<int>(std::lround(guess->y())), 0, ref.height() - 1);

      int bx = -1;
      int by = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int qy = gy - r; qy <= gy + r; ++qy)
        for (int qx = gx - r; qx <= gx + r; ++qx) {
          if (!ref.contains(qx, qy) || !ref.finite_at(qx, qy)) continue;
          const double du = ref.at(qx, qy, 0) - m.x();
          const double dv = ref.at(qx, qy, 1) - m.y();
          const double d = du * du + dv * dv;
          if (d < best) {
            best = d;
            bx = qx;
            by = qy;
          }
        }
      if (bx < 0) continue;

      const auto local = fit_affine(ref, bx - half, by - half, bx + half, by + half);
      if (!local) continue;
      const auto q = local->invert(m);
      if (!q) continue;
      flow.grid.at(x, y, 0) = static_cast<float>(q->x() - x);
      flow.grid.at(x, y, 1) = static_cast<float>(q->y() - y);
    }
  });
  return flow;
}

void write_stack(const std::filesystem::path& dir, std::span<const Grid2> frames, const PatternLayout& layout) {
  layout.validate();
  if (static_cast<int>(frames.size()) != layout.frame_count())
    throw ShapeError("write_stack: frame count does not match layout");
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < frames.size(); ++i) write_grid(dir / frame_name(static_cast<int>(i)), frames[i]);
  nlohmann::json order = nlohmann::json::array();
  for (int k = 0; k < layout.bits; ++k) order.push_back("vertical_bit_" + std::to_string(layout.bits - 1 - k));
  for (int k = 0; k < layout.bits; ++k) order.push_back("horizontal_bit_" + std::to_string(layout.bits - 1 - k));
  order.push_back("white");
  order.push_back("black");
  const nlohmann::json manifest{{"bits", layout.bits},
                                {"pattern_width", layout.pattern_width},
                                {"pattern_height", layout.pattern_height},
                                {"frame_count", layout.frame_count()},
                                {"order", order}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

StackOnDisk read_stack(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw Error("missing manifest.json in " + dir.string());
  const auto manifest = nlohmann::json::parse(f);
  StackOnDisk out;
  out.layout = {manifest.at("bits").get<int>(), manifest.at("pattern_width").get<int>(),
                manifest.at("pattern_height").get<int>()};
  out.layout.validate();
  for (int i = 0; i < out.layout.frame_count(); ++i) out.frames.push_back(read_grid(dir / frame_name(i)));
  return out;
}

}  // namespace rfgeo
