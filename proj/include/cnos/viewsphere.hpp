// Copyright 2026 The cnos-match Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Viewpoint sampling on the unit sphere by icosahedron subdivision, and the
// look-at camera poses handed to template renderers.

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cnos/error.hpp"
#include "json.hpp"

namespace cnos {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;  // row-major: m[row][col]

namespace vec {

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 scaled(const Vec3& a, double s) {
  return {a[0] * s, a[1] * s, a[2] * s};
}

inline Vec3 sub(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Vec3 normalized(const Vec3& a) { return scaled(a, 1.0 / norm(a)); }

}  // namespace vec

struct Viewpoint {
  Vec3 direction{};  // unit vector from the object center towards the camera
  int level = 0;
};

// Camera-to-world transform. Columns of `rotation` are the camera x (right),
// y (down) and z (optical axis) directions expressed in world coordinates.
struct CameraPose {
  Mat3 rotation{};
  Vec3 translation{};

  Vec3 optical_axis() const {
    return {rotation[0][2], rotation[1][2], rotation[2][2]};
  }
};

struct ViewpointSet {
  int level = 0;
  double radius = 1.0;
  std::vector<Viewpoint> viewpoints;
  std::vector<CameraPose> poses;

  std::size_t size() const { return viewpoints.size(); }
};

// 10 * 4^level + 2.
constexpr std::size_t icosphere_vertex_count(int level) {
  std::size_t faces = 20;
  for (int i = 0; i < level; ++i) faces *= 4;
  return faces / 2 + 2;
}

namespace detail {

inline std::vector<Vec3> icosahedron_vertices() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v;
  v.reserve(12);
  for (double a : {-1.0, 1.0}) {
    for (double b : {-phi, phi}) {
      v.push_back({0.0, a, b});
      v.push_back({a, b, 0.0});
      v.push_back({b, 0.0, a});
    }
  }
  return v;
}

// Faces are recovered from the geometry: every triple of mutually adjacent
// vertices (distance == edge length 2) is a face of the unnormalized solid.
inline std::vector<std::array<int, 3>> icosahedron_faces(
    const std::vector<Vec3>& v) {
  auto adjacent = [&](int i, int j) {
    return std::abs(vec::norm(vec::sub(v[i], v[j])) - 2.0) < 1e-9;
  };
  std::vector<std::array<int, 3>> faces;
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      for (int k = j + 1; k < n; ++k)
        if (adjacent(i, j) && adjacent(j, k) && adjacent(i, k))
          faces.push_back({i, j, k});
  return faces;
}

inline std::tuple<std::int64_t, std::int64_t, std::int64_t> canonical_key(
    const Vec3& p) {
  auto q = [](double x) { return static_cast<std::int64_t>(std::llround(x * 1e9)); };
  return {q(p[2]), q(p[1]), q(p[0])};
}

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

// Vertices of the icosphere at `level`, projected to the unit sphere and
// sorted by (z, y, x) after rounding to 1e-9.
inline std::vector<Vec3> icosphere_vertices(int level) {
  if (level < 0)
    throw InvalidArgument("icosphere level must be non-negative, got " +
                          std::to_string(level));
  std::vector<Vec3> verts = detail::icosahedron_vertices();
  std::vector<std::array<int, 3>> faces = detail::icosahedron_faces(verts);
  for (auto& p : verts) p = vec::normalized(p);

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto split = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Vec3 m = vec::normalized(vec::scaled(
          Vec3{verts[a][0] + verts[b][0], verts[a][1] + verts[b][1],
               verts[a][2] + verts[b][2]},
          0.5));
      verts.push_back(m);
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = split(f[0], f[1]);
      const int bc = split(f[1], f[2]);
      const int ca = split(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  std::sort(verts.begin(), verts.end(), [](const Vec3& a, const Vec3& b) {
    return detail::canonical_key(a) < detail::canonical_key(b);
  });
  return verts;
}

// Look-at pose for a camera placed at radius * direction and aimed at the
// origin. The up hint is orthogonalized against the optical axis; when it is
// (anti)parallel to `direction` the x axis is used instead, and the y axis if
// that is degenerate too.
inline CameraPose camera_pose_from_viewpoint(const Vec3& direction,
                                             double radius,
                                             const Vec3& up_hint = {0, 1, 0}) {
  const double n = vec::norm(direction);
  if (!(n > 0.0) || !std::isfinite(n))
    throw InvalidArgument("viewpoint direction must be non-zero");
  if (std::abs(n - 1.0) > 1e-6)
    throw InvalidArgument("viewpoint direction must be unit length");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw InvalidArgument("camera radius must be positive");

  const Vec3 d = vec::scaled(direction, 1.0 / n);
  const Vec3 z = vec::scaled(d, -1.0);

  auto usable = [&](const Vec3& up) {
    const double un = vec::norm(up);
    return un > 0.0 && std::abs(vec::dot(d, up) / un) <= 1.0 - 1e-6;
  };
  Vec3 up = up_hint;
  if (!usable(up)) up = {1.0, 0.0, 0.0};
  if (!usable(up)) up = {0.0, 1.0, 0.0};

  const Vec3 up_ortho =
      vec::normalized(vec::sub(up, vec::scaled(z, vec::dot(up, z))));
  const Vec3 y = vec::scaled(up_ortho, -1.0);
  const Vec3 x = vec::cross(y, z);

  CameraPose pose;
  for (int r = 0; r < 3; ++r) {
    pose.rotation[r] = {x[r], y[r], z[r]};
    pose.translation[r] = radius * d[r];
  }
  return pose;
}

inline ViewpointSet generate_viewpoint_set(int level, double radius,
                                           const Vec3& up_hint = {0, 1, 0}) {
  ViewpointSet set;
  set.level = level;
  set.radius = radius;
  for (const Vec3& dir : icosphere_vertices(level)) {
    set.viewpoints.push_back({dir, level});
    set.poses.push_back(camera_pose_from_viewpoint(dir, radius, up_hint));
  }
  return set;
}

inline std::string viewpoints_to_json(const ViewpointSet& set) {
  using detail::format_double;
  auto vec3 = [](const Vec3& v) {
    return "[" + format_double(v[0]) + ", " + format_double(v[1]) + ", " +
           format_double(v[2]) + "]";
  };
  std::ostringstream out;
  out << "{\"level\": " << set.level
      << ", \"radius\": " << format_double(set.radius) << ", \"poses\": [";
  for (std::size_t i = 0; i < set.poses.size(); ++i) {
    const CameraPose& p = set.poses[i];
    out << (i ? ",\n  " : "\n  ") << "{\"direction\": "
        << vec3(set.viewpoints[i].direction) << ", \"rotation\": ["
        << vec3(p.rotation[0]) << ", " << vec3(p.rotation[1]) << ", "
        << vec3(p.rotation[2]) << "], \"translation\": " << vec3(p.translation)
        << "}";
  }
  out << (set.poses.empty() ? "]}\n" : "\n]}\n");
  return out.str();
}

inline void write_viewpoints(const ViewpointSet& set, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path + "' for writing: " +
                        std::strerror(errno));
  f << viewpoints_to_json(set);
  f.flush();
  if (!f) throw IoError("failed writing '" + path + "'");
}

inline ViewpointSet read_viewpoints(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(f);
    ViewpointSet set;
    set.level = doc.at("level").get<int>();
    set.radius = doc.at("radius").get<double>();
    for (const auto& rec : doc.at("poses")) {
      Viewpoint vp;
      vp.direction = rec.at("direction").get<Vec3>();
      vp.level = set.level;
      CameraPose pose;
      pose.rotation = rec.at("rotation").get<Mat3>();
      pose.translation = rec.at("translation").get<Vec3>();
      set.viewpoints.push_back(vp);
      set.poses.push_back(pose);
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed viewpoints file '" + path + "': " + e.what());
  }
}

}  // namespace cnos
