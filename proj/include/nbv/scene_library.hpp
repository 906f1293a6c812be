#pragma once

#include <string>
#include <vector>

#include "nbv/scene.hpp"

namespace nbv {

// ---------------------------------------------------------- 2D outlines ----

inline std::vector<Vec2> square_outline(double half) {
  return {{-half, -half}, {half, -half}, {half, half}, {-half, half}};
}

inline std::vector<Vec2> cross_outline(double arm_len, double arm_width) {
  const double l = arm_len, w = arm_width;
  return {{l, w},   {w, w},   {w, l},   {-w, l},  {-w, w},  {-l, w},
          {-l, -w}, {-w, -w}, {-w, -l}, {w, -l},  {w, -w},  {l, -w}};
}

inline std::vector<Vec2> star_outline(int points, double r_outer,
                                      double r_inner) {
  std::vector<Vec2> pts;
  for (int i = 0; i < 2 * points; ++i) {
    const double r = (i % 2 == 0) ? r_outer : r_inner;
    const double a = M_PI / 2 + M_PI * double(i) / double(points);
    pts.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  return pts;
}

inline std::vector<Vec2> triangle_outline(double r) {
  std::vector<Vec2> pts;
  for (int i = 0; i < 3; ++i) {
    const double a = M_PI / 2 + 2.0 * M_PI * double(i) / 3.0;
    pts.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  return pts;
}

// -------------------------------------------------------------- pyramid ----

enum class PyramidPattern { cross = 0, ring = 1, star = 2, triangle = 3,
                            square = 4 };

inline const std::vector<std::string>& pyramid_pattern_names() {
  static const std::vector<std::string> names = {"cross", "ring", "star",
                                                 "triangle", "square"};
  return names;
}

inline PyramidPattern pyramid_pattern_from_name(const std::string& s) {
  const auto& names = pyramid_pattern_names();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<PyramidPattern>(i);
  throw ConfigError("unknown pyramid pattern: " + s);
}

// Four-sided pyramid with a class-specific pattern recessed into its base.
// The base faces down (z = -0.35, apex at z = +0.5) and the lateral faces are
// identical across classes, so only base-facing views are informative. The
// pattern is rotated about z by a seed-driven random angle; the seed stream
// is consumed identically for every pattern.
inline Scene make_pyramid_scene(PyramidPattern pattern, std::uint64_t seed) {
  const double base_half = 0.55;
  const double base_z = -0.35;
  const double apex_z = 0.5;
  const Vec3 apex(0, 0, apex_z);
  const double height = apex_z - base_z;

  std::vector<NodePtr> faces;
  faces.push_back(std::make_shared<PlaneNode>(Vec3(0, 0, -1), -base_z));
  for (int k = 0; k < 4; ++k) {
    const double cx = (k == 0) ? 1 : (k == 1) ? -1 : 0;
    const double cy = (k == 2) ? 1 : (k == 3) ? -1 : 0;
    const Vec3 n = Vec3(cx * height, cy * height, base_half).normalized();
    faces.push_back(std::make_shared<PlaneNode>(n, n.dot(apex)));
  }
  NodePtr body = std::make_shared<IntersectNode>(std::move(faces));

  Shape2D shape;
  switch (pattern) {
    case PyramidPattern::cross:
      shape.polygon = cross_outline(0.36, 0.09);
      break;
    case PyramidPattern::ring:
      shape.r_mid = 0.27;
      shape.half_width = 0.075;
      break;
    case PyramidPattern::star:
      shape.polygon = star_outline(5, 0.36, 0.15);
      break;
    case PyramidPattern::triangle:
      shape.polygon = triangle_outline(0.38);
      break;
    case PyramidPattern::square:
      shape.polygon = square_outline(0.26);
      break;
  }
  // Recess: cut 0.11 (10% of base width) up into the base.
  NodePtr cut = std::make_shared<ExtrusionNode>(shape, base_z - 0.11,
                                                base_z + 0.11);

  Rng rng(mix_seed(seed, 0x9d7a));
  const double theta_deg = rng.uniform(0.0, 360.0);
  cut = std::make_shared<RotateZNode>(theta_deg, cut);

  Scene scene;
  scene.root = std::make_shared<DifferenceNode>(body, cut);
  scene.class_label = static_cast<int>(pattern);
  scene.name = "pyramid_" + pyramid_pattern_names()[static_cast<int>(pattern)] +
               "_" + std::to_string(seed);
  return scene;
}

// ----------------------------------------------------- multi-part scenes ---

// Body with small spherical appendages at seed-driven directions. Part 0 is
// the body; parts 1..n the appendages. Directions are spread at least 60
// degrees apart and one is forced into the lower hemisphere so the
// conventional north-pole initial view never sees everything at once.
inline Scene make_parts_scene(std::uint64_t seed, int n_appendages = 3) {
  Rng rng(mix_seed(seed, 0xa99e));
  const double body_r = 0.42;
  const double app_r = 0.13;

  std::vector<Vec3> dirs;
  int guard = 0;
  while (static_cast<int>(dirs.size()) < n_appendages) {
    if (++guard > 10000)
      throw SamplingStalled("appendage direction rejection stalled");
    Vec3 d = rng.gauss3();
    if (d.norm() < 1e-6) continue;
    d.normalize();
    if (dirs.empty() && d.z() > -0.35) continue;  // first one points south
    bool ok = true;
    for (const auto& e : dirs)
      if (d.dot(e) > 0.5) ok = false;  // keep >= 60 degrees apart
    if (ok) dirs.push_back(d);
  }

  auto body = std::make_shared<SphereNode>(Vec3::Zero(), body_r);
  body->part_label = 0;
  std::vector<NodePtr> children{body};
  for (int i = 0; i < n_appendages; ++i) {
    auto app =
        std::make_shared<SphereNode>(Vec3((body_r + 0.08) * dirs[i]), app_r);
    app->part_label = i + 1;
    children.push_back(app);
  }

  Scene scene;
  scene.root = std::make_shared<UnionNode>(std::move(children));
  scene.collect_parts();
  scene.name = "parts_" + std::to_string(seed);
  return scene;
}

// ------------------------------------------------------------ heat scene ---

// Round body with a thin capsule appendage pointing south: invisible from
// the north-pole initial view, and the coldest spot under a north-side heat
// source sits at the capsule tip.
inline Scene make_heat_scene() {
  auto body = std::make_shared<SphereNode>(Vec3::Zero(), 0.45);
  auto tail = std::make_shared<CapsuleNode>(Vec3(0, 0, -0.40),
                                            Vec3(0, 0, -1.05), 0.06);
  Scene scene;
  scene.root = std::make_shared<UnionNode>(std::vector<NodePtr>{body, tail});
  scene.name = "heat_probe";
  return scene;
}

// ----------------------------------------------------------- test shapes ---

inline Scene make_sphere_scene(double radius = 1.0,
                               const Vec3& center = Vec3::Zero()) {
  Scene scene;
  scene.root = std::make_shared<SphereNode>(center, radius);
  scene.name = "sphere";
  return scene;
}

// Scene concentrated in the lower half-space (for hemisphere-preference
// planner tests).
inline Scene make_south_ball_scene() {
  Scene scene;
  scene.root = std::make_shared<SphereNode>(Vec3(0, 0, -0.55), 0.45);
  scene.name = "south_ball";
  return scene;
}

// Small zoo of closed shapes for the reconstruction benchmark; index cycles
// through eight families, jittered per seed.
inline Scene make_shapes_scene(int index, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x54a9, index));
  const double rot = rng.uniform(0.0, 360.0);
  const double j1 = rng.uniform(-0.08, 0.08);
  const double j2 = rng.uniform(-0.08, 0.08);
  Scene scene;
  switch (((index % 8) + 8) % 8) {
    case 0:
      scene.root = std::make_shared<SphereNode>(Vec3(j1, j2, 0), 0.5);
      scene.name = "shape_sphere";
      break;
    case 1: {
      auto a = std::make_shared<SphereNode>(Vec3(0.3 + j1, 0, 0.1), 0.35);
      auto b = std::make_shared<SphereNode>(Vec3(-0.3 + j2, 0, -0.1), 0.3);
      scene.root = std::make_shared<UnionNode>(std::vector<NodePtr>{a, b});
      scene.name = "shape_twin";
      break;
    }
    case 2:
      scene.root = std::make_shared<BoxNode>(Vec3(j1, j2, 0),
                                             Vec3(0.35, 0.25, 0.45), rot);
      scene.name = "shape_box";
      break;
    case 3:
      return make_pyramid_scene(PyramidPattern::square, seed);
    case 4:
      return make_parts_scene(seed);
    case 5: {
      auto a = std::make_shared<CapsuleNode>(Vec3(-0.5, j1, 0),
                                             Vec3(0.5, j1, 0), 0.16);
      auto b = std::make_shared<CapsuleNode>(Vec3(j2, -0.5, 0.05),
                                             Vec3(j2, 0.5, 0.05), 0.16);
      scene.root = std::make_shared<UnionNode>(std::vector<NodePtr>{a, b});
      scene.name = "shape_cross";
      break;
    }
    case 6: {
      Shape2D ring;
      ring.r_mid = 0.45;
      ring.half_width = 0.12;
      scene.root = std::make_shared<ExtrusionNode>(ring, -0.12, 0.12);
      scene.name = "shape_ring";
      break;
    }
    case 7: {
      auto a = std::make_shared<BoxNode>(Vec3(0, 0, 0),
                                         Vec3(0.4, 0.4, 0.3), rot);
      auto b = std::make_shared<SphereNode>(Vec3(j1, j2, 0.3), 0.3);
      scene.root = std::make_shared<DifferenceNode>(a, b);
      scene.name = "shape_notch";
      break;
    }
  }
  scene.name += "_" + std::to_string(index);
  return scene;
}

// CLI shorthand: name -> scene. Accepts "sphere", "south_ball", "heat_probe",
// "parts", "shapes:<i>", and "pyramid:<pattern>".
inline Scene scene_by_name(const std::string& name, std::uint64_t seed) {
  if (name == "sphere") return make_sphere_scene();
  if (name == "south_ball") return make_south_ball_scene();
  if (name == "heat_probe") return make_heat_scene();
  if (name == "parts") return make_parts_scene(seed);
  if (name.rfind("shapes:", 0) == 0)
    return make_shapes_scene(std::stoi(name.substr(7)), seed);
  if (name.rfind("pyramid:", 0) == 0)
    return make_pyramid_scene(pyramid_pattern_from_name(name.substr(8)), seed);
  throw ConfigError("unknown scene name: " + name +
                    " (expected a builtin name or a .json path)");
}

}  // namespace nbv
