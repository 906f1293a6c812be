#pragma once

#include <vector>

#include "nbv/common.hpp"

namespace nbv {

// A camera pose: position plus look-at target. The candidate poses used by
// the planner all sit on a bounding sphere and look at the origin, so the
// effective parameterization is 2-DOF (azimuth, elevation).
struct CameraPose {
  Vec3 position{0, 0, 2.5};
  Vec3 look_at{0, 0, 0};
  Vec3 up{0, 0, 1};

  struct Frame {
    Vec3 forward, right, up;
  };

  Frame frame() const {
    const Vec3 d = look_at - position;
    const double len = d.norm();
    if (len < 1e-12)
      throw std::invalid_argument("camera: position equals look_at");
    const Vec3 fwd = d / len;
    Vec3 ref = up;
    if (std::abs(fwd.dot(ref.normalized())) > 1.0 - 1e-9)
      ref = Vec3(1, 0, 0);  // looking along 'up': fall back to +x reference
    Vec3 right = fwd.cross(ref);
    right.normalize();
    const Vec3 cam_up = right.cross(fwd);
    return {fwd, right, cam_up};
  }
};

struct ScanConfig {
  double fov_degrees = 30.0;
  int res_w = 50;
  int res_h = 50;
  double max_range = 8.0;
  double noise_sigma = 0.0;  // positional jitter in scene units
};

inline std::pair<Vec3, Vec3> principal_ray(const CameraPose& pose) {
  return {pose.position, (pose.look_at - pose.position).normalized()};
}

// Spherical parameterization used by the local refiner: azimuth in [0,2pi),
// elevation in [-pi/2, pi/2], radius fixed.
inline CameraPose pose_from_angles(double azimuth, double elevation,
                                   double radius) {
  const double ce = std::cos(elevation);
  CameraPose pose;
  pose.position = radius * Vec3(ce * std::cos(azimuth), ce * std::sin(azimuth),
                                std::sin(elevation));
  pose.look_at = Vec3::Zero();
  return pose;
}

inline std::pair<double, double> angles_of(const CameraPose& pose) {
  const Vec3 p = pose.position.normalized();
  return {std::atan2(p.y(), p.x()), std::asin(std::clamp(p.z(), -1.0, 1.0))};
}

// Near-uniform candidate poses on the bounding sphere, all looking at the
// origin. Uses golden-angle longitudes with endpoint latitudes so that index
// 0 is exactly the north pole (the conventional initial view).
inline std::vector<CameraPose> fibonacci_candidates(int n, double radius) {
  if (n < 1) throw std::invalid_argument("fibonacci_candidates: n >= 1");
  if (radius <= 0.0)
    throw std::invalid_argument("fibonacci_candidates: radius > 0");
  constexpr double kGoldenAngle = 2.399963229728653;  // pi(3 - sqrt 5)
  std::vector<CameraPose> poses;
  poses.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double z = (n == 1) ? 1.0 : 1.0 - 2.0 * double(i) / double(n - 1);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = kGoldenAngle * double(i);
    CameraPose pose;
    pose.position =
        radius * Vec3(rho * std::cos(phi), rho * std::sin(phi), z);
    pose.look_at = Vec3::Zero();
    poses.push_back(pose);
  }
  return poses;
}

}  // namespace nbv
