#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "nbv/common.hpp"

namespace nbv {

// The dataset D: surface positions paired with unit outward normals.
// Scans are concatenated into one growing cloud as an episode proceeds.
struct OrientedPointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }

  void add(const Vec3& p, const Vec3& n) {
    positions.push_back(p);
    normals.push_back(n);
  }

  void append(const OrientedPointCloud& other) {
    positions.insert(positions.end(), other.positions.begin(),
                     other.positions.end());
    normals.insert(normals.end(), other.normals.begin(), other.normals.end());
  }

  void validate() const {
    if (positions.size() != normals.size())
      throw std::invalid_argument("cloud: positions/normals length mismatch");
    for (const auto& n : normals)
      if (std::abs(n.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("cloud: non-unit normal");
  }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : positions) c += p;
    return positions.empty() ? c : Vec3(c / double(positions.size()));
  }
};

inline OrientedPointCloud concat(const OrientedPointCloud& a,
                                 const OrientedPointCloud& b) {
  OrientedPointCloud out = a;
  out.append(b);
  return out;
}

inline std::pair<Vec3, Vec3> bounds(const OrientedPointCloud& cloud) {
  Vec3 lo = Vec3::Constant(1e30), hi = Vec3::Constant(-1e30);
  for (const auto& p : cloud.positions) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return {lo, hi};
}

// Keeps the first point (in index order) of every occupied voxel, so the
// result is deterministic and order-stable.
inline OrientedPointCloud voxel_downsample(const OrientedPointCloud& cloud,
                                           double voxel) {
  if (voxel <= 0.0) return cloud;
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(cloud.size() * 2);
  OrientedPointCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const auto cell = [&](double v) {
      return static_cast<std::int64_t>(std::floor(v / voxel)) + (1ll << 20);
    };
    const std::uint64_t key = (static_cast<std::uint64_t>(cell(p.x())) << 42) ^
                              (static_cast<std::uint64_t>(cell(p.y())) << 21) ^
                              static_cast<std::uint64_t>(cell(p.z()));
    if (seen.insert(key).second) out.add(p, cloud.normals[i]);
  }
  return out;
}

// Downsamples until the cloud has at most max_points, by bisecting the voxel
// size. Used to cap GP observation counts.
inline OrientedPointCloud decimate_to(const OrientedPointCloud& cloud,
                                      std::size_t max_points) {
  if (max_points == 0 || cloud.size() <= max_points) return cloud;
  double lo = 1e-5, hi = 4.0 * kDomainHalf;
  OrientedPointCloud best = voxel_downsample(cloud, hi);
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    OrientedPointCloud cand = voxel_downsample(cloud, mid);
    if (cand.size() <= max_points) {
      best = std::move(cand);
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return best;
}

// ---------------------------------------------------------------- PLY io ---

// ASCII PLY with properties x y z nx ny nz.
inline void write_ply(const std::string& path,
                      const OrientedPointCloud& cloud) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n"
    << "property float x\nproperty float y\nproperty float z\n"
    << "property float nx\nproperty float ny\nproperty float nz\n"
    << "end_header\n";
  char line[256];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const Vec3& n = cloud.normals[i];
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %.9g %.9g %.9g\n", p.x(),
                  p.y(), p.z(), n.x(), n.y(), n.z());
    f << line;
  }
}

inline OrientedPointCloud read_ply(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  std::getline(f, line);
  if (line.rfind("ply", 0) != 0) throw std::runtime_error("not a PLY: " + path);
  std::size_t n = 0;
  std::vector<std::string> props;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "element") {
      std::string what;
      ss >> what >> n;
      if (what != "vertex") throw std::runtime_error("unsupported element");
    } else if (tok == "property") {
      std::string type, name;
      ss >> type >> name;
      props.push_back(name);
    } else if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw std::runtime_error("binary PLY unsupported");
    } else if (tok == "end_header") {
      break;
    }
  }
  const std::vector<std::string> want = {"x", "y", "z", "nx", "ny", "nz"};
  if (props != want)
    throw std::runtime_error("PLY must have exactly x y z nx ny nz");
  OrientedPointCloud cloud;
  cloud.positions.reserve(n);
  cloud.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x, y, z, nx, ny, nz;
    if (!(f >> x >> y >> z >> nx >> ny >> nz))
      throw std::runtime_error("truncated PLY: " + path);
    Vec3 nrm(nx, ny, nz);
    const double len = nrm.norm();
    if (len > 1e-12) nrm /= len;
    cloud.add(Vec3(x, y, z), nrm);
  }
  return cloud;
}

}  // namespace nbv
