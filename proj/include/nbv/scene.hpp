#pragma once

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nbv/common.hpp"
#include "nbv/point_cloud.hpp"

namespace nbv {

using Json = nlohmann::json;
using Vec2 = Eigen::Vector2d;

// Ground-truth scenes are CSG trees of analytic signed-distance primitives.
// Every node is 1-Lipschitz with |sdf| a lower bound on the true distance,
// which is exactly what sphere tracing needs. Convention: negative inside.
class SdfNode {
 public:
  virtual ~SdfNode() = default;
  virtual double sdf(const Vec3& p) const = 0;
  virtual Json to_json() const = 0;

  std::optional<int> part_label;  // semantic part id for segmentation truth

 protected:
  Json base_json(const char* type) const {
    Json j{{"type", type}};
    if (part_label) j["part_label"] = *part_label;
    return j;
  }
};

using NodePtr = std::shared_ptr<const SdfNode>;

namespace detail {
inline Json vec_json(const Vec3& v) { return Json{v.x(), v.y(), v.z()}; }
inline Vec3 vec_from(const Json& j) { return Vec3(j.at(0), j.at(1), j.at(2)); }
}  // namespace detail

// ------------------------------------------------------------ primitives ---

class SphereNode : public SdfNode {
 public:
  SphereNode(const Vec3& center, double radius)
      : center_(center), radius_(radius) {}
  double sdf(const Vec3& p) const override {
    return (p - center_).norm() - radius_;
  }
  Json to_json() const override {
    Json j = base_json("sphere");
    j["center"] = detail::vec_json(center_);
    j["radius"] = radius_;
    return j;
  }

 private:
  Vec3 center_;
  double radius_;
};

class BoxNode : public SdfNode {
 public:
  BoxNode(const Vec3& center, const Vec3& half_extents, double rot_z_deg = 0)
      : center_(center), half_(half_extents), rot_deg_(rot_z_deg) {
    const double a = deg2rad(rot_z_deg);
    cos_ = std::cos(a);
    sin_ = std::sin(a);
  }
  double sdf(const Vec3& p) const override {
    const Vec3 t = p - center_;
    // Rotate into the box frame (inverse of the z-rotation).
    const Vec3 q(cos_ * t.x() + sin_ * t.y(), -sin_ * t.x() + cos_ * t.y(),
                 t.z());
    const Vec3 d = q.cwiseAbs() - half_;
    const Vec3 dpos = d.cwiseMax(0.0);
    return dpos.norm() + std::min(d.maxCoeff(), 0.0);
  }
  Json to_json() const override {
    Json j = base_json("box");
    j["center"] = detail::vec_json(center_);
    j["half_extents"] = detail::vec_json(half_);
    j["rot_z_deg"] = rot_deg_;
    return j;
  }

 private:
  Vec3 center_, half_;
  double rot_deg_, cos_, sin_;
};

// Halfspace {n.p <= offset} (solid below the plane along n).
class PlaneNode : public SdfNode {
 public:
  PlaneNode(const Vec3& normal, double offset)
      : normal_(normal.normalized()), offset_(offset) {}
  double sdf(const Vec3& p) const override { return normal_.dot(p) - offset_; }
  Json to_json() const override {
    Json j = base_json("plane");
    j["normal"] = detail::vec_json(normal_);
    j["offset"] = offset_;
    return j;
  }

 private:
  Vec3 normal_;
  double offset_;
};

class CapsuleNode : public SdfNode {
 public:
  CapsuleNode(const Vec3& a, const Vec3& b, double radius)
      : a_(a), b_(b), radius_(radius) {}
  double sdf(const Vec3& p) const override {
    const Vec3 ab = b_ - a_, ap = p - a_;
    const double t =
        std::clamp(ap.dot(ab) / std::max(ab.squaredNorm(), 1e-300), 0.0, 1.0);
    return (ap - t * ab).norm() - radius_;
  }
  Json to_json() const override {
    Json j = base_json("capsule");
    j["a"] = detail::vec_json(a_);
    j["b"] = detail::vec_json(b_);
    j["radius"] = radius_;
    return j;
  }

 private:
  Vec3 a_, b_;
  double radius_;
};

// 2D cross-sections for prism-like solids.
struct Shape2D {
  // polygon: exact signed distance, supports concave outlines (stars).
  std::vector<Vec2> polygon;
  // annulus: |dist to circle r_mid| - half_width (used when polygon empty).
  double r_mid = 0, half_width = 0;

  double sdf(const Vec2& p) const {
    if (polygon.empty())
      return std::abs(p.norm() - r_mid) - half_width;
    const std::size_t n = polygon.size();
    double d2 = (p - polygon[0]).squaredNorm();
    double s = 1.0;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Vec2 e = polygon[j] - polygon[i];
      const Vec2 w = p - polygon[i];
      const double t =
          std::clamp(w.dot(e) / std::max(e.squaredNorm(), 1e-300), 0.0, 1.0);
      d2 = std::min(d2, (w - t * e).squaredNorm());
      // Winding parity (crossing test with consistent tie handling).
      const bool c0 = p.y() >= polygon[i].y();
      const bool c1 = p.y() < polygon[j].y();
      const bool c2 = e.x() * w.y() > e.y() * w.x();
      if ((c0 && c1 && c2) || (!c0 && !c1 && !c2)) s = -s;
    }
    return s * std::sqrt(d2);
  }

  Json to_json() const {
    if (polygon.empty())
      return Json{{"kind", "annulus"},
                  {"r_mid", r_mid},
                  {"half_width", half_width}};
    Json pts = Json::array();
    for (const auto& p : polygon) pts.push_back(Json{p.x(), p.y()});
    return Json{{"kind", "polygon"}, {"points", pts}};
  }

  static Shape2D from_json(const Json& j) {
    Shape2D s;
    if (j.at("kind") == "annulus") {
      s.r_mid = j.at("r_mid");
      s.half_width = j.at("half_width");
    } else {
      for (const auto& p : j.at("points"))
        s.polygon.emplace_back(p.at(0), p.at(1));
    }
    return s;
  }
};

// Prism: 2D shape extruded along z over [z_min, z_max]. Exact when the 2D
// field is exact.
class ExtrusionNode : public SdfNode {
 public:
  ExtrusionNode(Shape2D shape, double z_min, double z_max)
      : shape_(std::move(shape)), z0_(z_min), z1_(z_max) {}
  double sdf(const Vec3& p) const override {
    const double d2 = shape_.sdf(Vec2(p.x(), p.y()));
    const double dz = std::abs(p.z() - 0.5 * (z0_ + z1_)) - 0.5 * (z1_ - z0_);
    const double inside = std::min(std::max(d2, dz), 0.0);
    return inside + std::hypot(std::max(d2, 0.0), std::max(dz, 0.0));
  }
  Json to_json() const override {
    Json j = base_json("extrusion");
    j["shape"] = shape_.to_json();
    j["z_min"] = z0_;
    j["z_max"] = z1_;
    return j;
  }

 private:
  Shape2D shape_;
  double z0_, z1_;
};

// ----------------------------------------------------------- combinators ---

class UnionNode : public SdfNode {
 public:
  explicit UnionNode(std::vector<NodePtr> children)
      : children_(std::move(children)) {}
  double sdf(const Vec3& p) const override {
    double d = 1e30;
    for (const auto& c : children_) d = std::min(d, c->sdf(p));
    return d;
  }
  Json to_json() const override {
    Json j = base_json("union");
    j["children"] = Json::array();
    for (const auto& c : children_) j["children"].push_back(c->to_json());
    return j;
  }
  const std::vector<NodePtr>& children() const { return children_; }

 private:
  std::vector<NodePtr> children_;
};

class IntersectNode : public SdfNode {
 public:
  explicit IntersectNode(std::vector<NodePtr> children)
      : children_(std::move(children)) {}
  double sdf(const Vec3& p) const override {
    double d = -1e30;
    for (const auto& c : children_) d = std::max(d, c->sdf(p));
    return d;
  }
  Json to_json() const override {
    Json j = base_json("intersection");
    j["children"] = Json::array();
    for (const auto& c : children_) j["children"].push_back(c->to_json());
    return j;
  }
  const std::vector<NodePtr>& children() const { return children_; }

 private:
  std::vector<NodePtr> children_;
};

class DifferenceNode : public SdfNode {
 public:
  DifferenceNode(NodePtr a, NodePtr b) : a_(std::move(a)), b_(std::move(b)) {}
  double sdf(const Vec3& p) const override {
    return std::max(a_->sdf(p), -b_->sdf(p));
  }
  Json to_json() const override {
    Json j = base_json("difference");
    j["a"] = a_->to_json();
    j["b"] = b_->to_json();
    return j;
  }
  const NodePtr& a() const { return a_; }
  const NodePtr& b() const { return b_; }

 private:
  NodePtr a_, b_;
};

// ------------------------------------------------------------ transforms ---

class TranslateNode : public SdfNode {
 public:
  TranslateNode(const Vec3& offset, NodePtr child)
      : offset_(offset), child_(std::move(child)) {}
  double sdf(const Vec3& p) const override { return child_->sdf(p - offset_); }
  Json to_json() const override {
    Json j = base_json("translate");
    j["offset"] = detail::vec_json(offset_);
    j["child"] = child_->to_json();
    return j;
  }
  const Vec3& offset() const { return offset_; }
  const NodePtr& child() const { return child_; }

 private:
  Vec3 offset_;
  NodePtr child_;
};

class RotateZNode : public SdfNode {
 public:
  RotateZNode(double degrees, NodePtr child)
      : deg_(degrees), child_(std::move(child)) {
    const double a = deg2rad(degrees);
    cos_ = std::cos(a);
    sin_ = std::sin(a);
  }
  double sdf(const Vec3& p) const override {
    // Inverse rotation into the child's frame.
    return child_->sdf(
        Vec3(cos_ * p.x() + sin_ * p.y(), -sin_ * p.x() + cos_ * p.y(),
             p.z()));
  }
  Json to_json() const override {
    Json j = base_json("rotate_z");
    j["degrees"] = deg_;
    j["child"] = child_->to_json();
    return j;
  }
  double degrees() const { return deg_; }
  const NodePtr& child() const { return child_; }

 private:
  double deg_, cos_, sin_;
  NodePtr child_;
};

// ----------------------------------------------------------------- scene ---

struct LabeledPart {
  int label = 0;
  NodePtr solid;  // world-space field (enclosing transforms baked in)
};

namespace detail {

// Walks the tree collecting nodes that carry part labels; enclosing
// transforms are re-applied so each part evaluates in world space.
inline void collect_parts(const NodePtr& node,
                          const std::function<NodePtr(NodePtr)>& wrap,
                          std::vector<LabeledPart>& out) {
  if (!node) return;
  if (node->part_label) out.push_back({*node->part_label, wrap(node)});
  if (auto u = std::dynamic_pointer_cast<const UnionNode>(node)) {
    for (const auto& c : u->children()) collect_parts(c, wrap, out);
  } else if (auto i = std::dynamic_pointer_cast<const IntersectNode>(node)) {
    for (const auto& c : i->children()) collect_parts(c, wrap, out);
  } else if (auto d = std::dynamic_pointer_cast<const DifferenceNode>(node)) {
    collect_parts(d->a(), wrap, out);
    collect_parts(d->b(), wrap, out);
  } else if (auto t = std::dynamic_pointer_cast<const TranslateNode>(node)) {
    const Vec3 off = t->offset();
    auto w2 = [wrap, off](NodePtr n) {
      return wrap(std::make_shared<const TranslateNode>(off, std::move(n)));
    };
    collect_parts(t->child(), w2, out);
  } else if (auto r = std::dynamic_pointer_cast<const RotateZNode>(node)) {
    const double deg = r->degrees();
    auto w2 = [wrap, deg](NodePtr n) {
      return wrap(std::make_shared<const RotateZNode>(deg, std::move(n)));
    };
    collect_parts(r->child(), w2, out);
  }
}

}  // namespace detail

class Scene {
 public:
  NodePtr root;                    // null => empty scene (sdf +inf)
  std::vector<LabeledPart> parts;  // in ascending label order by convention
  std::optional<int> class_label;
  std::string name;

  double sdf(const Vec3& p) const { return root ? root->sdf(p) : 1e30; }

  void collect_parts() {
    parts.clear();
    detail::collect_parts(root, [](NodePtr n) { return n; }, parts);
    std::stable_sort(parts.begin(), parts.end(),
                     [](const LabeledPart& a, const LabeledPart& b) {
                       return a.label < b.label;
                     });
  }

  int n_parts() const { return static_cast<int>(parts.size()); }

  Json to_json() const {
    Json j{{"name", name}};
    if (class_label) j["class_label"] = *class_label;
    if (root) j["root"] = root->to_json();
    return j;
  }

  static Scene from_json(const Json& j);

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << to_json().dump(2) << "\n";
  }

  static Scene load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    Json j;
    f >> j;
    return from_json(j);
  }
};

inline NodePtr node_from_json(const Json& j) {
  const std::string type = j.at("type");
  std::shared_ptr<SdfNode> node;
  if (type == "sphere") {
    node = std::make_shared<SphereNode>(detail::vec_from(j.at("center")),
                                        j.at("radius").get<double>());
  } else if (type == "box") {
    node = std::make_shared<BoxNode>(detail::vec_from(j.at("center")),
                                     detail::vec_from(j.at("half_extents")),
                                     j.value("rot_z_deg", 0.0));
  } else if (type == "plane") {
    node = std::make_shared<PlaneNode>(detail::vec_from(j.at("normal")),
                                       j.at("offset").get<double>());
  } else if (type == "capsule") {
    node = std::make_shared<CapsuleNode>(detail::vec_from(j.at("a")),
                                         detail::vec_from(j.at("b")),
                                         j.at("radius").get<double>());
  } else if (type == "extrusion") {
    node = std::make_shared<ExtrusionNode>(Shape2D::from_json(j.at("shape")),
                                           j.at("z_min").get<double>(),
                                           j.at("z_max").get<double>());
  } else if (type == "union" || type == "intersection") {
    std::vector<NodePtr> children;
    for (const auto& c : j.at("children")) children.push_back(node_from_json(c));
    if (type == "union")
      node = std::make_shared<UnionNode>(std::move(children));
    else
      node = std::make_shared<IntersectNode>(std::move(children));
  } else if (type == "difference") {
    node = std::make_shared<DifferenceNode>(node_from_json(j.at("a")),
                                            node_from_json(j.at("b")));
  } else if (type == "translate") {
    node = std::make_shared<TranslateNode>(detail::vec_from(j.at("offset")),
                                           node_from_json(j.at("child")));
  } else if (type == "rotate_z") {
    node = std::make_shared<RotateZNode>(j.at("degrees").get<double>(),
                                         node_from_json(j.at("child")));
  } else {
    throw ConfigError("unknown scene node type: " + type);
  }
  if (j.contains("part_label")) node->part_label = j["part_label"].get<int>();
  return node;
}

inline Scene Scene::from_json(const Json& j) {
  Scene scene;
  scene.name = j.value("name", "");
  if (j.contains("class_label")) scene.class_label = j["class_label"].get<int>();
  if (j.contains("root")) scene.root = node_from_json(j.at("root"));
  scene.collect_parts();
  return scene;
}

// ------------------------------------------------------------ operations ---

inline double evaluate_sdf(const Scene& scene, const Vec3& p) {
  return scene.sdf(p);
}

// Central finite-difference gradient of the SDF, normalized.
inline Vec3 sdf_normal(const Scene& scene, const Vec3& p) {
  constexpr double h = 1e-5;
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 a = p, b = p;
    a[i] += h;
    b[i] -= h;
    g[i] = (scene.sdf(a) - scene.sdf(b)) / (2 * h);
  }
  const double len = g.norm();
  if (len < 1e-9)
    throw DegenerateGradient("sdf gradient vanished at query point");
  return g / len;
}

// Nearest labeled part by |sdf|; ties broken by part order. -1 if no parts.
inline int nearest_part(const Scene& scene, const Vec3& p) {
  int best = -1;
  double bd = 1e300;
  for (std::size_t i = 0; i < scene.parts.size(); ++i) {
    const double d = std::abs(scene.parts[i].solid->sdf(p));
    if (d < bd) {
      bd = d;
      best = static_cast<int>(i);
    }
  }
  return best < 0 ? -1 : scene.parts[best].label;
}

// Rejection + projection surface sampling: uniform proposals in the domain
// box walked onto the surface along the SDF gradient.
inline OrientedPointCloud sample_surface(const Scene& scene, int n,
                                         std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_surface: n >= 1");
  Rng rng(mix_seed(seed, 0x5caf));
  const Vec3 lo = Vec3::Constant(-kDomainHalf - 0.2);
  const Vec3 hi = Vec3::Constant(kDomainHalf + 0.2);
  OrientedPointCloud cloud;
  cloud.positions.reserve(n);
  long attempts = 0, failures = 0;
  while (static_cast<int>(cloud.size()) < n) {
    ++attempts;
    Vec3 p = rng.uniform_in_box(lo, hi);
    bool ok = false;
    for (int it = 0; it < 48; ++it) {
      const double d = scene.sdf(p);
      if (std::abs(d) < 1e-5) {
        ok = true;
        break;
      }
      Vec3 dir;
      try {
        dir = sdf_normal(scene, p);
      } catch (const DegenerateGradient&) {
        break;
      }
      p -= d * dir;
    }
    if (ok && std::abs(scene.sdf(p)) < 1e-4 && (p.array() >= lo.array()).all() &&
        (p.array() <= hi.array()).all()) {
      try {
        cloud.add(p, sdf_normal(scene, p));
      } catch (const DegenerateGradient&) {
        ++failures;
        continue;
      }
    } else {
      ++failures;
    }
    if (attempts >= 256 && failures * 10 > attempts)
      throw SamplingStalled("surface projection failed for >10% of attempts");
  }
  return cloud;
}

}  // namespace nbv
