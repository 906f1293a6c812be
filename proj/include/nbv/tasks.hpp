#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "nbv/class_distribution.hpp"
#include "nbv/common.hpp"
#include "nbv/kdtree.hpp"
#include "nbv/point_cloud.hpp"
#include "nbv/scene.hpp"

namespace nbv {

using SpMat = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

// Pose-normalized shape descriptor: occupancy over an 8x8x8 grid of the
// centered, unit-max-extent bounding box, concatenated with a 26-bin normal
// orientation histogram. Square-root of the count fractions keeps sparse
// cells from being drowned out.
inline VecX shape_descriptor(const OrientedPointCloud& cloud) {
    if (cloud.empty()) throw EmptyPrediction("cannot describe an empty cloud");
    constexpr int kGrid = 8;
    const auto [lo, hi] = bounds(cloud);
    const Vec3 center = 0.5 * (lo + hi);
    const double scale = std::max((hi - lo).maxCoeff(), 1e-12);

    VecX desc = VecX::Zero(kGrid * kGrid * kGrid + 26);
    for (const Vec3& p : cloud.positions) {
        const Vec3 q = (p - center) / scale + Vec3(0.5, 0.5, 0.5);  // [0,1] box
        int ix = std::min(kGrid - 1, std::max(0, static_cast<int>(q.x() * kGrid)));
        int iy = std::min(kGrid - 1, std::max(0, static_cast<int>(q.y() * kGrid)));
        int iz = std::min(kGrid - 1, std::max(0, static_cast<int>(q.z() * kGrid)));
        desc[(ix * kGrid + iy) * kGrid + iz] += 1.0;
    }
    // 26 directions: nonzero offsets in {-1,0,1}^3, normalized.
    std::vector<Vec3> dirs;
    for (int x = -1; x <= 1; ++x)
        for (int y = -1; y <= 1; ++y)
            for (int z = -1; z <= 1; ++z) {
                if (x == 0 && y == 0 && z == 0) continue;
                dirs.push_back(Vec3(x, y, z).normalized());
            }
    for (const Vec3& n : cloud.normals) {
        int best = 0;
        double bd = -2;
        for (size_t i = 0; i < dirs.size(); ++i) {
            const double d = n.dot(dirs[i]);
            if (d > bd) {
                bd = d;
                best = static_cast<int>(i);
            }
        }
        desc[kGrid * kGrid * kGrid + best] += 1.0;
    }
    const double n = static_cast<double>(cloud.size());
    for (Eigen::Index i = 0; i < desc.size(); ++i) desc[i] = std::sqrt(desc[i] / n);
    return desc;
}

class DescriptorClassifier {
  public:
    DescriptorClassifier() = default;
    explicit DescriptorClassifier(MatX weights) : w_(std::move(weights)) {}

    int n_classes() const { return static_cast<int>(w_.rows()); }
    const MatX& weights() const { return w_; }

    ClassDistribution classify(const OrientedPointCloud& cloud) const {
        if (w_.size() == 0) throw ConfigError("classifier is untrained");
        VecX d = shape_descriptor(cloud);
        VecX x(d.size() + 1);
        x << d, 1.0;
        VecX logits = w_ * x;
        logits.array() -= logits.maxCoeff();
        VecX p = logits.array().exp();
        return ClassDistribution(p / p.sum());
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "descriptor_classifier_v1";
        j["rows"] = w_.rows();
        j["cols"] = w_.cols();
        std::vector<double> flat(w_.data(), w_.data() + w_.size());
        j["weights"] = flat;
        return j;
    }

    static DescriptorClassifier from_json(const nlohmann::json& j) {
        if (j.value("format", "") != "descriptor_classifier_v1")
            throw ConfigError("unknown classifier blob format");
        MatX w(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
        std::vector<double> flat = j.at("weights").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(flat.size()) != w.size())
            throw ConfigError("classifier blob size mismatch");
        std::copy(flat.begin(), flat.end(), w.data());
        return DescriptorClassifier(std::move(w));
    }

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot open for writing: " + path);
        f << to_json().dump(2) << "\n";
    }
    static DescriptorClassifier load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open: " + path);
        nlohmann::json j;
        f >> j;
        return from_json(j);
    }

  private:
    MatX w_;  // C x (descriptor + bias)
};

struct TrainExample {
    OrientedPointCloud cloud;
    int label = 0;
};

// Full-batch softmax regression with a backtracking step size. Deterministic
// per seed; throws DegenerateTraining when the step size underflows before
// the gradient is small (e.g. inconsistent duplicate descriptors).
inline DescriptorClassifier train_descriptor_classifier(
    const std::vector<TrainExample>& examples, int epochs = 1000, uint64_t seed = 0) {
    if (examples.empty()) throw DegenerateTraining("no training examples");
    int n_classes = 0;
    for (const TrainExample& e : examples) n_classes = std::max(n_classes, e.label + 1);
    std::vector<int> per_class(n_classes, 0);
    for (const TrainExample& e : examples) {
        if (e.label < 0) throw DegenerateTraining("negative class label");
        per_class[e.label]++;
    }
    if (n_classes < 2) throw DegenerateTraining("need at least two classes");
    for (int c = 0; c < n_classes; ++c)
        if (per_class[c] < 5)
            throw DegenerateTraining("need at least 5 examples per class, class " +
                                     std::to_string(c) + " has " +
                                     std::to_string(per_class[c]));

    const size_t n = examples.size();
    MatX x(n, shape_descriptor(examples[0].cloud).size() + 1);
    for (size_t i = 0; i < n; ++i) {
        VecX d = shape_descriptor(examples[i].cloud);
        x.row(i).head(d.size()) = d;
        x(i, d.size()) = 1.0;
    }

    Rng rng(mix_seed(seed, 0xc1a5));
    MatX w(n_classes, x.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = 0.01 * rng.gauss();

    auto loss_and_grad = [&](const MatX& weights, MatX* grad) {
        MatX logits = x * weights.transpose();  // n x C
        VecX row_max = logits.rowwise().maxCoeff();
        MatX p = (logits.colwise() - row_max).array().exp();
        VecX z = p.rowwise().sum();
        double loss = 0;
        for (size_t i = 0; i < n; ++i) {
            p.row(i) /= z[i];
            loss -= std::log(std::max(p(i, examples[i].label), 1e-300));
            p(i, examples[i].label) -= 1.0;
        }
        if (grad) *grad = p.transpose() * x / static_cast<double>(n);
        return loss / static_cast<double>(n);
    };

    double lr = 1.0;
    MatX grad;
    double loss = loss_and_grad(w, &grad);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        if (grad.norm() < 1e-8) break;  // converged
        while (true) {
            MatX trial = w - lr * grad;
            const double trial_loss = loss_and_grad(trial, nullptr);
            if (std::isfinite(trial_loss) && trial_loss <= loss) {
                w = std::move(trial);
                loss = trial_loss;
                lr *= 1.2;
                break;
            }
            lr *= 0.5;
            if (lr < 1e-14)
                throw DegenerateTraining("training stalled: no descent direction");
        }
        loss = loss_and_grad(w, &grad);
    }
    return DescriptorClassifier(std::move(w));
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

// Ground-truth part labels softened onto the simplex: confidence 1 - eps on
// the label of the nearest labeled primitive, eps spread over the rest.
class OracleSegmenter {
  public:
    OracleSegmenter(Scene scene, double epsilon = 0.1)
        : scene_(std::move(scene)), eps_(epsilon) {
        for (const LabeledPart& part : scene_.parts)
            n_classes_ = std::max(n_classes_, part.label + 1);
        if (n_classes_ < 2)
            throw ConfigError("oracle segmenter needs a scene with >= 2 labeled parts");
    }

    int n_classes() const { return n_classes_; }

    std::vector<ClassDistribution> segment(const OrientedPointCloud& cloud) const {
        std::vector<ClassDistribution> out;
        out.reserve(cloud.size());
        for (const Vec3& p : cloud.positions) {
            const int label = nearest_part(scene_, p);
            VecX probs = VecX::Constant(n_classes_, eps_ / (n_classes_ - 1));
            probs[label] = 1.0 - eps_;
            out.emplace_back(std::move(probs));
        }
        return out;
    }

  private:
    Scene scene_;
    double eps_;
    int n_classes_ = 0;
};

// ---------------------------------------------------------------------------
// Heat diffusion on point clouds
// ---------------------------------------------------------------------------

struct HeatConfig {
    std::function<double(const Vec3&)> source;  // time-invariant f(x); null = 0
    double u0 = 0.0;                             // initial temperature (constant)
    std::vector<double> u0_per_point;            // overrides u0 when non-empty
    double h = 0.1;
    double total_time = 1.0;
    int k_neighbors = 12;
    double bandwidth = 0.0;  // <= 0: mean distance to the 6th neighbor
    size_t max_points = 0;   // decimate the cloud beyond this (0 = keep all)
};

struct GraphLaplacian {
    SpMat laplacian;       // L = W - D, so L 1 = 0 and L is NSD
    VecX mass;             // vertex degrees scaled to unit mean
    bool disconnected = false;
    double bandwidth = 0.0;
};

inline GraphLaplacian knn_graph_laplacian(const std::vector<Vec3>& points, int k,
                                          double bandwidth = 0.0) {
    const size_t n = points.size();
    if (k < 1 || n < static_cast<size_t>(k) + 1)
        throw InsufficientPoints("knn graph needs at least k+1 points");
    KdTree tree(points);

    std::vector<std::vector<KdTree::Hit>> hits(n);
    for (size_t i = 0; i < n; ++i) hits[i] = tree.knn(points[i], k + 1);  // self included

    GraphLaplacian out;
    double b = bandwidth;
    if (b <= 0) {
        // Mean distance to the 6th nearest neighbor (or the farthest found).
        double acc = 0;
        for (size_t i = 0; i < n; ++i) {
            const size_t j = std::min<size_t>(6, hits[i].size() - 1);
            acc += std::sqrt(hits[i][j].d2);
        }
        b = std::max(acc / n, 1e-12);
    }
    out.bandwidth = b;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(2 * n * k + n);
    std::vector<std::map<int, double>> adj(n);
    for (size_t i = 0; i < n; ++i)
        for (const KdTree::Hit& h : hits[i]) {
            if (h.index == static_cast<int>(i)) continue;
            const double w = std::exp(-h.d2 / (b * b));
            adj[i][h.index] = w;
            adj[h.index][static_cast<int>(i)] = w;  // symmetrize: edge if either lists it
        }
    VecX degree = VecX::Zero(n);
    for (size_t i = 0; i < n; ++i)
        for (const auto& [j, w] : adj[i]) {
            trip.emplace_back(static_cast<int>(i), j, w);
            degree[i] += w;
        }
    for (size_t i = 0; i < n; ++i)
        trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -degree[i]);
    out.laplacian.resize(n, n);
    out.laplacian.setFromTriplets(trip.begin(), trip.end());

    const double mean_deg = degree.mean();
    out.mass = (mean_deg > 0) ? VecX(degree / mean_deg) : VecX(VecX::Ones(n));

    // Component count by BFS over the adjacency (zero-weight edges count as
    // absent only if they underflowed to exactly 0).
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    int components = 0;
    for (size_t s = 0; s < n; ++s) {
        if (seen[s]) continue;
        ++components;
        stack.push_back(static_cast<int>(s));
        seen[s] = 1;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (const auto& [j, w] : adj[i])
                if (w > 0 && !seen[j]) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
        }
    }
    out.disconnected = components > 1;
    return out;
}

// Implicit Euler: (M - hL) u_{k+1} = M u_k + h f, factored once.
inline VecX heat_solve(const std::vector<Vec3>& points, const GraphLaplacian& graph,
                       const HeatConfig& cfg, bool use_mass = false) {
    const Eigen::Index n = graph.laplacian.rows();
    if (static_cast<size_t>(n) != points.size())
        throw ConfigError("laplacian/points size mismatch");
    if (cfg.h <= 0 || cfg.total_time < cfg.h)
        throw ConfigError("heat needs h > 0 and total_time >= h");

    VecX u = VecX::Constant(n, cfg.u0);
    if (!cfg.u0_per_point.empty()) {
        if (cfg.u0_per_point.size() != static_cast<size_t>(n))
            throw ConfigError("u0_per_point size mismatch");
        u = Eigen::Map<const VecX>(cfg.u0_per_point.data(), n);
    }
    VecX f = VecX::Zero(n);
    if (cfg.source)
        for (Eigen::Index i = 0; i < n; ++i) f[i] = cfg.source(points[i]);

    VecX mass = use_mass ? graph.mass : VecX::Ones(n);
    SpMat system = -cfg.h * graph.laplacian;
    for (Eigen::Index i = 0; i < n; ++i) system.coeffRef(i, i) += mass[i];
    Eigen::SimplicialLDLT<SpMat> solver(system);
    if (solver.info() != Eigen::Success)
        throw SolverDiverged("heat system factorization failed");

    const int steps = static_cast<int>(std::ceil(cfg.total_time / cfg.h - 1e-12));
    for (int s = 0; s < steps; ++s) {
        VecX rhs = mass.cwiseProduct(u) + cfg.h * f;
        u = solver.solve(rhs);
        const double resid = (system * u - rhs).norm();
        if (!(resid <= 1e-10 * std::max(1.0, rhs.norm())))
            throw SolverDiverged("heat solve residual " + std::to_string(resid));
    }
    return u;
}

struct ColdestPoint {
    int index = 0;
    Vec3 position = Vec3::Zero();
    double temperature = 0.0;
};

inline ColdestPoint coldest_point(const VecX& u, const std::vector<Vec3>& points) {
    if (u.size() < 1 || points.size() != static_cast<size_t>(u.size()))
        throw ConfigError("coldest_point needs matching non-empty inputs");
    int best = 0;
    for (Eigen::Index i = 1; i < u.size(); ++i)
        if (u[i] < u[best]) best = static_cast<int>(i);  // ties keep lowest index
    return {best, points[best], u[best]};
}

}  // namespace nbv
