#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "nbv/class_distribution.hpp"
#include "nbv/common.hpp"
#include "nbv/gp.hpp"
#include "nbv/kdtree.hpp"
#include "nbv/point_cloud.hpp"
#include "nbv/scanner.hpp"
#include "nbv/tasks.hpp"

namespace nbv {

// Task utility: scalar score of a point cloud, closed over its task model.
using UtilityFn = std::function<double(const OrientedPointCloud&)>;

// Exact Gaussian expected improvement E max(0, X - y_best), X ~ N(mu, sigma^2).
inline double expected_improvement_closed_form(double mu, double sigma,
                                               double y_best) {
    if (sigma < 0) throw ConfigError("expected improvement needs sigma >= 0");
    const double gap = mu - y_best;
    if (sigma == 0) return std::max(0.0, gap);
    const double z = gap / sigma;
    return gap * normal_cdf(z) + sigma * normal_pdf(z);
}

// Shared Monte-Carlo expected-improvement loop: mean over S samples of
// max(0, simulate(sample_seed, s) - u_base). Sample s draws everything from
// seed ^ s, so candidates scored with the same (seed, S) share random numbers.
template <typename SimulateFn>
double eui_core(int n_samples, uint64_t seed, double u_base, SimulateFn&& simulate) {
    if (n_samples < 1) throw ConfigError("eui needs at least one sample");
    double acc = 0;
    for (int s = 0; s < n_samples; ++s)
        acc += std::max(0.0, simulate(seed ^ static_cast<uint64_t>(s), s) - u_base);
    return acc / n_samples;
}

// Draws the per-step posterior sample set: sample s comes from seed ^ s.
// Scoring many candidates against one draw gives common random numbers.
inline std::vector<FieldSample> draw_posterior_fields(const PosteriorField& post,
                                                      int n_samples, uint64_t seed) {
    if (n_samples < 1) throw ConfigError("need at least one posterior sample");
    std::vector<FieldSample> fields;
    fields.reserve(n_samples);
    for (int s = 0; s < n_samples; ++s)
        fields.push_back(post.sample(seed ^ static_cast<uint64_t>(s)));
    return fields;
}

// alpha(theta) over pre-drawn samples; sample s scans with noise seed ^ s so
// a fields vector drawn from the same seed reproduces eui_monte_carlo.
template <typename Utility>
double eui_over_samples(Utility&& u, const std::vector<FieldSample>& fields,
                        const OrientedPointCloud& d_t, const CameraPose& pose,
                        const ScanConfig& cfg, uint64_t seed, int threads = 1) {
    const double u_base = u(d_t);
    return eui_core(static_cast<int>(fields.size()), seed, u_base,
                    [&](uint64_t s_seed, int s) {
                        OrientedPointCloud merged = d_t;
                        merged.append(scan(fields[s], pose, cfg, s_seed, threads));
                        return u(merged);
                    });
}

// alpha(theta) = E max(0, u(D ∪ scan(theta; f_s)) - u(D)) over posterior
// samples f_s. u(D) is evaluated once and shared across samples.
template <typename Utility>
double eui_monte_carlo(Utility&& u, const PosteriorField& post,
                       const OrientedPointCloud& d_t, const CameraPose& pose,
                       const ScanConfig& cfg, int n_samples, uint64_t seed,
                       int threads = 1) {
    return eui_over_samples(std::forward<Utility>(u),
                            draw_posterior_fields(post, n_samples, seed), d_t, pose,
                            cfg, seed, threads);
}

// ------------------------------------------------------------ utilities ----

// Negated Shannon entropy: sum_c p_c log p_c in [-log C, 0], 0 log 0 := 0.
inline double utility_entropy(const ClassDistribution& d) {
    double acc = 0;
    for (Eigen::Index c = 0; c < d.probs.size(); ++c)
        if (d.probs[c] > 0) acc += d.probs[c] * std::log(d.probs[c]);
    return acc;
}

// Saturating per-class soft count: sum_c tanh((1/N_target) sum_i p_ic).
inline double utility_softcount(const std::vector<ClassDistribution>& dists,
                                double n_target, int n_classes) {
    if (n_target < 1) throw ConfigError("softcount needs N_target >= 1");
    if (n_classes < 2) throw ConfigError("softcount needs >= 2 classes");
    VecX totals = VecX::Zero(n_classes);
    for (const ClassDistribution& d : dists) {
        if (d.n_classes() != n_classes)
            throw ConfigError("softcount: distribution class count mismatch");
        totals += d.probs;
    }
    double acc = 0;
    for (int c = 0; c < n_classes; ++c) acc += std::tanh(totals[c] / n_target);
    return acc;
}

// Heat probe score: run the diffusion pipeline on the cloud and negate the
// minimum final temperature (cold spots lower the score until discovered).
inline double utility_heat(const OrientedPointCloud& d, const HeatConfig& cfg) {
    if (cfg.k_neighbors < 3) throw ConfigError("heat utility needs k_neighbors >= 3");
    if (d.size() < static_cast<size_t>(cfg.k_neighbors) + 1)
        throw InsufficientPoints("heat utility needs k_neighbors + 1 points");
    std::vector<Vec3> pts = d.positions;
    if (cfg.max_points > 0 && pts.size() > cfg.max_points) {
        OrientedPointCloud slim = decimate_to(d, cfg.max_points);
        pts = std::move(slim.positions);
    }
    GraphLaplacian graph = knn_graph_laplacian(pts, cfg.k_neighbors, cfg.bandwidth);
    VecX u = heat_solve(pts, graph, cfg);
    return -u.minCoeff();
}

// ------------------------------------------------- direct acquisitions ----

// alpha^CE = -E sum_c p_c^t log p_c^{t+1}: expected cross entropy between the
// current prediction and the prediction after a simulated scan.
template <typename Classifier>
double cross_entropy_over_samples(const Classifier& classifier,
                                  const std::vector<FieldSample>& fields,
                                  const OrientedPointCloud& d_t,
                                  const CameraPose& pose, const ScanConfig& cfg,
                                  uint64_t seed, int threads = 1) {
    if (fields.empty()) throw ConfigError("cross entropy needs at least one sample");
    const ClassDistribution p_now = classifier.classify(d_t);
    double acc = 0;
    for (size_t s = 0; s < fields.size(); ++s) {
        const uint64_t s_seed = seed ^ static_cast<uint64_t>(s);
        OrientedPointCloud merged = d_t;
        merged.append(scan(fields[s], pose, cfg, s_seed, threads));
        const ClassDistribution p_next = classifier.classify(merged);
        for (Eigen::Index c = 0; c < p_now.probs.size(); ++c)
            acc -= p_now.probs[c] * std::log(std::max(p_next.probs[c], 1e-12));
    }
    return acc / static_cast<double>(fields.size());
}

template <typename Classifier>
double acq_cross_entropy(const Classifier& classifier, const PosteriorField& post,
                         const OrientedPointCloud& d_t, const CameraPose& pose,
                         const ScanConfig& cfg, int n_samples, uint64_t seed,
                         int threads = 1) {
    return cross_entropy_over_samples(classifier,
                                      draw_posterior_fields(post, n_samples, seed),
                                      d_t, pose, cfg, seed, threads);
}

// Summed squared distance from each point to its nearest neighbor in `to`.
inline double chamfer_sum(const std::vector<Vec3>& from, const KdTree& to) {
    double acc = 0;
    for (const Vec3& p : from) acc += to.nearest(p).d2;
    return acc;
}

// alpha^CD = E sum_{x in scan} min_{y in D} ||x - y||^2: expected coverage
// gain of a candidate, measured against the existing cloud only. The caller
// may pass a prebuilt tree over d_t.positions to share it across candidates.
inline double chamfer_over_samples(const std::vector<FieldSample>& fields,
                                   const KdTree& d_t_tree, const CameraPose& pose,
                                   const ScanConfig& cfg, uint64_t seed,
                                   int threads = 1) {
    if (fields.empty()) throw ConfigError("chamfer needs at least one sample");
    double acc = 0;
    for (size_t s = 0; s < fields.size(); ++s) {
        const uint64_t s_seed = seed ^ static_cast<uint64_t>(s);
        acc += chamfer_sum(scan(fields[s], pose, cfg, s_seed, threads).positions,
                           d_t_tree);
    }
    return acc / static_cast<double>(fields.size());
}

inline double acq_chamfer(const PosteriorField& post, const OrientedPointCloud& d_t,
                          const CameraPose& pose, const ScanConfig& cfg,
                          int n_samples, uint64_t seed, int threads = 1) {
    if (d_t.empty()) throw InsufficientPoints("chamfer needs a non-empty cloud");
    return chamfer_over_samples(draw_posterior_fields(post, n_samples, seed),
                                KdTree(d_t.positions), pose, cfg, seed, threads);
}

// --------------------------------------------------- utility factories ----

template <typename Classifier>
UtilityFn make_entropy_utility(Classifier classifier) {
    return [c = std::move(classifier)](const OrientedPointCloud& d) {
        return utility_entropy(c.classify(d));
    };
}

template <typename Segmenter>
UtilityFn make_softcount_utility(Segmenter segmenter, double n_target) {
    return [s = std::move(segmenter), n_target](const OrientedPointCloud& d) {
        return utility_softcount(s.segment(d), n_target, s.n_classes());
    };
}

inline UtilityFn make_heat_utility(HeatConfig cfg) {
    return [cfg = std::move(cfg)](const OrientedPointCloud& d) {
        return utility_heat(d, cfg);
    };
}

}  // namespace nbv
