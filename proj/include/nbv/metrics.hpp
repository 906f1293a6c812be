#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "nbv/common.hpp"
#include "nbv/kdtree.hpp"
#include "nbv/point_cloud.hpp"

namespace nbv {

// 1-indexed step numbers; empty optionals mean "never achieved".
struct HitTimes {
    std::optional<int> first;
    std::optional<int> stable;  // earliest step after which every prediction is right
};

inline HitTimes first_and_stable_hit(const std::vector<int>& predictions, int truth) {
    if (predictions.empty()) throw ConfigError("need at least one prediction");
    HitTimes out;
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == truth) {
            out.first = static_cast<int>(i + 1);
            break;
        }
    }
    for (size_t i = predictions.size(); i-- > 0;) {
        if (predictions[i] != truth) break;
        out.stable = static_cast<int>(i + 1);
    }
    return out;
}

// First step at which every class holds at least n_target points.
inline std::optional<int> discovery_time(
    const std::vector<std::vector<double>>& per_step_counts, double n_target,
    int n_classes) {
    if (per_step_counts.empty()) throw ConfigError("need at least one step of counts");
    for (size_t t = 0; t < per_step_counts.size(); ++t) {
        const auto& counts = per_step_counts[t];
        if (static_cast<int>(counts.size()) != n_classes)
            throw ConfigError("per-class count size mismatch");
        if (*std::min_element(counts.begin(), counts.end()) >= n_target)
            return static_cast<int>(t + 1);
    }
    return std::nullopt;
}

struct CloudDistance {
    double chamfer = 0;    // mean of the two directed mean squared NN distances
    double hausdorff = 0;  // max of the two directed max NN distances (unsquared)
};

inline CloudDistance chamfer_and_hausdorff(const OrientedPointCloud& a,
                                           const OrientedPointCloud& b) {
    if (a.empty() || b.empty())
        throw ConfigError("cloud distance needs two non-empty clouds");
    const auto directed = [](const OrientedPointCloud& from,
                             const OrientedPointCloud& to) {
        KdTree tree(to.positions);
        double sum = 0, worst = 0;
        for (const Vec3& p : from.positions) {
            const double d2 = tree.nearest(p).d2;
            sum += d2;
            worst = std::max(worst, d2);
        }
        return std::pair<double, double>{sum / from.size(), worst};
    };
    const auto [mean_ab, max_ab] = directed(a, b);
    const auto [mean_ba, max_ba] = directed(b, a);
    CloudDistance out;
    out.chamfer = 0.5 * (mean_ab + mean_ba);
    out.hausdorff = std::sqrt(std::max(max_ab, max_ba));
    return out;
}

inline double coldest_point_error(const Vec3& estimated, const Vec3& truth) {
    return (estimated - truth).norm();
}

// Symmetric scenes can carry several global minima; score against the nearest.
inline double coldest_point_error(const Vec3& estimated,
                                  const std::vector<Vec3>& truths) {
    if (truths.empty()) throw ConfigError("need at least one ground-truth minimum");
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& t : truths) best = std::min(best, (estimated - t).norm());
    return best;
}

// Fraction of episodes that reached their hit time by each step (1..horizon);
// curves are non-decreasing and "never" episodes stay flat at the bottom.
inline std::vector<double> cumulative_hit_fraction(
    const std::vector<std::optional<int>>& times, int horizon) {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    std::vector<double> curve(horizon, 0.0);
    if (times.empty()) return curve;
    for (int step = 1; step <= horizon; ++step) {
        int hit = 0;
        for (const auto& t : times)
            if (t && *t <= step) ++hit;
        curve[step - 1] = static_cast<double>(hit) / times.size();
    }
    return curve;
}

}  // namespace nbv
