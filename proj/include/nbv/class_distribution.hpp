#pragma once

#include <cmath>
#include <vector>

#include "nbv/common.hpp"

namespace nbv {

struct ClassDistribution {
    VecX probs;

    ClassDistribution() = default;
    explicit ClassDistribution(VecX p) : probs(std::move(p)) {}
    ClassDistribution(std::initializer_list<double> p)
        : probs(Eigen::Map<const VecX>(p.begin(), p.size())) {}

    int n_classes() const { return static_cast<int>(probs.size()); }

    void validate(double tol = 1e-9) const {
        if (probs.size() < 2) throw ConfigError("class distribution needs C >= 2");
        if (probs.minCoeff() < -tol || std::abs(probs.sum() - 1.0) > tol)
            throw ConfigError("class distribution is not on the simplex");
    }
};

inline int predicted_label(const ClassDistribution& d) {
    int best = 0;
    for (int c = 1; c < d.n_classes(); ++c)
        if (d.probs[c] > d.probs[best]) best = c;  // ties keep the lowest index
    return best;
}

}  // namespace nbv
