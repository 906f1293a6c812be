#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "nbv/common.hpp"
#include "nbv/grid.hpp"
#include "nbv/point_cloud.hpp"
#include "nbv/scanner.hpp"

namespace nbv {

// Gaussian-process implicit surface model on the 3-torus.
//
// The field is a truncated random Fourier series: for each retained integer
// frequency k (canonical half-space, k = 0 excluded) there is a cos(k.s) and
// a sin(k.s) feature, s = 2 x, so the fundamental domain [-pi/2, pi/2]^3 maps
// onto one period. Feature coefficients are whitened: phi already carries
// sqrt(lambda_k), weights are standard normal a priori. Everything downstream
// (conditioning, queries, pathwise samples) is exact Bayesian linear
// regression in this basis, which is equivalent to function-space GP
// conditioning but stays O(d^2) instead of O(rows^2).

constexpr double kFreqScale = 2.0;  // d(k.s)/dx

struct BasisTables {
    std::vector<Eigen::Vector3i> freqs;
    std::vector<double> sqrt_lambda;
};

struct PriorBasis {
    double lengthscale = 0.35;
    double amplitude = 0.2;
    int k_max = 8;
    int grid_n = 100;
    double grid_extent = 1.75;
    std::shared_ptr<const BasisTables> tables;

    size_t n_freqs() const { return tables->freqs.size(); }
    size_t feature_dim() const { return 2 * tables->freqs.size(); }

    // phi(x): [sqrt(l) cos(k.s), sqrt(l) sin(k.s)] per frequency.
    void feature_row(const Vec3& x, Eigen::Ref<VecX> out) const {
        const auto& t = *tables;
        for (size_t i = 0; i < t.freqs.size(); ++i) {
            const double arg = kFreqScale * t.freqs[i].cast<double>().dot(x);
            out[2 * i] = t.sqrt_lambda[i] * std::cos(arg);
            out[2 * i + 1] = t.sqrt_lambda[i] * std::sin(arg);
        }
    }

    // Rows d(phi)/dx_j, j = 0..2, written into out (3 x dim).
    void gradient_rows(const Vec3& x, Eigen::Ref<MatX> out) const {
        const auto& t = *tables;
        for (size_t i = 0; i < t.freqs.size(); ++i) {
            const Vec3 k = t.freqs[i].cast<double>();
            const double arg = kFreqScale * k.dot(x);
            const double c = t.sqrt_lambda[i] * std::cos(arg);
            const double s = t.sqrt_lambda[i] * std::sin(arg);
            for (int j = 0; j < 3; ++j) {
                out(j, 2 * i) = -kFreqScale * k[j] * s;
                out(j, 2 * i + 1) = kFreqScale * k[j] * c;
            }
        }
    }
};

inline PriorBasis build_prior(double lengthscale, double amplitude, int k_max,
                              size_t feature_cap = 20000) {
    if (lengthscale <= 0 || amplitude <= 0 || k_max < 1)
        throw ConfigError("prior needs lengthscale > 0, amplitude > 0, k_max >= 1");
    const size_t n_side = 2 * static_cast<size_t>(k_max) + 1;
    const size_t n_features = n_side * n_side * n_side - 1;  // cos+sin per +-k pair
    if (n_features > feature_cap)
        throw FeatureBudgetExceeded("feature count " + std::to_string(n_features) +
                                    " exceeds cap " + std::to_string(feature_cap));

    auto tables = std::make_shared<BasisTables>();
    // Canonical representative of each +-k pair: first nonzero component > 0.
    for (int kx = 0; kx <= k_max; ++kx) {
        const int ky_lo = (kx == 0) ? 0 : -k_max;
        for (int ky = ky_lo; ky <= k_max; ++ky) {
            const int kz_lo = (kx == 0 && ky == 0) ? 1 : -k_max;
            for (int kz = kz_lo; kz <= k_max; ++kz)
                tables->freqs.emplace_back(kx, ky, kz);
        }
    }
    // Matern nu = 3/2 spectral density on the integer lattice, normalized so
    // the pointwise prior variance (= sum of lambda_k) is amplitude^2.
    const double base = 3.0 / (lengthscale * lengthscale);
    std::vector<double> lambda(tables->freqs.size());
    double total = 0;
    for (size_t i = 0; i < lambda.size(); ++i) {
        const double k2 = tables->freqs[i].cast<double>().squaredNorm();
        lambda[i] = std::pow(base + k2, -3.0);
        total += lambda[i];
    }
    tables->sqrt_lambda.resize(lambda.size());
    for (size_t i = 0; i < lambda.size(); ++i)
        tables->sqrt_lambda[i] = amplitude * std::sqrt(lambda[i] / total);

    PriorBasis b;
    b.lengthscale = lengthscale;
    b.amplitude = amplitude;
    b.k_max = k_max;
    b.tables = std::move(tables);
    return b;
}

// One realization of the field: f(x) = offset + phi(x).w. The grid cache is
// built on first use (scanning, meshing); plain value/gradient queries stay
// cheap for statistical tests. Build the cache from one thread before sharing.
class FieldSample {
  public:
    FieldSample() = default;
    FieldSample(PriorBasis basis, VecX weights, double offset = 0.0)
        : basis_(std::move(basis)), w_(std::move(weights)), offset_(offset) {}

    const PriorBasis& basis() const { return basis_; }
    const VecX& weights() const { return w_; }
    double offset() const { return offset_; }

    double value(const Vec3& x) const {
        const auto& t = *basis_.tables;
        double acc = offset_;
        for (size_t i = 0; i < t.freqs.size(); ++i) {
            const double arg = kFreqScale * t.freqs[i].cast<double>().dot(x);
            acc += t.sqrt_lambda[i] *
                   (w_[2 * i] * std::cos(arg) + w_[2 * i + 1] * std::sin(arg));
        }
        return acc;
    }

    Vec3 gradient(const Vec3& x) const {
        const auto& t = *basis_.tables;
        Vec3 g = Vec3::Zero();
        for (size_t i = 0; i < t.freqs.size(); ++i) {
            const Vec3 k = t.freqs[i].cast<double>();
            const double arg = kFreqScale * k.dot(x);
            const double d =
                kFreqScale * t.sqrt_lambda[i] *
                (-w_[2 * i] * std::sin(arg) + w_[2 * i + 1] * std::cos(arg));
            g += d * k;
        }
        return g;
    }

    const GridScalarField& grid() const {
        if (!grid_) grid_ = std::make_shared<GridScalarField>(build_grid());
        return *grid_;
    }

  private:
    // Separable evaluation over grid nodes. Fold each +-k pair into one
    // complex coefficient C_k = sqrt(l) (a - i b); then f = offset +
    // Re sum_k C_k exp(i k.s), reduced one axis at a time.
    GridScalarField build_grid() const {
        const int n = basis_.grid_n, K = basis_.k_max, m = 2 * K + 1;
        GridScalarField g(n, basis_.grid_extent);
        const auto& t = *basis_.tables;
        using Cd = std::complex<double>;

        std::vector<Cd> coef(static_cast<size_t>(m) * m * m, Cd(0, 0));
        auto cidx = [&](const Eigen::Vector3i& k) {
            return (static_cast<size_t>(k.x() + K) * m + (k.y() + K)) * m + (k.z() + K);
        };
        for (size_t i = 0; i < t.freqs.size(); ++i)
            coef[cidx(t.freqs[i])] = t.sqrt_lambda[i] * Cd(w_[2 * i], -w_[2 * i + 1]);

        // Per-axis twiddles e^{i k s(node)} for k = -K..K.
        std::vector<Cd> tw(static_cast<size_t>(m) * n);
        for (int a = 0; a < n; ++a) {
            const double s = kFreqScale * (-g.extent + a * g.spacing());
            for (int k = -K; k <= K; ++k)
                tw[static_cast<size_t>(k + K) * n + a] = std::polar(1.0, k * s);
        }

        std::vector<Cd> t1(static_cast<size_t>(m) * m * n, Cd(0, 0));  // [kx, ky, c]
        for (int kx = 0; kx < m; ++kx)
            for (int ky = 0; ky < m; ++ky)
                for (int kz = 0; kz < m; ++kz) {
                    const Cd c = coef[(static_cast<size_t>(kx) * m + ky) * m + kz];
                    if (c == Cd(0, 0)) continue;
                    Cd* dst = &t1[(static_cast<size_t>(kx) * m + ky) * n];
                    const Cd* w = &tw[static_cast<size_t>(kz) * n];
                    for (int a = 0; a < n; ++a) dst[a] += c * w[a];
                }
        std::vector<Cd> t2(static_cast<size_t>(m) * n * n, Cd(0, 0));  // [kx, b, c]
        for (int kx = 0; kx < m; ++kx)
            for (int ky = 0; ky < m; ++ky) {
                const Cd* src = &t1[(static_cast<size_t>(kx) * m + ky) * n];
                const Cd* w = &tw[static_cast<size_t>(ky) * n];
                for (int b = 0; b < n; ++b) {
                    Cd* dst = &t2[(static_cast<size_t>(kx) * n + b) * n];
                    const Cd f = w[b];
                    for (int a = 0; a < n; ++a) dst[a] += f * src[a];
                }
            }
        for (int a = 0; a < n; ++a)
            for (int kx = 0; kx < m; ++kx) {
                const Cd f = tw[static_cast<size_t>(kx) * n + a];
                for (int b = 0; b < n; ++b) {
                    const Cd* src = &t2[(static_cast<size_t>(kx) * n + b) * n];
                    float* dst = &g.values[(static_cast<size_t>(a) * n + b) * n];
                    for (int c = 0; c < n; ++c)
                        dst[c] += static_cast<float>((f * src[c]).real());
                }
            }
        if (offset_ != 0.0)
            for (float& v : g.values) v += static_cast<float>(offset_);
        g.compute_crossing_bounds();
        return g;
    }

    PriorBasis basis_;
    VecX w_;
    double offset_ = 0.0;
    mutable std::shared_ptr<GridScalarField> grid_;
};

inline FieldSample sample_prior(const PriorBasis& basis, uint64_t seed) {
    Rng rng(mix_seed(seed, 0x9b1a));
    VecX w(basis.feature_dim());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.gauss();
    return FieldSample(basis, std::move(w), 0.0);
}

inline OrientedPointCloud scan(const FieldSample& field, const CameraPose& pose,
                               const ScanConfig& cfg, uint64_t seed = 0,
                               int threads = 1) {
    return scan(field.grid(), pose, cfg, seed, threads);
}

struct GpOptions {
    double sigma_v = 1e-3;       // noise on the zero value observations
    double sigma_n = 1e-2;       // noise per gradient component
    double gradient_scale = 1.0;  // target |grad f| at the surface
    double mean_offset = -0.35;  // constant prior mean; < 0 keeps empty space off
    size_t max_obs_rows = 8000;  // decimate clouds past this (4 rows per point)
};

// Exact posterior over the feature weights. With whitened rows B = N^{-1/2} Phi
// and targets z = N^{-1/2}(y - m), the posterior is N(A^{-1} B^T z, A^{-1}),
// A = I + B^T B.
class PosteriorField {
  public:
    PosteriorField(PriorBasis basis, GpOptions opts, MatX b_rows, VecX z)
        : basis_(std::move(basis)), opts_(opts), b_(std::move(b_rows)), z_(std::move(z)) {
        const Eigen::Index d = static_cast<Eigen::Index>(basis_.feature_dim());
        MatX a = MatX::Identity(d, d);
        // Zero observation rows = the prior itself; Eigen's rank update
        // divides by the depth, so skip it rather than feed it k = 0.
        if (b_.rows() > 0) a.selfadjointView<Eigen::Lower>().rankUpdate(b_.transpose());
        double jitter = 0.0;
        while (true) {
            llt_.compute(a + jitter * MatX::Identity(d, d));
            if (llt_.info() == Eigen::Success) break;
            jitter = (jitter == 0.0) ? 1e-10 : jitter * 10.0;
            if (jitter > 1e-6) throw IllConditioned("posterior Gram factorization failed");
        }
        mean_w_ = (b_.rows() > 0) ? VecX(llt_.solve(b_.transpose() * z_))
                                  : VecX(VecX::Zero(d));
    }

    const PriorBasis& basis() const { return basis_; }
    const GpOptions& options() const { return opts_; }
    size_t n_rows() const { return static_cast<size_t>(b_.rows()); }

    VecX posterior_mean(const std::vector<Vec3>& points) const {
        MatX phi = features(points);
        return (phi * mean_w_).array() + opts_.mean_offset;
    }

    VecX posterior_variance(const std::vector<Vec3>& points) const {
        MatX phi = features(points);
        MatX sol = llt_.solve(phi.transpose());
        VecX out(phi.rows());
        for (Eigen::Index i = 0; i < phi.rows(); ++i)
            out[i] = std::max(0.0, phi.row(i).dot(sol.col(i)));
        return out;
    }

    MatX posterior_cov(const std::vector<Vec3>& points) const {
        MatX phi = features(points);
        return phi * llt_.solve(phi.transpose());
    }

    double posterior_mean_at(const Vec3& p) const {
        return posterior_mean(std::vector<Vec3>{p})[0];
    }
    double posterior_variance_at(const Vec3& p) const {
        return posterior_variance(std::vector<Vec3>{p})[0];
    }

    // Matheron pathwise sample: w = wt + A^{-1} B^T (z - B wt - eps), with
    // prior draw wt ~ N(0, I) and whitened noise eps ~ N(0, I_rows). Its
    // distribution is exactly N(A^{-1} B^T z, A^{-1}).
    FieldSample sample(uint64_t seed) const {
        Rng rng(mix_seed(seed, 0x3a7e));
        VecX wt(b_.cols());
        for (Eigen::Index i = 0; i < wt.size(); ++i) wt[i] = rng.gauss();
        VecX eps(b_.rows());
        for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.gauss();
        VecX w = (b_.rows() > 0)
                     ? VecX(wt + llt_.solve(b_.transpose() * (z_ - b_ * wt - eps)))
                     : wt;
        return FieldSample(basis_, std::move(w), opts_.mean_offset);
    }

    FieldSample mean_field() const {
        return FieldSample(basis_, mean_w_, opts_.mean_offset);
    }

  private:
    MatX features(const std::vector<Vec3>& points) const {
        MatX phi(points.size(), basis_.feature_dim());
        VecX row(phi.cols());
        for (size_t i = 0; i < points.size(); ++i) {
            basis_.feature_row(points[i], row);
            phi.row(i) = row;
        }
        return phi;
    }

    PriorBasis basis_;
    GpOptions opts_;
    MatX b_;
    VecX z_;
    Eigen::LLT<MatX> llt_;
    VecX mean_w_;
};

// Value-only conditioning (used by tests and diagnostics).
inline PosteriorField condition_values(const PriorBasis& basis,
                                       const std::vector<Vec3>& points,
                                       const VecX& values, double sigma_v,
                                       GpOptions opts = {}) {
    if (points.empty()) throw ConfigError("condition needs at least one observation");
    if (sigma_v <= 0) throw ConfigError("sigma_v must be positive");
    opts.sigma_v = sigma_v;
    const size_t d = basis.feature_dim();
    MatX b(points.size(), d);
    VecX z(points.size());
    VecX row(d);
    for (size_t i = 0; i < points.size(); ++i) {
        basis.feature_row(points[i], row);
        b.row(i) = row / sigma_v;
        z[i] = (values[static_cast<Eigen::Index>(i)] - opts.mean_offset) / sigma_v;
    }
    return PosteriorField(basis, opts, std::move(b), std::move(z));
}

// Full observation model: per point one value row f(x) = 0 and three gradient
// rows grad f(x) = -g n (n faces the camera, so the field grows toward the
// occupied side).
inline PosteriorField condition(const PriorBasis& basis, const OrientedPointCloud& cloud,
                                double sigma_v, double sigma_n, GpOptions opts = {}) {
    if (cloud.empty()) throw ConfigError("condition needs a non-empty cloud");
    if (sigma_v <= 0 || sigma_n <= 0) throw ConfigError("noise scales must be positive");
    opts.sigma_v = sigma_v;
    opts.sigma_n = sigma_n;

    const OrientedPointCloud* used = &cloud;
    OrientedPointCloud reduced;
    if (4 * cloud.size() > opts.max_obs_rows) {
        reduced = decimate_to(cloud, opts.max_obs_rows / 4);
        used = &reduced;
    }

    const size_t n = used->size(), d = basis.feature_dim();
    MatX b(4 * n, d);
    VecX z(4 * n);
    VecX vrow(d);
    MatX grow(3, d);
    for (size_t i = 0; i < n; ++i) {
        const Vec3& x = used->positions[i];
        basis.feature_row(x, vrow);
        b.row(4 * i) = vrow / opts.sigma_v;
        z[4 * i] = (0.0 - opts.mean_offset) / opts.sigma_v;
        basis.gradient_rows(x, grow);
        const Vec3 target = -opts.gradient_scale * used->normals[i];
        for (int j = 0; j < 3; ++j) {
            b.row(4 * i + 1 + j) = grow.row(j) / opts.sigma_n;
            z[4 * i + 1 + j] = target[j] / opts.sigma_n;
        }
    }
    return PosteriorField(basis, opts, std::move(b), std::move(z));
}

}  // namespace nbv
