#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "nbv/camera.hpp"
#include "nbv/common.hpp"
#include "nbv/grid.hpp"
#include "nbv/point_cloud.hpp"
#include "nbv/scene.hpp"

namespace nbv {

namespace detail {

struct Frustum {
    Vec3 origin, forward, right, up;
    double half_w = 0, half_h = 0;  // image-plane half extents at unit depth
    int w = 0, h = 0;

    // Row-major pixel rays, row 0 at the top of the image.
    Vec3 ray_dir(int row, int col) const {
        const double x = (2.0 * (col + 0.5) / w - 1.0) * half_w;
        const double y = (1.0 - 2.0 * (row + 0.5) / h) * half_h;
        return (forward + x * right + y * up).normalized();
    }

    bool projects_inside(const Vec3& p, double tol = 1e-9) const {
        const Vec3 v = p - origin;
        const double z = v.dot(forward);
        if (z <= 0) return false;
        return std::abs(v.dot(right) / z) <= half_w + tol &&
               std::abs(v.dot(up) / z) <= half_h + tol;
    }
};

inline Frustum make_frustum(const CameraPose& pose, const ScanConfig& cfg) {
    if (cfg.fov_degrees <= 0 || cfg.fov_degrees >= 180)
        throw ConfigError("fov_degrees must lie in (0, 180)");
    if (cfg.res_w < 1 || cfg.res_h < 1) throw ConfigError("resolution must be >= 1x1");
    const CameraPose::Frame f = pose.frame();
    Frustum fr;
    fr.origin = pose.position;
    fr.forward = f.forward;
    fr.right = f.right;
    fr.up = f.up;
    fr.w = cfg.res_w;
    fr.h = cfg.res_h;
    // fov spans the image width; height scales by aspect so pixels stay square.
    fr.half_w = std::tan(0.5 * deg2rad(cfg.fov_degrees));
    fr.half_h = fr.half_w * (static_cast<double>(cfg.res_h) / cfg.res_w);
    return fr;
}

struct RayHit {
    Vec3 point;
    Vec3 normal;
};

// Sphere tracing. CSG of 1-Lipschitz bounds never oversteps the surface, so
// marching by the field value is safe; we keep stepping well past the 1e-4
// acceptance threshold so grazing rays still land within 1e-4 of the true
// depth.
inline std::optional<RayHit> trace_scene_ray(const Scene& scene, const Vec3& o,
                                             const Vec3& d, double max_range) {
    constexpr int kMaxSteps = 256;
    constexpr double kAccept = 1e-4;
    constexpr double kTarget = 1e-7;
    double t = 0.0;
    double f = scene.sdf(o);
    for (int step = 0; step < kMaxSteps; ++step) {
        if (f < 0) {  // crossed inside (inexact CSG bound); bisect back out
            double lo = std::max(0.0, t + f), hi = t;
            for (int i = 0; i < 60 && hi - lo > 1e-12; ++i) {
                const double mid = 0.5 * (lo + hi);
                (scene.sdf(o + mid * d) > 0 ? lo : hi) = mid;
            }
            t = 0.5 * (lo + hi);
            f = scene.sdf(o + t * d);
            break;
        }
        if (f < kTarget) break;
        t += f;
        if (t > max_range) return std::nullopt;
        f = scene.sdf(o + t * d);
    }
    if (std::abs(f) > kAccept || t > max_range) return std::nullopt;
    const Vec3 p = o + t * d;
    return RayHit{p, sdf_normal(scene, p)};
}

// Fixed-step march at half the grid spacing, then bisection of the bracketing
// interval down to 1e-4 along the ray. Works for either sign convention: any
// sign change counts and the normal is oriented afterwards.
inline std::optional<RayHit> trace_grid_ray(const GridScalarField& g, const Vec3& o,
                                            const Vec3& d, double max_range) {
    // Slab intersection with the crossing bounds when known (no zero of the
    // field lies outside them, so clipping cannot change the result), else
    // with the whole grid box.
    const Vec3 box_lo = g.crossing_bounds ? g.crossing_bounds->first
                                          : Vec3::Constant(-g.extent);
    const Vec3 box_hi = g.crossing_bounds ? g.crossing_bounds->second
                                          : Vec3::Constant(g.extent);
    double t0 = 0.0, t1 = max_range;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < box_lo[a] || o[a] > box_hi[a]) return std::nullopt;
            continue;
        }
        double lo = (box_lo[a] - o[a]) / d[a];
        double hi = (box_hi[a] - o[a]) / d[a];
        if (lo > hi) std::swap(lo, hi);
        t0 = std::max(t0, lo);
        t1 = std::min(t1, hi);
    }
    if (t0 >= t1) return std::nullopt;

    const double step = 0.5 * g.spacing();
    double tp = t0;
    double fp = g.value(o + tp * d);
    while (tp < t1) {
        const double tc = std::min(tp + step, t1);
        const double fc = g.value(o + tc * d);
        if (fp == 0.0 || fp * fc < 0.0) {
            double lo = tp, hi = tc;
            if (fp == 0.0) hi = tp;
            while (hi - lo > 1e-4) {
                const double mid = 0.5 * (lo + hi);
                const double fm = g.value(o + mid * d);
                if (fm == 0.0) {
                    lo = hi = mid;
                    break;
                }
                (fm * fp > 0 ? lo : hi) = mid;
            }
            const Vec3 p = o + 0.5 * (lo + hi) * d;
            const Vec3 grad = g.gradient(p);
            if (grad.norm() < 1e-12) return std::nullopt;
            return RayHit{p, grad.normalized()};
        }
        tp = tc;
        fp = fc;
    }
    return std::nullopt;
}

// Newton projection of a jittered point back onto the zero set.
template <typename ValueFn, typename GradFn>
inline bool project_to_surface(Vec3& p, ValueFn&& value, GradFn&& grad) {
    for (int i = 0; i < 16; ++i) {
        const double f = value(p);
        if (std::abs(f) < 1e-6) return true;
        const Vec3 gvec = grad(p);
        const double g2 = gvec.squaredNorm();
        if (g2 < 1e-18) return false;
        p -= (f / g2) * gvec;
    }
    return std::abs(value(p)) < 1e-3;
}

template <typename TraceFn, typename ValueFn, typename GradFn>
OrientedPointCloud scan_impl(const CameraPose& pose, const ScanConfig& cfg,
                             uint64_t seed, int threads, TraceFn&& trace,
                             ValueFn&& value, GradFn&& grad) {
    const Frustum fr = make_frustum(pose, cfg);
    const size_t npix = static_cast<size_t>(fr.w) * fr.h;
    std::vector<char> hit(npix, 0);
    std::vector<Vec3> pts(npix), nrms(npix);

    parallel_for(npix, threads, [&](size_t i) {
        const int row = static_cast<int>(i) / fr.w;
        const int col = static_cast<int>(i) % fr.w;
        const Vec3 d = fr.ray_dir(row, col);
        std::optional<RayHit> h = trace(fr.origin, d);
        if (!h) return;
        Vec3 p = h->point;
        Vec3 n = h->normal;
        if (cfg.noise_sigma > 0) {
            Rng rng(mix_seed(seed, i, 0x7e15));
            p += cfg.noise_sigma * rng.gauss3();
            if (!project_to_surface(p, value, grad)) return;
            const Vec3 gvec = grad(p);
            if (gvec.norm() < 1e-12) return;
            n = gvec.normalized();
        }
        if (n.dot(d) > 0) n = -n;  // face the camera
        hit[i] = 1;
        pts[i] = p;
        nrms[i] = n;
    });

    OrientedPointCloud out;
    for (size_t i = 0; i < npix; ++i)
        if (hit[i]) out.add(pts[i], nrms[i]);
    return out;
}

}  // namespace detail

inline OrientedPointCloud scan(const Scene& scene, const CameraPose& pose,
                               const ScanConfig& cfg, uint64_t seed = 0,
                               int threads = 1) {
    auto value = [&](const Vec3& p) { return scene.sdf(p); };
    auto grad = [&](const Vec3& p) {
        return sdf_normal(scene, p);  // unit length; Newton still contracts
    };
    return detail::scan_impl(
        pose, cfg, seed, threads,
        [&](const Vec3& o, const Vec3& d) {
            return detail::trace_scene_ray(scene, o, d, cfg.max_range);
        },
        value, grad);
}

inline OrientedPointCloud scan(const GridScalarField& field, const CameraPose& pose,
                               const ScanConfig& cfg, uint64_t seed = 0,
                               int threads = 1) {
    auto value = [&](const Vec3& p) { return field.value(p); };
    auto grad = [&](const Vec3& p) { return field.gradient(p); };
    return detail::scan_impl(
        pose, cfg, seed, threads,
        [&](const Vec3& o, const Vec3& d) {
            return detail::trace_grid_ray(field, o, d, cfg.max_range);
        },
        value, grad);
}

}  // namespace nbv
