#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "nbv/common.hpp"

namespace nbv {

// Regular scalar samples over the cube [-extent, extent]^3 with trilinear
// interpolation. Values are stored as float: the fields we cache here have
// amplitudes well below 1, so float keeps the cache small (n=100 -> 4 MB)
// at ~1e-7 absolute error.
struct GridScalarField {
    int n = 0;
    double extent = 0.0;
    std::vector<float> values;  // index (ix * n + iy) * n + iz

    // Optional ray-march acceleration: a box guaranteed to contain every sign
    // change of the interpolant (an inverted box means "no sign changes").
    // Unset = unknown, so marchers must sweep the whole domain.
    std::optional<std::pair<Vec3, Vec3>> crossing_bounds;

    GridScalarField() = default;
    GridScalarField(int n_, double extent_) : n(n_), extent(extent_) {
        if (n < 2 || extent <= 0.0) throw ConfigError("grid needs n >= 2 and extent > 0");
        values.assign(static_cast<size_t>(n) * n * n, 0.0f);
    }

    double spacing() const { return 2.0 * extent / (n - 1); }

    size_t idx(int ix, int iy, int iz) const {
        return (static_cast<size_t>(ix) * n + iy) * n + iz;
    }
    float& at(int ix, int iy, int iz) { return values[idx(ix, iy, iz)]; }
    float at(int ix, int iy, int iz) const { return values[idx(ix, iy, iz)]; }

    Vec3 node_position(int ix, int iy, int iz) const {
        const double h = spacing();
        return {-extent + ix * h, -extent + iy * h, -extent + iz * h};
    }

    bool contains(const Vec3& p) const {
        return std::abs(p.x()) <= extent && std::abs(p.y()) <= extent &&
               std::abs(p.z()) <= extent;
    }

    // Trilinear interpolation; queries are clamped to the box.
    double value(const Vec3& p) const {
        double tx, ty, tz;
        int ix = cell(p.x(), tx), iy = cell(p.y(), ty), iz = cell(p.z(), tz);
        const double c000 = at(ix, iy, iz), c100 = at(ix + 1, iy, iz);
        const double c010 = at(ix, iy + 1, iz), c110 = at(ix + 1, iy + 1, iz);
        const double c001 = at(ix, iy, iz + 1), c101 = at(ix + 1, iy, iz + 1);
        const double c011 = at(ix, iy + 1, iz + 1), c111 = at(ix + 1, iy + 1, iz + 1);
        const double c00 = c000 + (c100 - c000) * tx;
        const double c10 = c010 + (c110 - c010) * tx;
        const double c01 = c001 + (c101 - c001) * tx;
        const double c11 = c011 + (c111 - c011) * tx;
        const double c0 = c00 + (c10 - c00) * ty;
        const double c1 = c01 + (c11 - c01) * ty;
        return c0 + (c1 - c0) * tz;
    }

    // Computes crossing_bounds as the bounding box of the minority-sign nodes
    // dilated by one cell. Any cell with mixed corner signs has at least one
    // minority-sign corner, so the dilated box contains every zero crossing
    // of the trilinear interpolant.
    void compute_crossing_bounds() {
        int n_pos = 0;
        for (float v : values)
            if (v > 0.0f) ++n_pos;
        const bool minority_positive = 2 * n_pos <= n * n * n;
        int lo[3] = {n, n, n}, hi[3] = {-1, -1, -1};
        size_t k = 0;
        for (int ix = 0; ix < n; ++ix)
            for (int iy = 0; iy < n; ++iy)
                for (int iz = 0; iz < n; ++iz, ++k) {
                    const bool pos = values[k] > 0.0f;
                    if (pos != minority_positive) continue;
                    const int c[3] = {ix, iy, iz};
                    for (int a = 0; a < 3; ++a) {
                        lo[a] = std::min(lo[a], c[a]);
                        hi[a] = std::max(hi[a], c[a]);
                    }
                }
        if (hi[0] < 0) {  // single-signed field: inverted box, nothing to hit
            crossing_bounds = std::make_pair(Vec3(1, 1, 1), Vec3(-1, -1, -1));
            return;
        }
        const double h = spacing();
        Vec3 blo, bhi;
        for (int a = 0; a < 3; ++a) {
            blo[a] = std::max(-extent, -extent + (lo[a] - 1) * h);
            bhi[a] = std::min(extent, -extent + (hi[a] + 1) * h);
        }
        crossing_bounds = std::make_pair(blo, bhi);
    }

    // Central differences of the interpolant at half-spacing; adequate for
    // hit-point normals.
    Vec3 gradient(const Vec3& p) const {
        const double h = 0.5 * spacing();
        Vec3 g;
        for (int a = 0; a < 3; ++a) {
            Vec3 lo = p, hi = p;
            lo[a] -= h;
            hi[a] += h;
            g[a] = (value(hi) - value(lo)) / (2.0 * h);
        }
        return g;
    }

  private:
    int cell(double x, double& t) const {
        const double g = (x + extent) / spacing();
        int i = static_cast<int>(std::floor(g));
        i = std::max(0, std::min(n - 2, i));
        t = std::max(0.0, std::min(1.0, g - i));
        return i;
    }
};

}  // namespace nbv
