#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <vector>

#include "nbv/common.hpp"
#include "nbv/gp.hpp"
#include "nbv/grid.hpp"
#include "nbv/mc_tables.hpp"
#include "nbv/point_cloud.hpp"

namespace nbv {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    bool empty_surface = false;

    size_t n_vertices() const { return vertices.size(); }
    size_t n_triangles() const { return triangles.size(); }
};

namespace detail {

// Standard 256-case marching cubes over the grid. Vertices are shared via a
// global (cell, axis) edge key, so closed level sets come out watertight.
// When keep_node is given, only cells with at least one flagged corner emit
// triangles (used for outer-surface extraction).
inline TriangleMesh mc_extract(const GridScalarField& g, double iso,
                               const std::vector<char>* keep_node) {
    TriangleMesh mesh;
    const int n = g.n;
    std::unordered_map<uint64_t, int> edge_vertex;
    edge_vertex.reserve(1024);

    // Canonical key for the edge leaving node (ix,iy,iz) along +axis.
    auto edge_key = [&](int ix, int iy, int iz, int axis) -> uint64_t {
        return ((static_cast<uint64_t>(ix) * n + iy) * n + iz) * 3 + axis;
    };
    // Map a cell-local edge (mc::edge_verts) to the canonical grid edge.
    auto key_of = [&](int cx, int cy, int cz, int edge) -> uint64_t {
        const int a = mc::edge_verts[edge][0], b = mc::edge_verts[edge][1];
        int ax = cx + mc::corner_offset[a][0], ay = cy + mc::corner_offset[a][1],
            az = cz + mc::corner_offset[a][2];
        const int bx = cx + mc::corner_offset[b][0], by = cy + mc::corner_offset[b][1],
                  bz = cz + mc::corner_offset[b][2];
        int axis = (bx != ax) ? 0 : (by != ay) ? 1 : 2;
        ax = std::min(ax, bx);
        ay = std::min(ay, by);
        az = std::min(az, bz);
        return edge_key(ax, ay, az, axis);
    };

    double corner_val[8];
    Vec3 corner_pos[8];
    for (int cx = 0; cx + 1 < n; ++cx)
        for (int cy = 0; cy + 1 < n; ++cy)
            for (int cz = 0; cz + 1 < n; ++cz) {
                int cube = 0;
                bool keep = (keep_node == nullptr);
                for (int c = 0; c < 8; ++c) {
                    const int ix = cx + mc::corner_offset[c][0];
                    const int iy = cy + mc::corner_offset[c][1];
                    const int iz = cz + mc::corner_offset[c][2];
                    corner_val[c] = g.at(ix, iy, iz);
                    corner_pos[c] = g.node_position(ix, iy, iz);
                    if (corner_val[c] < iso) cube |= 1 << c;
                    if (keep_node && (*keep_node)[g.idx(ix, iy, iz)]) keep = true;
                }
                if (!keep || mc::edge_table[cube] == 0) continue;

                int edge_to_vertex[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(mc::edge_table[cube] & (1 << e))) continue;
                    const uint64_t key = key_of(cx, cy, cz, e);
                    auto it = edge_vertex.find(key);
                    if (it == edge_vertex.end()) {
                        const int a = mc::edge_verts[e][0], b = mc::edge_verts[e][1];
                        const double va = corner_val[a], vb = corner_val[b];
                        double t = (std::abs(vb - va) < 1e-30) ? 0.5 : (iso - va) / (vb - va);
                        t = std::max(0.0, std::min(1.0, t));
                        mesh.vertices.push_back(corner_pos[a] +
                                                t * (corner_pos[b] - corner_pos[a]));
                        it = edge_vertex.emplace(key, static_cast<int>(mesh.vertices.size()) - 1)
                                 .first;
                    }
                    edge_to_vertex[e] = it->second;
                }
                for (int t = 0; mc::tri_table[cube][t] != -1; t += 3)
                    mesh.triangles.push_back({edge_to_vertex[mc::tri_table[cube][t]],
                                              edge_to_vertex[mc::tri_table[cube][t + 1]],
                                              edge_to_vertex[mc::tri_table[cube][t + 2]]});
            }
    mesh.empty_surface = mesh.triangles.empty();
    return mesh;
}

// Nodes belonging to the empty-space component that touches the domain
// boundary. "Empty" is whichever side of the iso level dominates the
// boundary, so both sign conventions (SDF grids, occupancy-style fields)
// work.
inline std::vector<char> boundary_empty_mask(const GridScalarField& g, double iso) {
    const int n = g.n;
    size_t below = 0, boundary = 0;
    for (int ix = 0; ix < n; ++ix)
        for (int iy = 0; iy < n; ++iy)
            for (int iz = 0; iz < n; ++iz) {
                if (ix != 0 && ix != n - 1 && iy != 0 && iy != n - 1 && iz != 0 &&
                    iz != n - 1)
                    continue;
                ++boundary;
                if (g.at(ix, iy, iz) < iso) ++below;
            }
    const bool empty_below = 2 * below >= boundary;
    auto is_empty = [&](int ix, int iy, int iz) {
        return (g.at(ix, iy, iz) < iso) == empty_below;
    };
    std::vector<char> mask(g.values.size(), 0);
    std::vector<std::array<int, 3>> queue;
    auto push = [&](int ix, int iy, int iz) {
        const size_t id = g.idx(ix, iy, iz);
        if (!mask[id] && is_empty(ix, iy, iz)) {
            mask[id] = 1;
            queue.push_back({ix, iy, iz});
        }
    };
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            push(0, a, b);
            push(n - 1, a, b);
            push(a, 0, b);
            push(a, n - 1, b);
            push(a, b, 0);
            push(a, b, n - 1);
        }
    while (!queue.empty()) {
        const auto [ix, iy, iz] = queue.back();
        queue.pop_back();
        if (ix > 0) push(ix - 1, iy, iz);
        if (ix + 1 < n) push(ix + 1, iy, iz);
        if (iy > 0) push(ix, iy - 1, iz);
        if (iy + 1 < n) push(ix, iy + 1, iz);
        if (iz > 0) push(ix, iy, iz - 1);
        if (iz + 1 < n) push(ix, iy, iz + 1);
    }
    return mask;
}

}  // namespace detail

inline TriangleMesh extract_mesh(const GridScalarField& g, double iso = 0.0) {
    return detail::mc_extract(g, iso, nullptr);
}

// Only the level-set sheets visible from outside the volume: cells must touch
// the boundary-connected empty region. Surface observations say nothing about
// deep interior structure, where the posterior mean reverts to its prior and
// plain marching cubes emits a spurious interior shell; scans never see that
// shell (rays stop at the first crossing), and reconstruction metrics should
// not either.
inline TriangleMesh extract_outer_mesh(const GridScalarField& g, double iso = 0.0) {
    std::vector<char> mask = detail::boundary_empty_mask(g, iso);
    return detail::mc_extract(g, iso, &mask);
}

inline TriangleMesh extract_mesh(const FieldSample& f, double iso = 0.0) {
    return extract_mesh(f.grid(), iso);
}

inline TriangleMesh extract_outer_mesh(const FieldSample& f, double iso = 0.0) {
    return extract_outer_mesh(f.grid(), iso);
}

inline TriangleMesh extract_outer_mesh(const PosteriorField& post, double iso = 0.0) {
    return extract_outer_mesh(post.mean_field().grid(), iso);
}

inline TriangleMesh extract_mesh(const PosteriorField& post, double iso = 0.0) {
    return extract_mesh(post.mean_field().grid(), iso);
}

inline void write_obj(const TriangleMesh& mesh, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    for (const Vec3& v : mesh.vertices)
        std::fprintf(f, "v %.9g %.9g %.9g\n", v.x(), v.y(), v.z());
    for (const auto& t : mesh.triangles)
        std::fprintf(f, "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
    std::fclose(f);
}

// Area-weighted uniform sampling; normals are the face normals.
inline OrientedPointCloud sample_mesh(const TriangleMesh& mesh, size_t n_points,
                                      uint64_t seed) {
    OrientedPointCloud out;
    if (mesh.triangles.empty() || n_points == 0) return out;
    std::vector<double> cum(mesh.triangles.size());
    double total = 0;
    std::vector<Vec3> face_n(mesh.triangles.size());
    for (size_t i = 0; i < mesh.triangles.size(); ++i) {
        const auto& t = mesh.triangles[i];
        const Vec3 e1 = mesh.vertices[t[1]] - mesh.vertices[t[0]];
        const Vec3 e2 = mesh.vertices[t[2]] - mesh.vertices[t[0]];
        const Vec3 c = e1.cross(e2);
        total += 0.5 * c.norm();
        cum[i] = total;
        face_n[i] = (c.norm() > 1e-30) ? Vec3(c.normalized()) : Vec3(0, 0, 1);
    }
    if (total <= 0) return out;
    Rng rng(mix_seed(seed, 0x3e5a));
    for (size_t s = 0; s < n_points; ++s) {
        const double u = rng.uniform() * total;
        const size_t i =
            std::lower_bound(cum.begin(), cum.end(), u) - cum.begin();
        const auto& t = mesh.triangles[std::min(i, mesh.triangles.size() - 1)];
        double r1 = rng.uniform(), r2 = rng.uniform();
        if (r1 + r2 > 1) {
            r1 = 1 - r1;
            r2 = 1 - r2;
        }
        out.add(mesh.vertices[t[0]] + r1 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]) +
                    r2 * (mesh.vertices[t[2]] - mesh.vertices[t[0]]),
                face_n[std::min(i, mesh.triangles.size() - 1)]);
    }
    return out;
}

}  // namespace nbv
