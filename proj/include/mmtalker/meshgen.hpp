#pragma once

#include <cmath>

#include "mmtalker/mesh.hpp"

namespace mmtalker {

// Regular nx-by-ny planar grid in the z = 0 plane spanning [0,w] x [0,h].
inline Mesh make_grid_mesh(int nx, int ny, double w = 1.0, double h = 1.0) {
    Mesh mesh;
    mesh.vertices.resize(static_cast<Eigen::Index>(nx) * ny, 3);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const Eigen::Index v = static_cast<Eigen::Index>(j) * nx + i;
            mesh.vertices(v, 0) = w * i / (nx - 1);
            mesh.vertices(v, 1) = h * j / (ny - 1);
            mesh.vertices(v, 2) = 0.0;
        }
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            const int a = j * nx + i;
            const int b = j * nx + i + 1;
            const int c = (j + 1) * nx + i + 1;
            const int d = (j + 1) * nx + i;
            mesh.faces.push_back({a, b, c});
            mesh.faces.push_back({a, c, d});
        }
    return mesh;
}

// Spherical cap of the unit sphere around +z, opened at polar angle
// theta_max. One apex vertex plus `rings` rings of `sectors` vertices; the
// outermost ring is the single boundary loop, so the cap is a disk.
inline Mesh make_cap_mesh(int rings, int sectors, double theta_max = M_PI / 2.0) {
    Mesh mesh;
    mesh.vertices.resize(1 + static_cast<Eigen::Index>(rings) * sectors, 3);
    mesh.vertices.row(0) << 0.0, 0.0, 1.0;  // apex
    for (int r = 0; r < rings; ++r) {
        const double theta = theta_max * (r + 1) / rings;
        for (int s = 0; s < sectors; ++s) {
            const double phi = 2.0 * M_PI * s / sectors;
            const Eigen::Index v = 1 + static_cast<Eigen::Index>(r) * sectors + s;
            mesh.vertices(v, 0) = std::sin(theta) * std::cos(phi);
            mesh.vertices(v, 1) = std::sin(theta) * std::sin(phi);
            mesh.vertices(v, 2) = std::cos(theta);
        }
    }
    // consistent winding throughout (CCW seen from outside the sphere)
    auto ring_vertex = [&](int r, int s) { return 1 + r * sectors + (s % sectors); };
    for (int s = 0; s < sectors; ++s)  // apex fan
        mesh.faces.push_back({0, ring_vertex(0, s), ring_vertex(0, s + 1)});
    for (int r = 0; r + 1 < rings; ++r)
        for (int s = 0; s < sectors; ++s) {
            const int a = ring_vertex(r, s);
            const int b = ring_vertex(r, s + 1);
            const int c = ring_vertex(r + 1, s + 1);
            const int d = ring_vertex(r + 1, s);
            mesh.faces.push_back({a, d, c});
            mesh.faces.push_back({a, c, b});
        }
    return mesh;
}

// Cap sized to roughly n_target vertices (1 + rings * sectors with
// sectors = 2 * rings).
inline Mesh make_cap_mesh_with_target(int n_target, double theta_max = M_PI / 2.0) {
    int rings = std::max(1, static_cast<int>(std::lround(std::sqrt((n_target - 1) / 2.0))));
    int sectors = std::max(3, 2 * rings);
    return make_cap_mesh(rings, sectors, theta_max);
}

// Closed octahedron; the canonical non-disk test input.
inline Mesh make_octahedron() {
    Mesh mesh;
    mesh.vertices.resize(6, 3);
    mesh.vertices << 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0, 1, 0, 0, -1;
    mesh.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                  {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return mesh;
}

}  // namespace mmtalker
