#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "mmtalker/errors.hpp"
#include "mmtalker/feature_container.hpp"
#include "mmtalker/mesh.hpp"

namespace mmtalker {

struct UVAtlas {
    Eigen::MatrixX2d uv;        // N x 2, normalized into [0,1]^2
    std::vector<Face> faces;    // identical index triples to the source mesh
    Eigen::Vector2d bbox_min;   // pre-normalization chart bounding box
    Eigen::Vector2d bbox_max;
    std::array<int, 2> pins = {-1, -1};  // vertices pinned during the solve

    int vertex_count() const { return static_cast<int>(uv.rows()); }
};

struct BarycentricLocation {
    int face_index = -1;
    std::array<double, 3> coords = {0.0, 0.0, 0.0};
};

// Vertex indices on boundary edges (edges with exactly one incident face),
// sorted ascending.
inline std::vector<int> boundary_vertex_indices(const std::vector<Face>& faces) {
    std::map<std::pair<int, int>, int> edge_faces;
    for (const Face& f : faces)
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            ++edge_faces[{a, b}];
        }
    std::set<int> verts;
    for (const auto& [e, cnt] : edge_faces)
        if (cnt == 1) {
            verts.insert(e.first);
            verts.insert(e.second);
        }
    return {verts.begin(), verts.end()};
}

namespace detail {

// Per-triangle complex coefficients of the discrete Cauchy-Riemann residual.
// Local frame: q1 = (0,0), q2 = (|e1|, 0), q3 = (e2.x, e2.y) with dT twice
// the triangle area. The residual row is sum_j (W_j / sqrt(dT)) * U_j with
// W_1 = q3-q2, W_2 = q1-q3, W_3 = q2-q1 read as complex numbers.
struct LscmTriangle {
    std::array<double, 3> a;  // real parts of W_j / sqrt(dT)
    std::array<double, 3> b;  // imaginary parts
};

inline LscmTriangle lscm_coefficients(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                                      const Eigen::Vector3d& p2) {
    const Eigen::Vector3d e1 = p1 - p0;
    const Eigen::Vector3d e2 = p2 - p0;
    const double len1 = e1.norm();
    if (len1 <= 0.0) throw ParseError("degenerate triangle (zero edge)");
    const Eigen::Vector3d x_axis = e1 / len1;
    const Eigen::Vector3d perp = e2 - e2.dot(x_axis) * x_axis;
    const double y2 = perp.norm();
    if (y2 <= 0.0) throw ParseError("degenerate triangle (zero area)");

    const double x2 = e2.dot(x_axis);
    const double dT = len1 * y2;  // twice the area
    const double s = 1.0 / std::sqrt(dT);

    const std::array<std::array<double, 2>, 3> q = {{{0.0, 0.0}, {len1, 0.0}, {x2, y2}}};
    LscmTriangle t;
    for (int j = 0; j < 3; ++j) {
        const auto& qa = q[(j + 2) % 3];
        const auto& qb = q[(j + 1) % 3];
        t.a[j] = (qa[0] - qb[0]) * s;
        t.b[j] = (qa[1] - qb[1]) * s;
    }
    return t;
}

}  // namespace detail

// Least-squares conformal energy of a UV assignment; used both by the
// solver's tests and as a diagnostic.
inline double lscm_energy(const Mesh& mesh, const Eigen::MatrixX2d& uv) {
    double energy = 0.0;
    for (const Face& f : mesh.faces) {
        const auto t = detail::lscm_coefficients(mesh.vertices.row(f[0]), mesh.vertices.row(f[1]),
                                                 mesh.vertices.row(f[2]));
        double re = 0.0, im = 0.0;
        for (int j = 0; j < 3; ++j) {
            const double u = uv(f[j], 0), v = uv(f[j], 1);
            re += t.a[j] * u - t.b[j] * v;
            im += t.b[j] * u + t.a[j] * v;
        }
        energy += re * re + im * im;
    }
    return energy;
}

// Conformal flattening of a disk-topology mesh. Minimizes the least-squares
// conformal energy with the two most-distant boundary vertices pinned at
// (0,0) and (1,0), then normalizes into [0,1]^2 preserving aspect ratio.
inline UVAtlas conformal_parameterize(const Mesh& mesh) {
    const TopologyReport topo = validate_disk_topology(mesh);
    if (!topo.is_disk)
        throw TopologyNotDisk("euler=" + std::to_string(topo.euler_characteristic) +
                              " boundary_loops=" + std::to_string(topo.boundary_loop_count));

    const int n = mesh.vertex_count();
    const std::vector<int> boundary = boundary_vertex_indices(mesh.faces);

    // pin the most distant boundary pair (3D distance, lowest indices on ties)
    int pin0 = boundary[0], pin1 = boundary[1 % boundary.size()];
    double best = -1.0;
    for (std::size_t i = 0; i < boundary.size(); ++i)
        for (std::size_t j = i + 1; j < boundary.size(); ++j) {
            const double d =
                (mesh.vertices.row(boundary[i]) - mesh.vertices.row(boundary[j])).norm();
            if (d > best) {
                best = d;
                pin0 = boundary[i];
                pin1 = boundary[j];
            }
        }

    // unknown ordering: [u_free..., v_free...]
    std::vector<int> col_of(n, -1);
    int n_free = 0;
    for (int i = 0; i < n; ++i)
        if (i != pin0 && i != pin1) col_of[i] = n_free++;

    const std::array<Eigen::Vector2d, 2> pin_uv = {Eigen::Vector2d(0.0, 0.0),
                                                   Eigen::Vector2d(1.0, 0.0)};
    auto pinned_uv = [&](int v) { return v == pin0 ? pin_uv[0] : pin_uv[1]; };

    const int rows = 2 * mesh.face_count();
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(rows);

    for (int fi = 0; fi < mesh.face_count(); ++fi) {
        const Face& f = mesh.faces[fi];
        const auto t = detail::lscm_coefficients(mesh.vertices.row(f[0]), mesh.vertices.row(f[1]),
                                                 mesh.vertices.row(f[2]));
        const int row_re = 2 * fi, row_im = 2 * fi + 1;
        for (int j = 0; j < 3; ++j) {
            const int v = f[j];
            const double a = t.a[j], b = t.b[j];
            if (col_of[v] >= 0) {
                const int cu = col_of[v], cv = n_free + col_of[v];
                trips.emplace_back(row_re, cu, a);
                trips.emplace_back(row_re, cv, -b);
                trips.emplace_back(row_im, cu, b);
                trips.emplace_back(row_im, cv, a);
            } else {
                const Eigen::Vector2d p = pinned_uv(v);
                rhs[row_re] -= a * p.x() - b * p.y();
                rhs[row_im] -= b * p.x() + a * p.y();
            }
        }
    }

    Eigen::SparseMatrix<double> M(rows, 2 * n_free);
    M.setFromTriplets(trips.begin(), trips.end());

    Eigen::LeastSquaresConjugateGradient<Eigen::SparseMatrix<double>> solver;
    solver.setTolerance(1e-10);
    solver.setMaxIterations(10 * std::max(n, 1));
    solver.compute(M);
    const Eigen::VectorXd x = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
        throw SolverDidNotConverge("residual " + std::to_string(solver.error()) + " after " +
                                   std::to_string(solver.iterations()) + " iterations");

    Eigen::MatrixX2d uv(n, 2);
    for (int i = 0; i < n; ++i) {
        if (col_of[i] >= 0) {
            uv(i, 0) = x[col_of[i]];
            uv(i, 1) = x[n_free + col_of[i]];
        } else {
            uv.row(i) = pinned_uv(i).transpose();
        }
    }

    UVAtlas atlas;
    atlas.bbox_min = uv.colwise().minCoeff().transpose();
    atlas.bbox_max = uv.colwise().maxCoeff().transpose();
    const double extent = std::max((atlas.bbox_max - atlas.bbox_min).maxCoeff(), 1e-300);
    atlas.uv = (uv.rowwise() - atlas.bbox_min.transpose()) / extent;
    atlas.faces = mesh.faces;
    atlas.pins = {pin0, pin1};
    return atlas;
}

namespace detail {

inline double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return a.x() * b.y() - a.y() * b.x();
}

}  // namespace detail

// Barycentric coordinates of p in UV triangle fi of the atlas; inside test
// accepts coordinates down to -1e-12.
inline bool barycentric_in_face(const UVAtlas& atlas, int fi, const Eigen::Vector2d& p,
                                std::array<double, 3>& coords) {
    const Face& f = atlas.faces[fi];
    const Eigen::Vector2d a = atlas.uv.row(f[0]);
    const Eigen::Vector2d b = atlas.uv.row(f[1]);
    const Eigen::Vector2d c = atlas.uv.row(f[2]);
    const double denom = detail::cross2(b - a, c - a);
    if (denom == 0.0) return false;
    const double b1 = detail::cross2(b - p, c - p) / denom;
    const double b2 = detail::cross2(c - p, a - p) / denom;
    const double b3 = 1.0 - b1 - b2;
    constexpr double kTol = -1e-12;
    if (b1 < kTol || b2 < kTol || b3 < kTol) return false;
    coords = {b1, b2, b3};
    return true;
}

// Uniform-grid accelerator for point-in-triangle queries on the UV chart.
// Candidate faces are always tested in ascending index so query answers do
// not depend on the grid resolution.
class PointLocator {
public:
    PointLocator(const UVAtlas& atlas, int grid_resolution)
        : atlas_(&atlas), res_(std::max(grid_resolution, 1)), cells_(static_cast<std::size_t>(res_) * res_) {
        for (int fi = 0; fi < static_cast<int>(atlas.faces.size()); ++fi) {
            const Face& f = atlas.faces[fi];
            double umin = 1.0, umax = 0.0, vmin = 1.0, vmax = 0.0;
            for (int k = 0; k < 3; ++k) {
                umin = std::min(umin, atlas.uv(f[k], 0));
                umax = std::max(umax, atlas.uv(f[k], 0));
                vmin = std::min(vmin, atlas.uv(f[k], 1));
                vmax = std::max(vmax, atlas.uv(f[k], 1));
            }
            for (int cy = cell_index(vmin); cy <= cell_index(vmax); ++cy)
                for (int cx = cell_index(umin); cx <= cell_index(umax); ++cx)
                    cells_[static_cast<std::size_t>(cy) * res_ + cx].push_back(fi);
        }
    }

    BarycentricLocation locate(const Eigen::Vector2d& p) const {
        const auto& cand = cells_[static_cast<std::size_t>(cell_index(p.y())) * res_ +
                                  cell_index(p.x())];
        std::array<double, 3> coords;
        for (int fi : cand)  // ascending: cells are filled in face order
            if (barycentric_in_face(*atlas_, fi, p, coords))
                return BarycentricLocation{fi, coords};
        throw NotInChart("point (" + std::to_string(p.x()) + "," + std::to_string(p.y()) +
                         ") lies outside every UV triangle");
    }

    const UVAtlas& atlas() const { return *atlas_; }

private:
    int cell_index(double t) const {
        const int c = static_cast<int>(t * res_);
        return std::clamp(c, 0, res_ - 1);
    }

    const UVAtlas* atlas_;
    int res_;
    std::vector<std::vector<int>> cells_;
};

inline int default_grid_resolution(const UVAtlas& atlas) {
    return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(atlas.faces.size()))));
}

inline PointLocator build_locator(const UVAtlas& atlas, int grid_resolution = 0) {
    return PointLocator(atlas, grid_resolution > 0 ? grid_resolution : default_grid_resolution(atlas));
}

// Atlas persistence: OBJ with vt records when the path ends in .obj,
// otherwise a feature container holding "uv" and the chart bbox.
inline void save_atlas(const UVAtlas& atlas, const Mesh& mesh, const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".obj") {
        save_obj(mesh, path, &atlas.uv);
        return;
    }
    FeatureContainer fc;
    fc.set_matrix("uv", atlas.uv);
    Eigen::MatrixXd bbox(2, 2);
    bbox.row(0) = atlas.bbox_min.transpose();
    bbox.row(1) = atlas.bbox_max.transpose();
    fc.set_matrix("bbox", bbox);
    fc.save(path);
}

inline UVAtlas load_atlas(const std::string& path, const Mesh& mesh) {
    UVAtlas atlas;
    atlas.faces = mesh.faces;
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".obj") {
        const ObjData obj = load_obj_full(path);
        if (!obj.has_uv) throw FormatError("'" + path + "' has no vt records");
        if (obj.uv.rows() != mesh.vertices.rows())
            throw ShapeMismatch("atlas vertex count differs from mesh");
        atlas.uv = obj.uv;
        atlas.bbox_min = atlas.uv.colwise().minCoeff().transpose();
        atlas.bbox_max = atlas.uv.colwise().maxCoeff().transpose();
        return atlas;
    }
    const FeatureContainer fc = FeatureContainer::load(path);
    atlas.uv = fc.matrix("uv");
    if (atlas.uv.rows() != mesh.vertices.rows())
        throw ShapeMismatch("atlas vertex count differs from mesh");
    if (fc.has("bbox")) {
        const Eigen::MatrixXd bbox = fc.matrix("bbox");
        atlas.bbox_min = bbox.row(0).transpose();
        atlas.bbox_max = bbox.row(1).transpose();
    } else {
        atlas.bbox_min = atlas.uv.colwise().minCoeff().transpose();
        atlas.bbox_max = atlas.uv.colwise().maxCoeff().transpose();
    }
    return atlas;
}

inline Eigen::VectorXd barycentric_eval(const BarycentricLocation& loc, const Eigen::VectorXd& z1,
                                        const Eigen::VectorXd& z2, const Eigen::VectorXd& z3) {
    if (z1.size() != z2.size() || z2.size() != z3.size())
        throw ArityMismatch("per-vertex values differ in arity");
    return loc.coords[0] * z1 + loc.coords[1] * z2 + loc.coords[2] * z3;
}

// Gathers the face's three rows from a per-vertex value matrix and blends.
inline Eigen::VectorXd barycentric_eval_rows(const BarycentricLocation& loc,
                                             const std::vector<Face>& faces,
                                             const Eigen::MatrixXd& per_vertex) {
    const Face& f = faces[loc.face_index];
    return barycentric_eval(loc, per_vertex.row(f[0]), per_vertex.row(f[1]),
                            per_vertex.row(f[2]));
}

}  // namespace mmtalker
