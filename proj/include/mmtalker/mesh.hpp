#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "mmtalker/errors.hpp"

namespace mmtalker {

using Face = std::array<int, 3>;

struct Mesh {
    Eigen::MatrixX3d vertices;  // N x 3
    std::vector<Face> faces;

    int vertex_count() const { return static_cast<int>(vertices.rows()); }
    int face_count() const { return static_cast<int>(faces.size()); }
};

struct RegionMasks {
    std::vector<int> lip_vertices;
    std::vector<int> eye_vertices;
    std::vector<int> upper_face_vertices;
    std::vector<int> keypoints;
};

// Normalized mesh adjacency: 1 on the diagonal, 1/deg(i) on row i for each
// edge neighbor j, zero elsewhere. Row-stochastic up to the factor 2 and not
// symmetric in general.
struct AdjacencyOperator {
    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
    std::vector<int> degrees;
};

namespace detail {

inline Face cyclic_min_rotation(const Face& f) {
    Face best = f;
    for (int r = 1; r < 3; ++r) {
        Face rot = {f[r % 3], f[(r + 1) % 3], f[(r + 2) % 3]};
        if (rot < best) best = rot;
    }
    return best;
}

}  // namespace detail

// Checks the structural Mesh invariants: indices in range, three distinct
// indices per face, no duplicate face up to cyclic rotation.
inline void validate_mesh(const Mesh& mesh) {
    const int n = mesh.vertex_count();
    std::set<Face> seen;
    for (const Face& f : mesh.faces) {
        for (int v : f)
            if (v < 0 || v >= n) throw ParseError("face index out of range");
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            throw ParseError("degenerate face (repeated vertex index)");
        Face key = detail::cyclic_min_rotation(f);
        if (!seen.insert(key).second) throw ParseError("duplicate face");
    }
}

struct ObjData {
    Mesh mesh;
    Eigen::MatrixX2d uv;  // rows valid only when has_uv
    bool has_uv = false;
};

inline ObjData load_obj_full(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::vector<Eigen::Vector3d> verts;
    std::vector<Eigen::Vector2d> uvs;
    std::vector<Face> faces;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;  // blank line
        if (tag == "#") continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ss >> x >> y >> z))
                throw ParseError("line " + std::to_string(lineno) + ": malformed vertex");
            verts.emplace_back(x, y, z);
        } else if (tag == "vt") {
            double u, v;
            if (!(ss >> u >> v))
                throw ParseError("line " + std::to_string(lineno) + ": malformed vt");
            uvs.emplace_back(u, v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ss >> tok) {
                // accept i, i/t, i/t/n, i//n forms; the leading index rules
                const std::string head = tok.substr(0, tok.find('/'));
                int i = 0;
                try {
                    i = std::stoi(head);
                } catch (...) {
                    throw ParseError("line " + std::to_string(lineno) + ": bad face index '" +
                                     tok + "'");
                }
                idx.push_back(i);
            }
            if (idx.size() != 3)
                throw NonTriangular("line " + std::to_string(lineno) + ": face with " +
                                    std::to_string(idx.size()) + " vertices");
            Face f;
            for (int k = 0; k < 3; ++k) {
                if (idx[k] < 1 || idx[k] > static_cast<int>(verts.size()))
                    throw ParseError("line " + std::to_string(lineno) +
                                     ": face index out of range");
                f[k] = idx[k] - 1;
            }
            faces.push_back(f);
        }
        // other OBJ records (vn, o, g, s, usemtl, ...) are ignored
    }

    ObjData out;
    out.mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) out.mesh.vertices.row(i) = verts[i];
    out.mesh.faces = std::move(faces);
    if (!uvs.empty()) {
        if (uvs.size() != verts.size())
            throw ParseError("vt record count does not match vertex count");
        out.uv.resize(static_cast<Eigen::Index>(uvs.size()), 2);
        for (std::size_t i = 0; i < uvs.size(); ++i) out.uv.row(i) = uvs[i];
        out.has_uv = true;
    }
    validate_mesh(out.mesh);
    return out;
}

inline Mesh load_obj(const std::string& path) { return load_obj_full(path).mesh; }

inline void save_obj(const Mesh& mesh, const std::string& path,
                     const Eigen::MatrixX2d* uv = nullptr) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    char buf[128];
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", mesh.vertices(i, 0),
                      mesh.vertices(i, 1), mesh.vertices(i, 2));
        out << buf;
    }
    if (uv) {
        for (Eigen::Index i = 0; i < uv->rows(); ++i) {
            std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", (*uv)(i, 0), (*uv)(i, 1));
            out << buf;
        }
    }
    for (const Face& f : mesh.faces)
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

struct TopologyReport {
    int euler_characteristic = 0;
    int boundary_loop_count = 0;
    bool is_disk = false;
};

// Edge-counting disk check: a disk has V - E + F = 1 and exactly one
// boundary loop, with every edge shared by at most two faces.
inline TopologyReport validate_disk_topology(const Mesh& mesh) {
    if (mesh.vertex_count() == 0 || mesh.faces.empty())
        throw ParseError("empty mesh has no topology");

    std::map<std::pair<int, int>, int> edge_faces;
    for (const Face& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            int& cnt = edge_faces[{a, b}];
            if (++cnt > 2)
                throw NonManifoldEdge("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                      ") has more than two incident faces");
        }
    }

    const int V = mesh.vertex_count();
    const int E = static_cast<int>(edge_faces.size());
    const int F = mesh.face_count();

    // boundary loops = connected components of the boundary-edge graph
    std::vector<std::pair<int, int>> boundary;
    for (const auto& [e, cnt] : edge_faces)
        if (cnt == 1) boundary.push_back(e);

    std::map<int, int> comp;  // boundary vertex -> component root (union-find)
    std::function<int(int)> find = [&](int v) {
        while (comp[v] != v) v = comp[v] = comp[comp[v]];
        return v;
    };
    for (const auto& [a, b] : boundary) {
        if (!comp.count(a)) comp[a] = a;
        if (!comp.count(b)) comp[b] = b;
        comp[find(a)] = find(b);
    }
    std::set<int> roots;
    for (const auto& [v, _] : comp) roots.insert(find(v));

    TopologyReport rep;
    rep.euler_characteristic = V - E + F;
    rep.boundary_loop_count = static_cast<int>(roots.size());
    rep.is_disk = rep.euler_characteristic == 1 && rep.boundary_loop_count == 1;
    return rep;
}

inline AdjacencyOperator build_adjacency(const Mesh& mesh) {
    const int n = mesh.vertex_count();
    std::vector<std::set<int>> neighbors(n);
    for (const Face& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            neighbors[a].insert(b);
            neighbors[b].insert(a);
        }
    }

    AdjacencyOperator op;
    op.degrees.resize(n);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * 7);
    for (int i = 0; i < n; ++i) {
        const int d = static_cast<int>(neighbors[i].size());
        if (d == 0) throw IsolatedVertex("vertex " + std::to_string(i) + " has no neighbors");
        op.degrees[i] = d;
        trips.emplace_back(i, i, 1.0);
        const double w = 1.0 / static_cast<double>(d);
        for (int j : neighbors[i]) trips.emplace_back(i, j, w);
    }
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(trips.begin(), trips.end());
    return op;
}

inline RegionMasks load_region_masks(const std::string& path, const Mesh& mesh) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("masks file is not valid JSON: ") + e.what());
    }

    auto read_set = [&](const char* key) {
        if (!doc.contains(key))
            throw MissingField(std::string("masks file lacks array '") + key + "'");
        std::vector<int> idx;
        for (const auto& v : doc[key]) {
            const int i = v.get<int>();
            if (i < 0 || i >= mesh.vertex_count())
                throw IndexOutOfRange(std::string(key) + " index " + std::to_string(i) +
                                      " out of range for N=" +
                                      std::to_string(mesh.vertex_count()));
            idx.push_back(i);
        }
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        return idx;
    };

    RegionMasks m;
    m.lip_vertices = read_set("lip");
    m.eye_vertices = read_set("eye");
    m.upper_face_vertices = read_set("upper_face");
    m.keypoints = read_set("keypoints");
    return m;
}

inline void save_region_masks(const RegionMasks& masks, const std::string& path) {
    nlohmann::json doc;
    doc["lip"] = masks.lip_vertices;
    doc["eye"] = masks.eye_vertices;
    doc["upper_face"] = masks.upper_face_vertices;
    doc["keypoints"] = masks.keypoints;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << doc.dump(2) << '\n';
}

}  // namespace mmtalker
