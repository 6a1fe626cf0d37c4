#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "mmtalker/errors.hpp"
#include "mmtalker/mesh.hpp"

namespace mmtalker {
namespace delaunay_detail {

// Predicates accumulate in long double. Not exact arithmetic, but the extra
// mantissa bits keep the desk-scale point sets used here well clear of the
// 1e-9 normalized verification tolerance.
inline long double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                            const Eigen::Vector2d& c) {
    const long double acx = static_cast<long double>(a.x()) - c.x();
    const long double acy = static_cast<long double>(a.y()) - c.y();
    const long double bcx = static_cast<long double>(b.x()) - c.x();
    const long double bcy = static_cast<long double>(b.y()) - c.y();
    return acx * bcy - acy * bcx;
}

// > 0 iff d is strictly inside the circumcircle of CCW triangle (a, b, c).
inline long double incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                            const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
    const long double adx = static_cast<long double>(a.x()) - d.x();
    const long double ady = static_cast<long double>(a.y()) - d.y();
    const long double bdx = static_cast<long double>(b.x()) - d.x();
    const long double bdy = static_cast<long double>(b.y()) - d.y();
    const long double cdx = static_cast<long double>(c.x()) - d.x();
    const long double cdy = static_cast<long double>(c.y()) - d.y();

    const long double ad2 = adx * adx + ady * ady;
    const long double bd2 = bdx * bdx + bdy * bdy;
    const long double cd2 = cdx * cdx + cdy * cdy;

    return adx * (bdy * cd2 - cdy * bd2) - ady * (bdx * cd2 - cdx * bd2) +
           ad2 * (bdx * cdy - cdx * bdy);
}

struct Tri {
    std::array<int, 3> v;    // CCW
    std::array<int, 3> nbr;  // nbr[i] opposite v[i]; -1 on the outside
    bool alive = true;
};

}  // namespace delaunay_detail

// Bowyer-Watson triangulation of the convex hull of the input points.
// Points are inserted in input order (deterministic) into a super-triangle;
// point location walks from the most recent triangle.
inline std::vector<Face> delaunay_triangulate(const std::vector<Eigen::Vector2d>& points) {
    using namespace delaunay_detail;

    const int n = static_cast<int>(points.size());
    if (n < 3) throw TooFewSamples("triangulation needs at least 3 points, got " + std::to_string(n));

    // duplicate scan: sort indices by (x, y), compare within the 1e-12 x-window
    {
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int i, int j) {
            if (points[i].x() != points[j].x()) return points[i].x() < points[j].x();
            return points[i].y() < points[j].y();
        });
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n && points[order[j]].x() - points[order[i]].x() < 1e-12; ++j)
                if ((points[order[i]] - points[order[j]]).norm() < 1e-12)
                    throw DuplicatePoints("points " + std::to_string(order[i]) + " and " +
                                          std::to_string(order[j]) + " closer than 1e-12");
    }

    {
        bool found = false;
        for (int k = 2; k < n && !found; ++k)
            if (orient2d(points[0], points[1], points[k]) != 0.0L) found = true;
        // first two points may coincide in direction with everything; fall back
        // to a full scan only if the fast path failed
        if (!found) {
            for (int i = 0; i < n && !found; ++i)
                for (int j = i + 1; j < n && !found; ++j)
                    for (int k = j + 1; k < n && !found; ++k)
                        if (orient2d(points[i], points[j], points[k]) != 0.0L) found = true;
        }
        if (!found) throw AllCollinear("all input points are collinear");
    }

    // super-triangle far outside the data so hull circumcircles stay empty
    Eigen::Vector2d lo = points[0], hi = points[0];
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Eigen::Vector2d center = 0.5 * (lo + hi);
    const double span = std::max((hi - lo).maxCoeff(), 1e-12);
    const double big = 1e6 * span;

    std::vector<Eigen::Vector2d> pts;
    pts.reserve(points.size() + 3);
    pts.emplace_back(center.x() - big, center.y() - big);
    pts.emplace_back(center.x() + big, center.y() - big);
    pts.emplace_back(center.x(), center.y() + big);
    pts.insert(pts.end(), points.begin(), points.end());

    std::vector<Tri> tris;
    tris.push_back(Tri{{0, 1, 2}, {-1, -1, -1}, true});
    int hint = 0;

    std::vector<int> cavity, stack;
    std::vector<char> in_cavity;

    for (int pi = 3; pi < static_cast<int>(pts.size()); ++pi) {
        const Eigen::Vector2d& p = pts[pi];

        // walk to a triangle containing p
        int cur = hint;
        int steps = 0;
        const int max_steps = static_cast<int>(tris.size()) * 4 + 64;
        while (true) {
            if (!tris[cur].alive) {  // stale hint
                cur = -1;
                for (int i = static_cast<int>(tris.size()) - 1; i >= 0; --i)
                    if (tris[i].alive) {
                        cur = i;
                        break;
                    }
            }
            const Tri& t = tris[cur];
            int exit_edge = -1;
            for (int e = 0; e < 3; ++e) {
                // edge opposite v[e] is (v[e+1], v[e+2])
                if (orient2d(pts[t.v[(e + 1) % 3]], pts[t.v[(e + 2) % 3]], p) < 0.0L) {
                    exit_edge = e;
                    break;
                }
            }
            if (exit_edge < 0) break;  // contained (or on an edge)
            const int nxt = t.nbr[exit_edge];
            if (nxt < 0) break;  // at the super-triangle boundary; treat as containing
            cur = nxt;
            if (++steps > max_steps) {  // degenerate walk; exhaustive fallback
                cur = -1;
                for (int i = 0; i < static_cast<int>(tris.size()); ++i) {
                    if (!tris[i].alive) continue;
                    const Tri& ti = tris[i];
                    if (orient2d(pts[ti.v[0]], pts[ti.v[1]], p) >= 0.0L &&
                        orient2d(pts[ti.v[1]], pts[ti.v[2]], p) >= 0.0L &&
                        orient2d(pts[ti.v[2]], pts[ti.v[0]], p) >= 0.0L) {
                        cur = i;
                        break;
                    }
                }
                if (cur < 0) throw Error("point location failed during triangulation");
                break;
            }
        }

        // grow the cavity: connected triangles whose circumcircle contains p
        cavity.clear();
        stack.clear();
        in_cavity.assign(tris.size(), 0);
        stack.push_back(cur);
        in_cavity[cur] = 1;
        while (!stack.empty()) {
            const int ti = stack.back();
            stack.pop_back();
            cavity.push_back(ti);
            for (int e = 0; e < 3; ++e) {
                const int nb = tris[ti].nbr[e];
                if (nb < 0 || in_cavity[nb] || !tris[nb].alive) continue;
                const Tri& t = tris[nb];
                if (incircle(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], p) > 0.0L) {
                    in_cavity[nb] = 1;
                    stack.push_back(nb);
                }
            }
        }

        // boundary edges of the cavity, oriented as seen from inside
        struct BEdge {
            int a, b, outside;
        };
        std::vector<BEdge> boundary;
        for (int ti : cavity) {
            const Tri& t = tris[ti];
            for (int e = 0; e < 3; ++e) {
                const int nb = t.nbr[e];
                if (nb >= 0 && in_cavity[nb]) continue;
                boundary.push_back(BEdge{t.v[(e + 1) % 3], t.v[(e + 2) % 3], nb});
            }
        }

        for (int ti : cavity) tris[ti].alive = false;

        // fan the cavity boundary to p. The boundary is a closed polygon, so
        // each vertex starts exactly one edge and ends exactly one; the fan
        // triangles stitch to each other through those.
        std::map<int, int> tri_of_start, tri_of_end;
        const int first_new = static_cast<int>(tris.size());
        for (const BEdge& be : boundary) {
            Tri t;
            t.v = {pi, be.a, be.b};  // CCW: p lies left of the directed edge a->b
            t.nbr = {be.outside, -1, -1};
            const int ti = static_cast<int>(tris.size());
            tris.push_back(t);
            if (be.outside >= 0) {
                Tri& out = tris[be.outside];
                for (int e = 0; e < 3; ++e) {
                    const int oa = out.v[(e + 1) % 3], ob = out.v[(e + 2) % 3];
                    if ((oa == be.b && ob == be.a) || (oa == be.a && ob == be.b)) out.nbr[e] = ti;
                }
            }
            tri_of_start[be.a] = ti;
            tri_of_end[be.b] = ti;
        }
        for (int ti = first_new; ti < static_cast<int>(tris.size()); ++ti) {
            Tri& t = tris[ti];
            t.nbr[1] = tri_of_start.at(t.v[2]);  // across (b, p): fan tri starting at b
            t.nbr[2] = tri_of_end.at(t.v[1]);    // across (p, a): fan tri ending at a
        }
        hint = first_new;
    }

    std::vector<Face> out;
    for (const Tri& t : tris) {
        if (!t.alive) continue;
        if (t.v[0] < 3 || t.v[1] < 3 || t.v[2] < 3) continue;  // touches super-triangle
        out.push_back(Face{t.v[0] - 3, t.v[1] - 3, t.v[2] - 3});
    }
    return out;
}

}  // namespace mmtalker
