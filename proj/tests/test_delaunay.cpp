#include <catch2/catch_amalgamated.hpp>

#include "mmtalker/delaunay.hpp"
#include "mmtalker/rng.hpp"
#include "oracles.hpp"

using namespace mmtalker;

TEST_CASE("three non-collinear points give one triangle") {
    const std::vector<Eigen::Vector2d> pts = {{0, 0}, {1, 0}, {0, 1}};
    const std::vector<Face> tris = delaunay_triangulate(pts);
    REQUIRE(tris.size() == 1);
}

TEST_CASE("unit square splits into two empty-circumcircle triangles") {
    const std::vector<Eigen::Vector2d> pts = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    const std::vector<Face> tris = delaunay_triangulate(pts);
    REQUIRE(tris.size() == 2);
    CHECK(oracles::delaunay_empty_circumcircle(pts, tris));
    // deterministic for fixed input order
    CHECK(delaunay_triangulate(pts) == tris);
}

TEST_CASE("collinear points are rejected") {
    const std::vector<Eigen::Vector2d> pts = {{0, 0}, {1, 1}, {2, 2}};
    CHECK_THROWS_AS(delaunay_triangulate(pts), AllCollinear);
}

TEST_CASE("near-duplicate points are rejected") {
    const std::vector<Eigen::Vector2d> pts = {{0, 0}, {1, 0}, {0, 1}, {1e-13, -1e-13}};
    CHECK_THROWS_AS(delaunay_triangulate(pts), DuplicatePoints);
}

TEST_CASE("fewer than three points are rejected") {
    const std::vector<Eigen::Vector2d> pts = {{0, 0}, {1, 0}};
    CHECK_THROWS_AS(delaunay_triangulate(pts), TooFewSamples);
}

TEST_CASE("random point sets satisfy the empty-circumcircle property") {
    for (int trial = 0; trial < 5; ++trial) {
        Rng rng(100 + static_cast<std::uint64_t>(trial));
        std::vector<Eigen::Vector2d> pts;
        for (int i = 0; i < 400; ++i) pts.emplace_back(rng.uniform(), rng.uniform());
        const std::vector<Face> tris = delaunay_triangulate(pts);
        CHECK(tris.size() > 700);  // roughly 2n - hull
        CHECK(oracles::delaunay_empty_circumcircle(pts, tris));
    }
}

TEST_CASE("grid points with exact cocircular quads still triangulate") {
    std::vector<Eigen::Vector2d> pts;
    for (int j = 0; j < 6; ++j)
        for (int i = 0; i < 6; ++i) pts.emplace_back(i, j);
    const std::vector<Face> tris = delaunay_triangulate(pts);
    CHECK(tris.size() == 50);  // 2 per grid cell
    CHECK(oracles::delaunay_empty_circumcircle(pts, tris));
}
