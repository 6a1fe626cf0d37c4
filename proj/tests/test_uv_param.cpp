#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "mmtalker/meshgen.hpp"
#include "mmtalker/rng.hpp"
#include "mmtalker/uv_param.hpp"
#include "oracles.hpp"

using namespace mmtalker;

TEST_CASE("planar grid flattens to itself up to a similarity") {
    const Mesh mesh = make_grid_mesh(9, 7, 1.0, 0.75);
    const UVAtlas atlas = conformal_parameterize(mesh);

    Eigen::MatrixX2d src(mesh.vertex_count(), 2);
    src.col(0) = mesh.vertices.col(0);
    src.col(1) = mesh.vertices.col(1);
    CHECK(oracles::similarity_procrustes_rms(src, atlas.uv) < 1e-6);

    CHECK(atlas.uv.minCoeff() >= 0.0);
    CHECK(atlas.uv.maxCoeff() <= 1.0);
    CHECK(atlas.faces == mesh.faces);
}

TEST_CASE("hemisphere cap flattening keeps corner angles within 2 degrees on average") {
    // oracle: stereographic projection is exactly conformal, so small mean
    // angle deviation is achievable at this resolution; the solver must get close
    const Mesh mesh = make_cap_mesh(16, 32);
    const UVAtlas atlas = conformal_parameterize(mesh);

    double total_dev = 0.0;
    int corners = 0;
    for (const Face& f : mesh.faces) {
        const auto a3 = oracles::triangle_angles<Eigen::Vector3d>(
            mesh.vertices.row(f[0]), mesh.vertices.row(f[1]), mesh.vertices.row(f[2]));
        const auto a2 = oracles::triangle_angles<Eigen::Vector2d>(
            atlas.uv.row(f[0]), atlas.uv.row(f[1]), atlas.uv.row(f[2]));
        for (int k = 0; k < 3; ++k) {
            total_dev += std::abs(a3[k] - a2[k]);
            ++corners;
        }
    }
    const double mean_deg = (total_dev / corners) * 180.0 / M_PI;
    CHECK(mean_deg < 2.0);

    // no flipped faces: all UV signed areas share a sign
    int pos = 0, neg = 0;
    for (const Face& f : mesh.faces) {
        const Eigen::Vector2d a = atlas.uv.row(f[0]), b = atlas.uv.row(f[1]),
                              c = atlas.uv.row(f[2]);
        const double s = (b - a).x() * (c - a).y() - (b - a).y() * (c - a).x();
        (s > 0 ? pos : neg)++;
    }
    CHECK((pos == 0 || neg == 0));
}

TEST_CASE("closed meshes are rejected") {
    CHECK_THROWS_AS(conformal_parameterize(make_octahedron()), TopologyNotDisk);
}

TEST_CASE("returned UV is a local minimum of the conformal energy") {
    // the minimum is with respect to the free vertices; the two pins absorb
    // the similarity degrees of freedom and must stay fixed
    const Mesh mesh = make_cap_mesh(4, 8);
    const UVAtlas atlas = conformal_parameterize(mesh);
    const double base = lscm_energy(mesh, atlas.uv);
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixX2d perturbed = atlas.uv;
        for (Eigen::Index i = 0; i < perturbed.rows(); ++i) {
            if (i == atlas.pins[0] || i == atlas.pins[1]) continue;
            for (int c = 0; c < 2; ++c) perturbed(i, c) += 1e-3 * rng.uniform(-1.0, 1.0);
        }
        CHECK(lscm_energy(mesh, perturbed) >= base);
    }
}

TEST_CASE("every UV vertex locates in an incident face") {
    const Mesh mesh = make_cap_mesh(4, 8);
    const UVAtlas atlas = conformal_parameterize(mesh);
    const PointLocator locator = build_locator(atlas);
    for (int v = 0; v < atlas.vertex_count(); ++v) {
        const BarycentricLocation loc = locator.locate(atlas.uv.row(v).transpose());
        const Face& f = atlas.faces[loc.face_index];
        CHECK((f[0] == v || f[1] == v || f[2] == v));
        // coords are a permutation of (1,0,0) up to tolerance
        double best = 0.0;
        for (double b : loc.coords) best = std::max(best, b);
        CHECK(best == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("synthesized interior points locate back to their face") {
    const Mesh mesh = make_cap_mesh(4, 8);
    const UVAtlas atlas = conformal_parameterize(mesh);
    const PointLocator locator = build_locator(atlas);
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const int fi = static_cast<int>(rng.below(static_cast<std::uint64_t>(atlas.faces.size())));
        const Face& f = atlas.faces[fi];
        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        const std::array<double, 3> b = {1.0 - r1, r1 * (1.0 - r2), r1 * r2};
        const Eigen::Vector2d p = b[0] * atlas.uv.row(f[0]).transpose() +
                                  b[1] * atlas.uv.row(f[1]).transpose() +
                                  b[2] * atlas.uv.row(f[2]).transpose();
        const BarycentricLocation loc = locator.locate(p);
        // either the same face, or a coincident neighbor for edge-adjacent points
        if (loc.face_index == fi) {
            for (int k = 0; k < 3; ++k) CHECK(loc.coords[k] == Catch::Approx(b[k]).margin(1e-10));
        } else {
            // re-synthesize from the reported location; must be the same point
            const Face& g = atlas.faces[loc.face_index];
            const Eigen::Vector2d q = loc.coords[0] * atlas.uv.row(g[0]).transpose() +
                                      loc.coords[1] * atlas.uv.row(g[1]).transpose() +
                                      loc.coords[2] * atlas.uv.row(g[2]).transpose();
            CHECK((q - p).norm() < 1e-10);
        }
    }
}

TEST_CASE("grid resolution does not change query answers") {
    const Mesh mesh = make_cap_mesh(3, 7);
    const UVAtlas atlas = conformal_parameterize(mesh);
    const PointLocator fine = build_locator(atlas, 64);
    const PointLocator coarse = build_locator(atlas, 1);
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Vector2d p(rng.uniform(), rng.uniform());
        bool in_fine = true, in_coarse = true;
        BarycentricLocation a, b;
        try {
            a = fine.locate(p);
        } catch (const NotInChart&) {
            in_fine = false;
        }
        try {
            b = coarse.locate(p);
        } catch (const NotInChart&) {
            in_coarse = false;
        }
        REQUIRE(in_fine == in_coarse);
        if (in_fine) {
            CHECK(a.face_index == b.face_index);
            for (int k = 0; k < 3; ++k) CHECK(a.coords[k] == b.coords[k]);
        }
    }
}

TEST_CASE("centroid locates with coords (1/3,1/3,1/3)") {
    const Mesh mesh = make_cap_mesh(2, 5);
    const UVAtlas atlas = conformal_parameterize(mesh);
    const PointLocator locator = build_locator(atlas);
    const Face& f = atlas.faces[3];
    const Eigen::Vector2d centroid =
        (atlas.uv.row(f[0]) + atlas.uv.row(f[1]) + atlas.uv.row(f[2])).transpose() / 3.0;
    const BarycentricLocation loc = locator.locate(centroid);
    CHECK(loc.face_index == 3);
    for (int k = 0; k < 3; ++k) CHECK(loc.coords[k] == Catch::Approx(1.0 / 3.0).margin(1e-12));
}

TEST_CASE("points in chart concavities raise NotInChart") {
    // L-shaped chart occupying [0,1]^2 minus the upper-right quadrant
    UVAtlas atlas;
    atlas.uv.resize(8, 2);
    atlas.uv << 0, 0, 0.5, 0, 1, 0, 0, 0.5, 0.5, 0.5, 1, 0.5, 0, 1, 0.5, 1;
    atlas.faces = {{0, 1, 4}, {0, 4, 3}, {1, 2, 5}, {1, 5, 4}, {3, 4, 7}, {3, 7, 6}};
    atlas.bbox_min << 0, 0;
    atlas.bbox_max << 1, 1;
    const PointLocator locator = build_locator(atlas, 8);
    CHECK_NOTHROW(locator.locate({0.25, 0.25}));
    CHECK_THROWS_AS(locator.locate({0.9, 0.9}), NotInChart);
}

TEST_CASE("barycentric_eval basics") {
    BarycentricLocation loc;
    loc.face_index = 0;
    loc.coords = {1.0, 0.0, 0.0};
    Eigen::VectorXd z1(2), z2(2), z3(2);
    z1 << 4.0, -1.0;
    z2 << 100.0, 100.0;
    z3 << -7.0, 0.5;
    const Eigen::VectorXd at_vertex = barycentric_eval(loc, z1, z2, z3);
    CHECK(at_vertex == z1);  // exact

    loc.coords = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    Eigen::VectorXd s1(1), s2(1), s3(1);
    s1 << 0.0;
    s2 << 3.0;
    s3 << 6.0;
    CHECK(barycentric_eval(loc, s1, s2, s3)(0) == Catch::Approx(3.0).margin(1e-12));

    Eigen::VectorXd bad(3);
    CHECK_THROWS_AS(barycentric_eval(loc, s1, s2, bad), ArityMismatch);
}

TEST_CASE("barycentric interpolation reproduces affine fields") {
    const Mesh mesh = make_cap_mesh(3, 6);
    const UVAtlas atlas = conformal_parameterize(mesh);
    const PointLocator locator = build_locator(atlas);

    // f(u, v) = a . (u, v) + c, sampled at UV vertices
    const Eigen::Vector2d a(2.5, -1.25);
    const double c = 0.75;
    Eigen::MatrixXd values(atlas.vertex_count(), 1);
    for (int v = 0; v < atlas.vertex_count(); ++v)
        values(v, 0) = a.dot(atlas.uv.row(v)) + c;

    Rng rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        const int fi = static_cast<int>(rng.below(static_cast<std::uint64_t>(atlas.faces.size())));
        const Face& f = atlas.faces[fi];
        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        BarycentricLocation loc{fi, {1.0 - r1, r1 * (1.0 - r2), r1 * r2}};
        const Eigen::Vector2d p = loc.coords[0] * atlas.uv.row(f[0]).transpose() +
                                  loc.coords[1] * atlas.uv.row(f[1]).transpose() +
                                  loc.coords[2] * atlas.uv.row(f[2]).transpose();
        const double expected = a.dot(p) + c;
        const double got = barycentric_eval_rows(loc, atlas.faces, values)(0);
        CHECK(std::abs(got - expected) <= 1e-12 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("barycentric_eval is linear in the vertex values") {
    Rng rng(37);
    BarycentricLocation loc;
    loc.coords = {0.2, 0.5, 0.3};
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd z1(3), z2(3), z3(3), w1(3), w2(3), w3(3);
        for (int i = 0; i < 3; ++i) {
            z1[i] = rng.uniform(-1, 1);
            z2[i] = rng.uniform(-1, 1);
            z3[i] = rng.uniform(-1, 1);
            w1[i] = rng.uniform(-1, 1);
            w2[i] = rng.uniform(-1, 1);
            w3[i] = rng.uniform(-1, 1);
        }
        const double alpha = rng.uniform(-2, 2);
        const Eigen::VectorXd lhs =
            barycentric_eval(loc, alpha * z1 + w1, alpha * z2 + w2, alpha * z3 + w3);
        const Eigen::VectorXd rhs =
            alpha * barycentric_eval(loc, z1, z2, z3) + barycentric_eval(loc, w1, w2, w3);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("barycentric coordinates are invariant under chart similarity") {
    // normalization is a similarity transform; located coordinates must not
    // change
    const Mesh mesh = make_cap_mesh(3, 6);
    const UVAtlas atlas = conformal_parameterize(mesh);

    UVAtlas scaled = atlas;
    const double s = 0.37;
    const Eigen::RowVector2d shift(0.21, 0.43);
    scaled.uv = (s * atlas.uv).rowwise() + shift;

    const PointLocator loc_a = build_locator(atlas, 16);
    const PointLocator loc_b = build_locator(scaled, 16);
    Rng rng(41);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Vector2d p(rng.uniform(), rng.uniform());
        BarycentricLocation a;
        try {
            a = loc_a.locate(p);
        } catch (const NotInChart&) {
            continue;
        }
        const BarycentricLocation b = loc_b.locate(s * p + shift.transpose());
        CHECK(a.face_index == b.face_index);
        for (int k = 0; k < 3; ++k)
            CHECK(a.coords[k] == Catch::Approx(b.coords[k]).margin(1e-12));
    }
}

TEST_CASE("atlas save/load round trips through both formats") {
    const Mesh mesh = make_cap_mesh(3, 6);
    const UVAtlas atlas = conformal_parameterize(mesh);
    const std::string obj_path =
        (std::filesystem::temp_directory_path() / "atlas_rt.obj").string();
    const std::string fc_path =
        (std::filesystem::temp_directory_path() / "atlas_rt.mmtk").string();

    save_atlas(atlas, mesh, obj_path);
    const UVAtlas from_obj = load_atlas(obj_path, mesh);
    CHECK((from_obj.uv - atlas.uv).cwiseAbs().maxCoeff() < 1e-8);  // print precision

    save_atlas(atlas, mesh, fc_path);
    const UVAtlas from_fc = load_atlas(fc_path, mesh);
    CHECK(from_fc.uv == atlas.uv);  // bitwise through the container
}
