#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "mmtalker/delaunay.hpp"
#include "mmtalker/errors.hpp"
#include "mmtalker/feature_container.hpp"
#include "mmtalker/mesh.hpp"
#include "mmtalker/rng.hpp"
#include "mmtalker/uv_param.hpp"

namespace mmtalker {

// Learnable per-face sampling distribution over the UV chart. Probabilities
// are softmax(logits); the keypoint prior enters through the logits'
// initialization and stays learnable afterwards.
struct SamplingDistribution {
    Eigen::VectorXd logits;  // one per triangle
    double alpha = 0.0;
    double sigma = 1.0;

    Eigen::VectorXd probabilities() const {
        const double m = logits.maxCoeff();
        Eigen::VectorXd p = (logits.array() - m).exp();
        return p / p.sum();
    }
};

struct SampleSet {
    std::vector<Eigen::Vector2d> points;            // M UV positions
    std::vector<BarycentricLocation> locations;     // per sample, in the source atlas
    std::vector<Face> out_faces;                    // Delaunay topology (post-pruning)
    std::int64_t seed = 0;

    int count() const { return static_cast<int>(points.size()); }
};

inline double uv_triangle_area(const UVAtlas& atlas, const Face& f) {
    const Eigen::Vector2d a = atlas.uv.row(f[0]);
    const Eigen::Vector2d b = atlas.uv.row(f[1]);
    const Eigen::Vector2d c = atlas.uv.row(f[2]);
    return 0.5 * std::abs((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

// logits_f = log(area_f * (1 + alpha * exp(-d_f^2 / (2 sigma^2)))), d_f the
// UV distance from the face centroid to the nearest keypoint.
inline SamplingDistribution init_distribution(const Mesh& mesh, const UVAtlas& atlas,
                                              const RegionMasks& masks, double alpha,
                                              double sigma) {
    if (alpha < 0.0) throw NegativeAlpha("alpha = " + std::to_string(alpha));
    if (sigma <= 0.0) throw NonPositiveSigma("sigma = " + std::to_string(sigma));
    if (alpha > 0.0 && masks.keypoints.empty())
        throw EmptyKeypoints("keypoint prior requested with no keypoints");
    (void)mesh;

    SamplingDistribution dist;
    dist.alpha = alpha;
    dist.sigma = sigma;
    dist.logits.resize(static_cast<Eigen::Index>(atlas.faces.size()));
    for (std::size_t fi = 0; fi < atlas.faces.size(); ++fi) {
        const Face& f = atlas.faces[fi];
        const double area = uv_triangle_area(atlas, f);
        double boost = 0.0;
        if (alpha > 0.0) {
            const Eigen::Vector2d centroid =
                (atlas.uv.row(f[0]) + atlas.uv.row(f[1]) + atlas.uv.row(f[2])).transpose() / 3.0;
            double d2 = std::numeric_limits<double>::infinity();
            for (int k : masks.keypoints)
                d2 = std::min(d2, (centroid - atlas.uv.row(k).transpose()).squaredNorm());
            boost = alpha * std::exp(-d2 / (2.0 * sigma * sigma));
        }
        dist.logits[static_cast<Eigen::Index>(fi)] = std::log(area * (1.0 + boost));
    }
    return dist;
}

// 0.1 x the diagonal of the chart the sampling distances live in (the
// normalized UV coordinates, not the pre-normalization provenance bbox).
inline double default_sigma(const UVAtlas& atlas) {
    const Eigen::Vector2d mn = atlas.uv.colwise().minCoeff().transpose();
    const Eigen::Vector2d mx = atlas.uv.colwise().maxCoeff().transpose();
    return 0.1 * (mx - mn).norm();
}

namespace detail {

inline BarycentricLocation vertex_location(const UVAtlas& atlas, int vertex) {
    for (int fi = 0; fi < static_cast<int>(atlas.faces.size()); ++fi) {
        const Face& f = atlas.faces[fi];
        for (int k = 0; k < 3; ++k)
            if (f[k] == vertex) {
                BarycentricLocation loc;
                loc.face_index = fi;
                loc.coords = {0.0, 0.0, 0.0};
                loc.coords[static_cast<std::size_t>(k)] = 1.0;
                return loc;
            }
    }
    throw IndexOutOfRange("vertex " + std::to_string(vertex) + " is in no face");
}

}  // namespace detail

// Keeps the triangles whose centroid locates inside the source chart. Stops
// convex-hull triangles from bridging chart concavities (the mouth opening).
inline std::vector<Face> prune_exterior_faces(const std::vector<Face>& triangles,
                                              const std::vector<Eigen::Vector2d>& points,
                                              const PointLocator& locator) {
    std::vector<Face> kept;
    kept.reserve(triangles.size());
    for (const Face& t : triangles) {
        const Eigen::Vector2d centroid = (points[t[0]] + points[t[1]] + points[t[2]]) / 3.0;
        try {
            locator.locate(centroid);
            kept.push_back(t);
        } catch (const NotInChart&) {
        }
    }
    return kept;
}

// Draws M sample points: categorical face draw from softmax(logits), then a
// uniform in-triangle point via the sqrt warp. With pin_boundary the chart's
// boundary vertices are emitted first, verbatim, and count toward M.
inline SampleSet draw_samples(const SamplingDistribution& dist, const UVAtlas& atlas, int M,
                              std::int64_t seed, bool pin_boundary = true) {
    if (M < 3) throw TooFewSamples("M = " + std::to_string(M) + " < 3");

    SampleSet set;
    set.seed = seed;
    set.points.reserve(static_cast<std::size_t>(M));
    set.locations.reserve(static_cast<std::size_t>(M));

    if (pin_boundary) {
        const std::vector<int> boundary = boundary_vertex_indices(atlas.faces);
        if (static_cast<int>(boundary.size()) > M)
            throw TooFewSamples("M = " + std::to_string(M) + " below the " +
                                std::to_string(boundary.size()) + " pinned boundary vertices");
        for (int v : boundary) {
            set.points.emplace_back(atlas.uv.row(v).transpose());
            set.locations.push_back(detail::vertex_location(atlas, v));
        }
    }

    const Eigen::VectorXd probs = dist.probabilities();
    Eigen::VectorXd cdf(probs.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        cdf[i] = acc;
    }
    cdf[probs.size() - 1] = 1.0;

    Rng rng(static_cast<std::uint64_t>(seed));
    while (static_cast<int>(set.points.size()) < M) {
        const double u = rng.uniform();
        const int fi = static_cast<int>(
            std::lower_bound(cdf.data(), cdf.data() + cdf.size(), u) - cdf.data());
        const Face& f = atlas.faces[fi];

        const double r1 = std::sqrt(rng.uniform());
        const double r2 = rng.uniform();
        const double b1 = 1.0 - r1;
        const double b2 = r1 * (1.0 - r2);
        const double b3 = r1 * r2;

        const Eigen::Vector2d p = b1 * atlas.uv.row(f[0]).transpose() +
                                  b2 * atlas.uv.row(f[1]).transpose() +
                                  b3 * atlas.uv.row(f[2]).transpose();
        set.points.push_back(p);
        set.locations.push_back(BarycentricLocation{fi, {b1, b2, b3}});
    }

    const std::vector<Face> raw = delaunay_triangulate(set.points);
    const PointLocator locator = build_locator(atlas);
    set.out_faces = prune_exterior_faces(raw, set.points, locator);
    return set;
}

// Sample set that reproduces the original topology exactly: one sample per
// vertex, pinned, with the source faces as output topology.
inline SampleSet pin_all_vertices(const UVAtlas& atlas) {
    SampleSet set;
    set.seed = 0;
    const int n = atlas.vertex_count();
    set.points.reserve(static_cast<std::size_t>(n));
    set.locations.reserve(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        set.points.emplace_back(atlas.uv.row(v).transpose());
        set.locations.push_back(detail::vertex_location(atlas, v));
    }
    set.out_faces = atlas.faces;
    return set;
}

// Score-function (likelihood-ratio) gradient for the sampling logits:
// grad = sum_k (r_k - baseline) * (onehot(face_k) - p). Entries sum to zero.
inline Eigen::VectorXd score_gradient(const SamplingDistribution& dist,
                                      const std::vector<int>& sampled_triangle_ids,
                                      const std::vector<double>& rewards,
                                      bool use_baseline = true) {
    if (sampled_triangle_ids.empty()) throw EmptySamples("no sampled triangles");
    if (sampled_triangle_ids.size() != rewards.size())
        throw LengthMismatch(std::to_string(sampled_triangle_ids.size()) + " ids vs " +
                             std::to_string(rewards.size()) + " rewards");

    double baseline = 0.0;
    if (use_baseline) {
        for (double r : rewards) baseline += r;
        baseline /= static_cast<double>(rewards.size());
    }

    const Eigen::VectorXd p = dist.probabilities();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dist.logits.size());
    for (std::size_t k = 0; k < sampled_triangle_ids.size(); ++k) {
        const double w = rewards[k] - baseline;
        grad -= w * p;
        grad[sampled_triangle_ids[k]] += w;
    }
    return grad;
}

inline void save_sample_set(const SampleSet& set, const std::string& path) {
    FeatureContainer fc;
    const std::size_t m = set.points.size();
    std::vector<double> pts(m * 2), faces_flat, loc_face(m), loc_bary(m * 3);
    for (std::size_t i = 0; i < m; ++i) {
        pts[2 * i] = set.points[i].x();
        pts[2 * i + 1] = set.points[i].y();
        loc_face[i] = static_cast<double>(set.locations[i].face_index);
        for (int k = 0; k < 3; ++k) loc_bary[3 * i + k] = set.locations[i].coords[k];
    }
    for (const Face& f : set.out_faces)
        for (int k = 0; k < 3; ++k) faces_flat.push_back(static_cast<double>(f[k]));

    fc.set("points", {m, 2}, std::move(pts));
    fc.set("locations_face", {m}, std::move(loc_face));
    fc.set("locations_bary", {m, 3}, std::move(loc_bary));
    fc.set("out_faces", {set.out_faces.size(), 3}, std::move(faces_flat));
    fc.set_scalar("seed", static_cast<double>(set.seed));
    fc.save(path);
}

inline SampleSet load_sample_set(const std::string& path) {
    const FeatureContainer fc = FeatureContainer::load(path);
    SampleSet set;
    const NamedArray& pts = fc.array("points");
    const NamedArray& lf = fc.array("locations_face");
    const NamedArray& lb = fc.array("locations_bary");
    const NamedArray& of = fc.array("out_faces");
    const std::size_t m = pts.shape.at(0);
    if (lf.count() != m || lb.count() != m * 3)
        throw FormatError("inconsistent sample set arrays");
    for (std::size_t i = 0; i < m; ++i) {
        set.points.emplace_back(pts.data[2 * i], pts.data[2 * i + 1]);
        BarycentricLocation loc;
        loc.face_index = static_cast<int>(lf.data[i]);
        loc.coords = {lb.data[3 * i], lb.data[3 * i + 1], lb.data[3 * i + 2]};
        set.locations.push_back(loc);
    }
    for (std::size_t i = 0; i + 2 < of.count(); i += 3)
        set.out_faces.push_back(Face{static_cast<int>(of.data[i]), static_cast<int>(of.data[i + 1]),
                                     static_cast<int>(of.data[i + 2])});
    set.seed = static_cast<std::int64_t>(fc.scalar("seed"));
    return set;
}

}  // namespace mmtalker
