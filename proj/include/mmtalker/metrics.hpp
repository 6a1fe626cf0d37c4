#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmtalker/errors.hpp"
#include "mmtalker/mesh.hpp"
#include "mmtalker/synthesis.hpp"

namespace mmtalker {

struct MetricReport {
    double e_vl = 0.0;
    double e_ve = 0.0;
    double fdd = 0.0;
    std::vector<double> per_frame_max_lip;
};

namespace detail {

inline void check_metric_shapes(const std::vector<Eigen::MatrixX3d>& pred,
                                const std::vector<Eigen::MatrixX3d>& gt) {
    if (pred.size() != gt.size()) throw ShapeMismatch("pred/gt frame counts differ");
    if (pred.empty()) throw ShapeMismatch("empty sequences");
    for (std::size_t t = 0; t < pred.size(); ++t)
        if (pred[t].rows() != gt[t].rows() || pred[t].rows() != pred[0].rows())
            throw ShapeMismatch("vertex counts differ across frames");
}

// Mean over frames of the per-frame maximum Euclidean error over a region.
inline double region_max_error(const std::vector<Eigen::MatrixX3d>& pred,
                               const std::vector<Eigen::MatrixX3d>& gt,
                               const std::vector<int>& region,
                               std::vector<double>* per_frame = nullptr) {
    check_metric_shapes(pred, gt);
    if (region.empty()) throw EmptyMask("empty vertex region");
    const int N = static_cast<int>(pred[0].rows());
    double acc = 0.0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        double worst = 0.0;
        for (int j : region) {
            if (j < 0 || j >= N) throw IndexOutOfRange("region index " + std::to_string(j));
            worst = std::max(worst, (pred[t].row(j) - gt[t].row(j)).norm());
        }
        if (per_frame) per_frame->push_back(worst);
        acc += worst;
    }
    return acc / static_cast<double>(pred.size());
}

}  // namespace detail

inline double lip_max_error(const std::vector<Eigen::MatrixX3d>& pred,
                            const std::vector<Eigen::MatrixX3d>& gt,
                            const std::vector<int>& lip_vertices,
                            std::vector<double>* per_frame = nullptr) {
    return detail::region_max_error(pred, gt, lip_vertices, per_frame);
}

inline double eye_max_error(const std::vector<Eigen::MatrixX3d>& pred,
                            const std::vector<Eigen::MatrixX3d>& gt,
                            const std::vector<int>& eye_vertices) {
    return detail::region_max_error(pred, gt, eye_vertices);
}

// Upper-face dynamics deviation: per region vertex, the population standard
// deviation over time of the displacement norm from the template, ground
// truth minus prediction, averaged over the region. Signed.
inline double fdd(const std::vector<Eigen::MatrixX3d>& pred,
                  const std::vector<Eigen::MatrixX3d>& gt, const Eigen::MatrixX3d& template_pos,
                  const std::vector<int>& upper_face, bool absolute = false) {
    detail::check_metric_shapes(pred, gt);
    const int T = static_cast<int>(pred.size());
    if (T < 2) throw TooFewFrames("dynamics need at least 2 frames");
    if (upper_face.empty()) throw EmptyMask("empty upper-face region");
    if (template_pos.rows() != pred[0].rows())
        throw ShapeMismatch("template vertex count differs from sequences");

    auto dyn = [T](const std::vector<Eigen::MatrixX3d>& seq, const Eigen::MatrixX3d& ref, int v) {
        Eigen::VectorXd motion(T);
        for (int t = 0; t < T; ++t)
            motion[t] = (seq[static_cast<std::size_t>(t)].row(v) - ref.row(v)).norm();
        const double mean = motion.mean();
        return std::sqrt((motion.array() - mean).square().sum() / T);
    };

    double acc = 0.0;
    for (int v : upper_face) {
        if (v < 0 || v >= template_pos.rows())
            throw IndexOutOfRange("upper-face index " + std::to_string(v));
        const double d = dyn(gt, template_pos, v) - dyn(pred, template_pos, v);
        acc += absolute ? std::abs(d) : d;
    }
    return acc / static_cast<double>(upper_face.size());
}

namespace detail {

inline bool same_topology(const std::vector<Face>& a, const std::vector<Face>& b) {
    if (a.size() != b.size()) return false;
    auto normalize = [](const std::vector<Face>& faces) {
        std::vector<Face> out;
        out.reserve(faces.size());
        for (const Face& f : faces) out.push_back(cyclic_min_rotation(f));
        std::sort(out.begin(), out.end());
        return out;
    };
    return normalize(a) == normalize(b);
}

}  // namespace detail

// Full metric report for a prediction at the original vertex topology.
inline MetricReport evaluate_sequence(const AnimationSequence& pred,
                                      const std::vector<Eigen::MatrixX3d>& gt,
                                      const RegionMasks& masks, const Mesh& template_mesh,
                                      bool absolute_fdd = false) {
    if (pred.point_count() != template_mesh.vertex_count())
        throw TopologyMismatch("prediction has " + std::to_string(pred.point_count()) +
                               " points, template has " +
                               std::to_string(template_mesh.vertex_count()));
    if (!pred.topology.empty() && !detail::same_topology(pred.topology, template_mesh.faces))
        throw TopologyMismatch("prediction topology differs from the template mesh");

    MetricReport report;
    report.e_vl = lip_max_error(pred.frames, gt, masks.lip_vertices, &report.per_frame_max_lip);
    report.e_ve = eye_max_error(pred.frames, gt, masks.eye_vertices);
    report.fdd = fdd(pred.frames, gt, template_mesh.vertices, masks.upper_face_vertices,
                     absolute_fdd);
    return report;
}

struct MetricRow {
    std::string sequence;
    MetricReport report;
};

// One row per sequence plus an aggregate mean row.
inline void write_metric_csv(const std::vector<MetricRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "sequence,E_vl,E_ve,FDD\n";
    char buf[160];
    double svl = 0.0, sve = 0.0, sfdd = 0.0;
    for (const MetricRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", r.sequence.c_str(),
                      r.report.e_vl, r.report.e_ve, r.report.fdd);
        out << buf;
        svl += r.report.e_vl;
        sve += r.report.e_ve;
        sfdd += r.report.fdd;
    }
    if (!rows.empty()) {
        const double n = static_cast<double>(rows.size());
        std::snprintf(buf, sizeof(buf), "mean,%.17g,%.17g,%.17g\n", svl / n, sve / n, sfdd / n);
        out << buf;
    }
}

}  // namespace mmtalker
