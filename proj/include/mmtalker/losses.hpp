#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "mmtalker/autodiff.hpp"
#include "mmtalker/errors.hpp"
#include "mmtalker/sampler.hpp"

namespace mmtalker {

// Losses operate on frame-flattened position blocks: (T*M) x 3 with row
// t*M + m. Ground truth is always the resampled sequence.

struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 10.0;
    double lambda3 = 0.01;
};

namespace detail {

inline void check_loss_shapes(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, int T,
                              int M) {
    if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
        throw ShapeMismatch("pred/gt shapes differ");
    if (pred.cols() != 3 || pred.rows() != static_cast<Eigen::Index>(T) * M)
        throw ShapeMismatch("positions must be (T*M) x 3");
    if (T < 1 || M < 1) throw ShapeMismatch("T and M must be >= 1");
}

}  // namespace detail

// Mean squared vertex error: (1 / (T*M)) * sum_t sum_m ||gt - pred||^2.
inline double loss_rec(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, int T, int M) {
    detail::check_loss_shapes(pred, gt, T, M);
    return (gt - pred).squaredNorm() / (static_cast<double>(T) * M);
}

// Velocity mismatch between consecutive frames, normalized by T*M (the sum
// itself starts at the second frame). Zero for single-frame sequences.
inline double loss_velocity(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, int T,
                            int M) {
    detail::check_loss_shapes(pred, gt, T, M);
    if (T < 2) return 0.0;
    double acc = 0.0;
    for (int t = 1; t < T; ++t) {
        const auto gd = gt.middleRows(static_cast<Eigen::Index>(t) * M, M) -
                        gt.middleRows(static_cast<Eigen::Index>(t - 1) * M, M);
        const auto pd = pred.middleRows(static_cast<Eigen::Index>(t) * M, M) -
                        pred.middleRows(static_cast<Eigen::Index>(t - 1) * M, M);
        acc += (gd - pd).squaredNorm();
    }
    return acc / (static_cast<double>(T) * M);
}

namespace detail {

// Temporal motion-magnitude distribution of one sample: T-1 step norms,
// epsilon-smoothed and normalized.
inline Eigen::VectorXd motion_distribution(const Eigen::MatrixXd& pos, int T, int M, int sample,
                                           double eps) {
    Eigen::VectorXd m(T - 1);
    for (int t = 1; t < T; ++t)
        m[t - 1] = (pos.row(static_cast<Eigen::Index>(t) * M + sample) -
                    pos.row(static_cast<Eigen::Index>(t - 1) * M + sample))
                       .norm();
    const Eigen::VectorXd sm = m.array() + eps;
    return sm / sm.sum();
}

}  // namespace detail

// KL divergence KL(p_gt || q_pred) of per-sample temporal motion-magnitude
// distributions, averaged over the eye samples. Zero when the eye set is
// empty or the sequence has fewer than two frames.
inline double loss_eye(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, int T, int M,
                       const std::vector<int>& eye_samples, double eps = 1e-8) {
    detail::check_loss_shapes(pred, gt, T, M);
    if (eye_samples.empty() || T < 2) return 0.0;
    double acc = 0.0;
    for (int j : eye_samples) {
        if (j < 0 || j >= M) throw ShapeMismatch("eye sample index out of range");
        const Eigen::VectorXd p = detail::motion_distribution(gt, T, M, j, eps);
        const Eigen::VectorXd q = detail::motion_distribution(pred, T, M, j, eps);
        acc += (p.array() * (p.array() / q.array()).log()).sum();
    }
    return acc / static_cast<double>(eye_samples.size());
}

struct LossBreakdown {
    double total = 0.0;
    double rec = 0.0;
    double velocity = 0.0;
    double eye = 0.0;
};

inline LossBreakdown total_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& gt, int T,
                                int M, const std::vector<int>& eye_samples,
                                const LossWeights& w) {
    if (w.lambda1 < 0.0 || w.lambda2 < 0.0 || w.lambda3 < 0.0)
        throw DomainError("loss weights must be non-negative");
    LossBreakdown out;
    out.rec = loss_rec(pred, gt, T, M);
    out.velocity = loss_velocity(pred, gt, T, M);
    out.eye = loss_eye(pred, gt, T, M, eye_samples);
    out.total = w.lambda1 * out.rec + w.lambda2 * out.velocity + w.lambda3 * out.eye;
    return out;
}

// ---- tape versions -------------------------------------------------------

inline ad::Var loss_rec_op(const ad::Var& pred, const Eigen::MatrixXd& gt, int T, int M) {
    const double value = loss_rec(pred.value(), gt, T, M);
    ad::Mat y(1, 1);
    y(0, 0) = value;
    const double coeff = 2.0 / (static_cast<double>(T) * M);
    return pred.tape()->make(
        std::move(y), pred.tape()->requires_grad(pred),
        [pred, gt, coeff](ad::Tape& t, const ad::Mat& g) {
            t.accumulate(pred, (g(0, 0) * coeff) * (pred.value() - gt));
        },
        "loss_rec");
}

inline ad::Var loss_velocity_op(const ad::Var& pred, const Eigen::MatrixXd& gt, int T, int M) {
    const double value = loss_velocity(pred.value(), gt, T, M);
    ad::Mat y(1, 1);
    y(0, 0) = value;
    return pred.tape()->make(
        std::move(y), pred.tape()->requires_grad(pred),
        [pred, gt, T, M](ad::Tape& t, const ad::Mat& g) {
            if (T < 2) return;
            const Eigen::MatrixXd& pv = pred.value();
            // r_t = (gt_t - gt_{t-1}) - (pred_t - pred_{t-1});
            // dL/dpred_t = (2 / (T*M)) * (r_{t+1} - r_t)
            std::vector<Eigen::MatrixXd> r(static_cast<std::size_t>(T));
            r[0] = Eigen::MatrixXd::Zero(M, 3);
            for (int t2 = 1; t2 < T; ++t2)
                r[static_cast<std::size_t>(t2)] =
                    (gt.middleRows(static_cast<Eigen::Index>(t2) * M, M) -
                     gt.middleRows(static_cast<Eigen::Index>(t2 - 1) * M, M)) -
                    (pv.middleRows(static_cast<Eigen::Index>(t2) * M, M) -
                     pv.middleRows(static_cast<Eigen::Index>(t2 - 1) * M, M));
            const double coeff = g(0, 0) * 2.0 / (static_cast<double>(T) * M);
            Eigen::MatrixXd d = Eigen::MatrixXd::Zero(pv.rows(), 3);
            for (int t2 = 0; t2 < T; ++t2) {
                Eigen::MatrixXd acc = -r[static_cast<std::size_t>(t2)];
                if (t2 + 1 < T) acc += r[static_cast<std::size_t>(t2 + 1)];
                d.middleRows(static_cast<Eigen::Index>(t2) * M, M) = coeff * acc;
            }
            t.accumulate(pred, d);
        },
        "loss_velocity");
}

inline ad::Var loss_eye_op(const ad::Var& pred, const Eigen::MatrixXd& gt, int T, int M,
                           const std::vector<int>& eye_samples, double eps = 1e-8) {
    const double value = loss_eye(pred.value(), gt, T, M, eye_samples, eps);
    ad::Mat y(1, 1);
    y(0, 0) = value;
    return pred.tape()->make(
        std::move(y), pred.tape()->requires_grad(pred),
        [pred, gt, T, M, eye_samples, eps](ad::Tape& t, const ad::Mat& g) {
            if (eye_samples.empty() || T < 2) return;
            const Eigen::MatrixXd& pv = pred.value();
            Eigen::MatrixXd d = Eigen::MatrixXd::Zero(pv.rows(), 3);
            const double inv_count = 1.0 / static_cast<double>(eye_samples.size());
            for (int j : eye_samples) {
                const Eigen::VectorXd p = detail::motion_distribution(gt, T, M, j, eps);
                Eigen::VectorXd m(T - 1);
                for (int t2 = 1; t2 < T; ++t2)
                    m[t2 - 1] = (pv.row(static_cast<Eigen::Index>(t2) * M + j) -
                                 pv.row(static_cast<Eigen::Index>(t2 - 1) * M + j))
                                    .norm();
                const double S = (m.array() + eps).sum();
                // dKL/dm_s = 1/S - p_s / (m_s + eps)
                for (int t2 = 1; t2 < T; ++t2) {
                    const double ms = m[t2 - 1];
                    const double dm = 1.0 / S - p[t2 - 1] / (ms + eps);
                    if (ms <= 0.0) continue;  // norm gradient undefined at 0
                    const Eigen::RowVector3d dir =
                        (pv.row(static_cast<Eigen::Index>(t2) * M + j) -
                         pv.row(static_cast<Eigen::Index>(t2 - 1) * M + j)) /
                        ms;
                    const Eigen::RowVector3d delta = g(0, 0) * inv_count * dm * dir;
                    d.row(static_cast<Eigen::Index>(t2) * M + j) += delta;
                    d.row(static_cast<Eigen::Index>(t2 - 1) * M + j) -= delta;
                }
            }
            t.accumulate(pred, d);
        },
        "loss_eye");
}

struct LossVars {
    ad::Var total;
    ad::Var rec;
    ad::Var velocity;
    ad::Var eye;
};

inline LossVars total_loss_op(const ad::Var& pred, const Eigen::MatrixXd& gt, int T, int M,
                              const std::vector<int>& eye_samples, const LossWeights& w) {
    LossVars out;
    out.rec = loss_rec_op(pred, gt, T, M);
    out.velocity = loss_velocity_op(pred, gt, T, M);
    out.eye = loss_eye_op(pred, gt, T, M, eye_samples);
    out.total = ad::add(ad::add(ad::scale(out.rec, w.lambda1), ad::scale(out.velocity, w.lambda2)),
                        ad::scale(out.eye, w.lambda3));
    return out;
}

// A sample belongs to a vertex region when its location's dominant
// barycentric weight sits on a region vertex (lowest corner wins ties).
inline std::vector<int> region_sample_indices(const SampleSet& samples,
                                              const std::vector<Face>& atlas_faces,
                                              const std::vector<int>& region_vertices) {
    std::set<int> region(region_vertices.begin(), region_vertices.end());
    std::vector<int> out;
    for (int m = 0; m < samples.count(); ++m) {
        const BarycentricLocation& loc = samples.locations[m];
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (loc.coords[k] > loc.coords[best]) best = k;
        if (region.count(atlas_faces[loc.face_index][best])) out.push_back(m);
    }
    return out;
}

// Ground truth at the sample points: per frame barycentric blend of the
// gt vertex positions.
inline Eigen::MatrixXd resample_ground_truth(const std::vector<Eigen::MatrixX3d>& gt_frames,
                                             const SampleSet& samples,
                                             const std::vector<Face>& atlas_faces) {
    const int T = static_cast<int>(gt_frames.size());
    const int M = samples.count();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(T) * M, 3);
    for (int t = 0; t < T; ++t)
        for (int m = 0; m < M; ++m)
            out.row(static_cast<Eigen::Index>(t) * M + m) =
                barycentric_eval_rows(samples.locations[m], atlas_faces,
                                      gt_frames[static_cast<std::size_t>(t)])
                    .transpose();
    return out;
}

}  // namespace mmtalker
