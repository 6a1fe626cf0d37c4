#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmtalker/losses.hpp"
#include "mmtalker/meshgen.hpp"
#include "mmtalker/model.hpp"

namespace mmtalker {

enum class SamplingMode { kFrozen, kPerEpochResample };

struct TrainingConfig {
    double learning_rate = 1e-4;
    int batch_size = 1;
    int steps = 2000;
    std::int64_t seed = 0;
    LossWeights weights;
    SamplingMode sampling_mode = SamplingMode::kFrozen;
    ModelConfig model;

    // sampler settings
    double alpha = 4.0;
    double sigma = 0.0;  // 0: 0.1 x UV bbox diagonal
    int M = 0;           // 0: 2N
    bool pin_boundary = true;
};

struct DatasetItem {
    Mesh template_mesh;
    std::vector<Eigen::MatrixX3d> gt_frames;  // T frames of N x 3
    AudioFeatureSequence audio;
    RegionMasks masks;
};

struct LossRecord {
    int step = 0;
    double total = 0.0;
    double rec = 0.0;
    double velocity = 0.0;
    double eye = 0.0;
};

inline void write_loss_history(const std::vector<LossRecord>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "step,L,L_rec,L_v,L_eye\n";
    char buf[160];
    for (const LossRecord& r : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.step, r.total, r.rec,
                      r.velocity, r.eye);
        out << buf;
    }
}

// One Adam update over every named parameter. Parameters without a gradient
// entry are left untouched.
inline void adam_step(ParamStore& store, const std::map<std::string, Eigen::MatrixXd>& grads,
                      double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    store.step += 1;
    const double t = static_cast<double>(store.step);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (const std::string& name : store.names()) {
        auto it = grads.find(name);
        if (it == grads.end()) continue;
        const Eigen::MatrixXd& g = it->second;
        Eigen::MatrixXd& m = store.moment1(name);
        Eigen::MatrixXd& v = store.moment2(name);
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
        store.at(name) -=
            lr * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix());
    }
}

// Per-item state precomputed once (or per resampling epoch).
struct PreparedItem {
    UVAtlas atlas;
    AdjacencyOperator adjacency;
    SamplingDistribution distribution;
    SampleSet samples;
    Eigen::MatrixXd latent;       // T x D
    Eigen::MatrixXd gt_sampled;   // (T*M) x 3
    std::vector<int> eye_samples;
    int T = 0;
    int boundary_pins = 0;  // leading pinned samples excluded from the score
};

inline PreparedItem prepare_item(const DatasetItem& item, const TrainingConfig& cfg,
                                 std::int64_t sample_seed) {
    PreparedItem prep;
    prep.T = static_cast<int>(item.gt_frames.size());
    prep.atlas = conformal_parameterize(item.template_mesh);
    prep.adjacency = build_adjacency(item.template_mesh);
    const double sigma = cfg.sigma > 0.0 ? cfg.sigma : default_sigma(prep.atlas);
    prep.distribution =
        init_distribution(item.template_mesh, prep.atlas, item.masks, cfg.alpha, sigma);
    const int M = cfg.M > 0 ? cfg.M : 2 * item.template_mesh.vertex_count();
    prep.samples = draw_samples(prep.distribution, prep.atlas, M, sample_seed, cfg.pin_boundary);
    if (cfg.pin_boundary)
        prep.boundary_pins =
            static_cast<int>(boundary_vertex_indices(prep.atlas.faces).size());
    prep.latent = resample_time(item.audio, prep.T);
    prep.gt_sampled = resample_ground_truth(item.gt_frames, prep.samples, prep.atlas.faces);
    prep.eye_samples =
        region_sample_indices(prep.samples, prep.atlas.faces, item.masks.eye_vertices);
    return prep;
}

// Redraw samples for a new epoch, keeping the logits learned so far.
inline void resample_item(PreparedItem& prep, const DatasetItem& item, const TrainingConfig& cfg,
                          std::int64_t sample_seed) {
    const int M = cfg.M > 0 ? cfg.M : 2 * item.template_mesh.vertex_count();
    prep.samples = draw_samples(prep.distribution, prep.atlas, M, sample_seed, cfg.pin_boundary);
    prep.gt_sampled = resample_ground_truth(item.gt_frames, prep.samples, prep.atlas.faces);
    prep.eye_samples =
        region_sample_indices(prep.samples, prep.atlas.faces, item.masks.eye_vertices);
}

struct TrainResult {
    std::vector<LossRecord> history;
    std::vector<PreparedItem> prepared;  // final per-item state (samples, logits)
};

// Sequential Adam loop, batch size 1: step s trains on item s mod |dataset|.
// With per-epoch resampling the sample set is redrawn at each epoch boundary
// and the sampling logits take a score-function step using the negative
// per-sample reconstruction loss as reward.
inline TrainResult train(const std::vector<DatasetItem>& dataset, const TrainingConfig& cfg,
                         ParamStore& store) {
    if (dataset.empty()) throw SizeTooSmall("empty dataset");
    if (cfg.learning_rate < 0.0) throw DomainError("negative learning rate");

    TrainResult result;
    result.prepared.reserve(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i)
        result.prepared.push_back(
            prepare_item(dataset[i], cfg, cfg.seed + static_cast<std::int64_t>(i)));

    // resume-aware: a reloaded checkpoint continues at its stored step
    const int start = static_cast<int>(store.step);
    for (int step = start; step < cfg.steps; ++step) {
        const std::size_t item_idx = static_cast<std::size_t>(step) % dataset.size();
        PreparedItem& prep = result.prepared[item_idx];
        const DatasetItem& item = dataset[item_idx];

        ad::Tape tape;
        const ModelBinding bind = bind_params(tape, store);
        const ForwardResult fr = model_forward(tape, bind, cfg.model, item.template_mesh,
                                               prep.atlas, prep.adjacency, prep.samples,
                                               prep.latent);
        const LossVars losses =
            total_loss_op(fr.pred, prep.gt_sampled, prep.T, prep.samples.count(),
                          prep.eye_samples, cfg.weights);

        LossRecord rec;
        rec.step = step;
        rec.total = losses.total.value()(0, 0);
        rec.rec = losses.rec.value()(0, 0);
        rec.velocity = losses.velocity.value()(0, 0);
        rec.eye = losses.eye.value()(0, 0);
        if (!std::isfinite(rec.total))
            throw NonFiniteLoss("step " + std::to_string(step) + ": first non-finite tensor: " +
                                tape.first_nonfinite());
        result.history.push_back(rec);

        tape.backward(losses.total);
        adam_step(store, bind.grads(), cfg.learning_rate);

        // score-function update + fresh samples at epoch boundaries
        if (cfg.sampling_mode == SamplingMode::kPerEpochResample &&
            (step + 1) % static_cast<int>(dataset.size()) == 0) {
            const int M = prep.samples.count();
            const Eigen::MatrixXd& pv = fr.pred.value();
            std::vector<int> drawn_faces;
            std::vector<double> rewards;
            for (int m = prep.boundary_pins; m < M; ++m) {
                double err = 0.0;
                for (int t = 0; t < prep.T; ++t)
                    err += (pv.row(static_cast<Eigen::Index>(t) * M + m) -
                            prep.gt_sampled.row(static_cast<Eigen::Index>(t) * M + m))
                               .squaredNorm();
                drawn_faces.push_back(prep.samples.locations[m].face_index);
                rewards.push_back(-err / prep.T);
            }
            if (!drawn_faces.empty()) {
                const Eigen::VectorXd g =
                    score_gradient(prep.distribution, drawn_faces, rewards);
                prep.distribution.logits += cfg.learning_rate * g;  // ascent on reward
            }
            const std::int64_t epoch = (step + 1) / static_cast<int>(dataset.size());
            for (std::size_t i = 0; i < dataset.size(); ++i)
                resample_item(result.prepared[i], dataset[i], cfg,
                              cfg.seed + 1000003LL * epoch + static_cast<std::int64_t>(i));
        }
    }
    return result;
}

struct SyntheticData {
    DatasetItem item;
    UVAtlas atlas;
    SampleSet samples;
};

// Desk-scale stand-in for a captured dataset: a subdivided hemisphere cap
// whose surface is displaced by low-pass-filtered audio drive signals, so
// the audio genuinely predicts the motion. Masks are assigned by geometric
// region on the cap.
inline SyntheticData make_synthetic_dataset(std::int64_t seed, int n_target, int T, int D, int M,
                                            double amplitude = 0.05) {
    if (n_target < 4 || T < 2) throw SizeTooSmall("need N >= 4 and T >= 2");
    if (D < 1 || M < 3) throw SizeTooSmall("need D >= 1 and M >= 3");

    SyntheticData data;
    data.item.template_mesh = make_cap_mesh_with_target(n_target);
    const Mesh& mesh = data.item.template_mesh;
    const int N = mesh.vertex_count();

    data.item.audio = synth_features(seed, T, D, 30.0);

    // geometric regions on the cap (apex +z, boundary ring at the equator)
    const Eigen::Vector3d p_lip = Eigen::Vector3d(0.0, -0.85, 0.53).normalized();
    const Eigen::Vector3d p_eye_l = Eigen::Vector3d(-0.45, 0.55, 0.70).normalized();
    const Eigen::Vector3d p_eye_r = Eigen::Vector3d(0.45, 0.55, 0.70).normalized();

    auto angular_near = [&](const Eigen::Vector3d& center, double radius) {
        std::vector<int> idx;
        for (int v = 0; v < N; ++v) {
            const Eigen::Vector3d p = mesh.vertices.row(v).normalized();
            if (std::acos(std::clamp(p.dot(center), -1.0, 1.0)) < radius) idx.push_back(v);
        }
        if (idx.empty()) {  // tiny meshes: fall back to the nearest vertex
            int best = 0;
            double bd = -2.0;
            for (int v = 0; v < N; ++v) {
                const double d = mesh.vertices.row(v).normalized().dot(center);
                if (d > bd) {
                    bd = d;
                    best = v;
                }
            }
            idx.push_back(best);
        }
        return idx;
    };

    RegionMasks& masks = data.item.masks;
    masks.lip_vertices = angular_near(p_lip, 0.45);
    {
        std::vector<int> l = angular_near(p_eye_l, 0.30), r = angular_near(p_eye_r, 0.30);
        l.insert(l.end(), r.begin(), r.end());
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
        masks.eye_vertices = l;
    }
    for (int v = 0; v < N; ++v)
        if (mesh.vertices(v, 1) > 0.15) masks.upper_face_vertices.push_back(v);
    if (masks.upper_face_vertices.empty()) masks.upper_face_vertices.push_back(0);
    for (const Eigen::Vector3d& c : {p_lip, p_eye_l, p_eye_r, Eigen::Vector3d(0, 0, 1)})
        masks.keypoints.push_back(angular_near(c, 0.0)[0]);
    std::sort(masks.keypoints.begin(), masks.keypoints.end());
    masks.keypoints.erase(std::unique(masks.keypoints.begin(), masks.keypoints.end()),
                          masks.keypoints.end());

    // drive signals: moving-average filtered leading audio dimensions
    const int K = std::min(3, D);
    const int W = std::max(1, T / 16);
    Eigen::MatrixXd drive(T, K);
    for (int t = 0; t < T; ++t)
        for (int k = 0; k < K; ++k) {
            double acc = 0.0;
            int cnt = 0;
            for (int d = -W; d <= W; ++d) {
                const int s = t + d;
                if (s >= 0 && s < T) {
                    acc += data.item.audio.frames(s, k);
                    ++cnt;
                }
            }
            drive(t, k) = acc / cnt;
        }
    const double drive_scale = std::max(drive.cwiseAbs().maxCoeff(), 1e-12);
    drive /= drive_scale;

    // smooth spatial bumps centered on the face regions, pushed along the
    // (unit-sphere) surface normal
    const std::array<Eigen::Vector3d, 3> centers = {p_lip, p_eye_l, p_eye_r};
    Eigen::MatrixXd basis(N, K);
    for (int v = 0; v < N; ++v) {
        const Eigen::Vector3d p = mesh.vertices.row(v).normalized();
        for (int k = 0; k < K; ++k) {
            const double ang =
                std::acos(std::clamp(p.dot(centers[static_cast<std::size_t>(k % 3)]), -1.0, 1.0));
            basis(v, k) = std::exp(-ang * ang / (2.0 * 0.4 * 0.4));
        }
    }

    data.item.gt_frames.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        Eigen::MatrixX3d frame = mesh.vertices;
        for (int v = 0; v < N; ++v) {
            double mag = 0.0;
            for (int k = 0; k < K; ++k) mag += drive(t, k) * basis(v, k);
            frame.row(v) += amplitude * mag * mesh.vertices.row(v).normalized();
        }
        data.item.gt_frames[static_cast<std::size_t>(t)] = frame;
    }

    data.atlas = conformal_parameterize(mesh);
    const SamplingDistribution dist =
        init_distribution(mesh, data.atlas, masks, 4.0, default_sigma(data.atlas));
    data.samples = draw_samples(dist, data.atlas, M, seed, true);
    return data;
}

}  // namespace mmtalker
