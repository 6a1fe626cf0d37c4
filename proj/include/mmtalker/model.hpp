#pragma once

#include <map>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "mmtalker/autodiff.hpp"
#include "mmtalker/encoding.hpp"
#include "mmtalker/fusion.hpp"
#include "mmtalker/mesh.hpp"
#include "mmtalker/params.hpp"
#include "mmtalker/sampler.hpp"
#include "mmtalker/synthesis.hpp"
#include "mmtalker/uv_param.hpp"

namespace mmtalker {

struct ModelConfig {
    int D = 768;  // latent audio width
    int H = 32;   // audio encoding width
    int H1 = 32;  // fused vertex feature width
    int L = 16;   // spatio-temporal encoding width (even)
    int d_k = 16; // attention query/key width
    int h = 256;  // decoder hidden width
    int k = 3;    // temporal convolution kernel size
    bool use_ste_time = true;  // off: position encoding without time
    bool use_rgcn = true;      // off: per-vertex MLP fusion
    bool use_dcam = true;      // off: MLP over concatenated features

    nlohmann::json to_json() const {
        return {{"D", D},     {"H", H}, {"H1", H1},
                {"L", L},     {"d_k", d_k}, {"h", h},
                {"k", k},     {"use_ste_time", use_ste_time},
                {"use_rgcn", use_rgcn}, {"use_dcam", use_dcam}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.D = j.value("D", c.D);
        c.H = j.value("H", c.H);
        c.H1 = j.value("H1", c.H1);
        c.L = j.value("L", c.L);
        c.d_k = j.value("d_k", c.d_k);
        c.h = j.value("h", c.h);
        c.k = j.value("k", c.k);
        c.use_ste_time = j.value("use_ste_time", c.use_ste_time);
        c.use_rgcn = j.value("use_rgcn", c.use_rgcn);
        c.use_dcam = j.value("use_dcam", c.use_dcam);
        return c;
    }
};

inline ParamStore init_params(const ModelConfig& cfg, std::int64_t seed) {
    if (cfg.L < 2 || cfg.L % 2 != 0) throw ShapeMismatch("L must be even and >= 2");
    Rng rng(static_cast<std::uint64_t>(seed));
    ParamStore store;

    store.create("ste.w", Eigen::MatrixXd::Constant(1, 1, M_PI));

    store.create("enc_global.Wx", glorot_init(cfg.D, 4 * cfg.H, rng));
    store.create("enc_global.Wh", glorot_init(cfg.H, 4 * cfg.H, rng));
    store.create("enc_global.b", Eigen::MatrixXd::Zero(1, 4 * cfg.H));

    store.create("enc_local.K", glorot_init(static_cast<Eigen::Index>(cfg.k) * cfg.D, cfg.H, rng));
    store.create("enc_local.b", Eigen::MatrixXd::Zero(1, cfg.H));
    store.create("enc_local.W1", glorot_init(cfg.H, cfg.H, rng));
    store.create("enc_local.b1", Eigen::MatrixXd::Zero(1, cfg.H));
    store.create("enc_local.W2", glorot_init(cfg.H, cfg.H, rng));
    store.create("enc_local.b2", Eigen::MatrixXd::Zero(1, cfg.H));

    // the adjacency operator has row sum 2, so a graph-conv layer doubles
    // feature variance under plain glorot; halve the graph weights to keep
    // the fused features on the input scale
    const int width0 = cfg.L + cfg.H;
    store.create("rgcn.W0", 0.5 * glorot_init(width0, cfg.H1, rng));
    store.create("rgcn.W1", 0.5 * glorot_init(cfg.H1, cfg.H1, rng));
    if (cfg.use_rgcn && width0 != cfg.H1)
        store.create("rgcn.skip0", 0.5 * glorot_init(width0, cfg.H1, rng));

    if (cfg.use_dcam) {
        store.create("dcam.Wq", glorot_init(cfg.H1, cfg.d_k, rng));
        store.create("dcam.Wk", glorot_init(cfg.H, cfg.d_k, rng));
        store.create("dcam.Wv", glorot_init(cfg.H, cfg.H1, rng));
    } else {
        store.create("dcam_mlp.W1", glorot_init(cfg.H1 + cfg.H, 2 * cfg.H1, rng));
        store.create("dcam_mlp.b1", Eigen::MatrixXd::Zero(1, 2 * cfg.H1));
        store.create("dcam_mlp.W2", glorot_init(2 * cfg.H1, 2 * cfg.H1, rng));
        store.create("dcam_mlp.b2", Eigen::MatrixXd::Zero(1, 2 * cfg.H1));
    }

    const int widths[6] = {2 * cfg.H1, cfg.h, cfg.h, cfg.h, cfg.h, 3};
    for (int l = 0; l < 5; ++l) {
        store.create("decoder.W" + std::to_string(l + 1),
                     glorot_init(widths[l], widths[l + 1], rng));
        store.create("decoder.b" + std::to_string(l + 1),
                     Eigen::MatrixXd::Zero(1, widths[l + 1]));
    }
    return store;
}

// Registers every store entry as a tape parameter leaf; grads are read back
// through the same handles after backward().
struct ModelBinding {
    std::map<std::string, ad::Var> vars;

    ad::Var at(const std::string& name) const {
        auto it = vars.find(name);
        if (it == vars.end()) throw Error("parameter '" + name + "' not bound");
        return it->second;
    }

    std::map<std::string, Eigen::MatrixXd> grads() const {
        std::map<std::string, Eigen::MatrixXd> out;
        for (const auto& [name, var] : vars) out[name] = var.grad();
        return out;
    }
};

inline ModelBinding bind_params(ad::Tape& tape, const ParamStore& store) {
    ModelBinding b;
    for (const std::string& name : store.names()) b.vars[name] = tape.param(store.at(name), name);
    return b;
}

struct ForwardResult {
    ad::Var pred;   // (T*M) x 3 absolute positions
    ad::Var f_st;   // (T*N) x L
    ad::Var f_ag;   // T x H
    ad::Var f_al;   // (T*N) x H
    ad::Var f_pl;   // (T*N) x H1
    ad::Var f_lg;   // (T*N) x 2H1
    Eigen::MatrixX3d template_at_samples;  // M x 3
};

// The full pipeline on one tape: spatio-temporal vertex encoding, audio
// encoders, graph + attention fusion, barycentric interpolation at the
// sample points, displacement decoding on top of the sampled template.
inline ForwardResult model_forward(ad::Tape& tape, const ModelBinding& bind,
                                   const ModelConfig& cfg, const Mesh& mesh,
                                   const UVAtlas& atlas, const AdjacencyOperator& adjacency,
                                   const SampleSet& samples, const Eigen::MatrixXd& latent) {
    const int N = mesh.vertex_count();
    const int T = static_cast<int>(latent.rows());
    const int M = samples.count();
    if (latent.cols() != cfg.D) throw ShapeMismatch("latent width != configured D");

    ForwardResult r;
    r.f_st = ste_encode_all(tape, atlas.uv, bind.at("ste.w"), T, cfg.L, cfg.use_ste_time);

    ad::Var latent_var = tape.constant(latent, "latent");
    GlobalEncoderVars gvars{bind.at("enc_global.Wx"), bind.at("enc_global.Wh"),
                            bind.at("enc_global.b")};
    r.f_ag = encode_global(latent_var, gvars);

    LocalEncoderVars lvars{bind.at("enc_local.K"),  bind.at("enc_local.b"),
                           bind.at("enc_local.W1"), bind.at("enc_local.b1"),
                           bind.at("enc_local.W2"), bind.at("enc_local.b2"), cfg.k};
    r.f_al = ad::repeat_each_row(encode_local_frames(tape, latent, lvars), N);

    RgcnVars rgcn;
    rgcn.W0 = bind.at("rgcn.W0");
    rgcn.W1 = bind.at("rgcn.W1");
    if (bind.vars.count("rgcn.skip0")) {
        rgcn.skip0 = bind.at("rgcn.skip0");
        rgcn.has_skip0 = true;
    }
    DcamVars dcam;
    DcamMlpVars dcam_mlp;
    if (cfg.use_dcam)
        dcam = DcamVars{bind.at("dcam.Wq"), bind.at("dcam.Wk"), bind.at("dcam.Wv")};
    else
        dcam_mlp = DcamMlpVars{bind.at("dcam_mlp.W1"), bind.at("dcam_mlp.b1"),
                               bind.at("dcam_mlp.W2"), bind.at("dcam_mlp.b2")};

    FusionAblation ablation{cfg.use_rgcn, cfg.use_dcam};
    FusedFeature fused = fuse(adjacency.matrix, r.f_st, r.f_al, r.f_ag, rgcn, dcam, dcam_mlp, T,
                              N, ablation);
    r.f_pl = fused.f_pl;
    r.f_lg = fused.f_lg;

    ad::Var feat_s = interpolate_features(samples, atlas.faces, N, fused.f_lg, T);

    DecoderVars dec;
    for (int l = 1; l <= 5; ++l) {
        dec.W.push_back(bind.at("decoder.W" + std::to_string(l)));
        dec.b.push_back(bind.at("decoder.b" + std::to_string(l)));
    }
    ad::Var disp = decode_displacements(feat_s, dec);

    r.template_at_samples = sample_template_positions(samples, mesh, atlas.faces);
    Eigen::MatrixXd base(static_cast<Eigen::Index>(T) * M, 3);
    for (int t = 0; t < T; ++t)
        base.middleRows(static_cast<Eigen::Index>(t) * M, M) = r.template_at_samples;
    r.pred = ad::add(disp, tape.constant(std::move(base), "template_positions"));
    return r;
}

// Forward pass without gradients, packaged as an animation.
inline AnimationSequence synthesize_sequence(const Mesh& mesh, const UVAtlas& atlas,
                                             const AdjacencyOperator& adjacency,
                                             const SampleSet& samples,
                                             const AudioFeatureSequence& audio, int T,
                                             const ParamStore& store, const ModelConfig& cfg,
                                             double frame_rate = 30.0) {
    const Eigen::MatrixXd latent = resample_time(audio, T);
    ad::Tape tape;
    const ModelBinding bind = bind_params(tape, store);
    const ForwardResult fr =
        model_forward(tape, bind, cfg, mesh, atlas, adjacency, samples, latent);

    AnimationSequence anim;
    anim.frame_rate = frame_rate;
    anim.topology = samples.out_faces;
    const int M = samples.count();
    anim.frames.resize(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t)
        anim.frames[static_cast<std::size_t>(t)] =
            fr.pred.value().middleRows(static_cast<Eigen::Index>(t) * M, M);
    return anim;
}

}  // namespace mmtalker
