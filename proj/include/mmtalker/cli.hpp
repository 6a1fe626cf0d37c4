#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmtalker/gradcheck.hpp"
#include "mmtalker/metrics.hpp"
#include "mmtalker/model.hpp"
#include "mmtalker/training.hpp"

namespace mmtalker::cli {

namespace detail {

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("'") + path + "' is not valid JSON: " + e.what());
    }
    return j;
}

struct TrainSpec {
    TrainingConfig cfg;
    std::string template_path;
    std::string gt_path;
    std::string audio_path;
    std::string masks_path;
    std::string history_path;  // empty: derive from checkpoint path
};

inline TrainSpec parse_train_config(const std::string& path) {
    const nlohmann::json j = load_json(path);
    TrainSpec spec;
    for (const char* key : {"template", "gt_frames", "audio", "masks"})
        if (!j.contains(key))
            throw MissingField(std::string("train config lacks '") + key + "'");
    spec.template_path = j["template"].get<std::string>();
    spec.gt_path = j["gt_frames"].get<std::string>();
    spec.audio_path = j["audio"].get<std::string>();
    spec.masks_path = j["masks"].get<std::string>();
    spec.history_path = j.value("history", std::string());

    TrainingConfig& cfg = spec.cfg;
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.weights.lambda1 = j.value("lambda1", cfg.weights.lambda1);
    cfg.weights.lambda2 = j.value("lambda2", cfg.weights.lambda2);
    cfg.weights.lambda3 = j.value("lambda3", cfg.weights.lambda3);
    const std::string mode = j.value("sampling_mode", std::string("frozen"));
    if (mode == "frozen")
        cfg.sampling_mode = SamplingMode::kFrozen;
    else if (mode == "per-epoch-resample")
        cfg.sampling_mode = SamplingMode::kPerEpochResample;
    else
        throw ParseError("unknown sampling_mode '" + mode + "'");
    if (j.contains("sampler")) {
        const auto& s = j["sampler"];
        cfg.alpha = s.value("alpha", cfg.alpha);
        cfg.sigma = s.value("sigma", cfg.sigma);
        cfg.M = s.value("M", cfg.M);
        cfg.pin_boundary = s.value("pin_boundary", cfg.pin_boundary);
    }
    if (j.contains("model")) cfg.model = ModelConfig::from_json(j["model"]);
    if (cfg.learning_rate <= 0.0) throw DomainError("learning_rate must be positive");
    if (cfg.steps < 1 || cfg.batch_size < 1) throw DomainError("steps/batch_size must be positive");
    return spec;
}

inline std::vector<Eigen::MatrixX3d> load_gt_frames(const std::string& path) {
    return load_animation_container(path).frames;
}

inline AnimationSequence load_prediction(const std::string& path) {
    if (std::filesystem::is_directory(path)) {
        const nlohmann::json manifest = load_json(path + "/manifest.json");
        AnimationSequence anim;
        anim.frame_rate = manifest.value("frame_rate", 30.0);
        const int count = manifest.value("frame_count", 0);
        char name[64];
        for (int t = 0; t < count; ++t) {
            std::snprintf(name, sizeof(name), "frame_%05d.obj", t);
            const Mesh m = load_obj(path + std::string("/") + name);
            anim.frames.push_back(m.vertices);
            if (t == 0) anim.topology = m.faces;
        }
        return anim;
    }
    return load_animation_container(path);
}

}  // namespace detail

// Entry point behind the binary's main(); exposed so tests can drive the
// exact CLI surface in-process. Exit codes: 0 success, 1 domain error,
// 2 usage error.
inline int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"speech-driven multi-resolution 3D face animation toolkit"};
    app.require_subcommand(1);

    // parameterize
    auto* cmd_param = app.add_subcommand("parameterize", "conformally flatten a mesh to a UV atlas");
    std::string param_mesh, param_out;
    cmd_param->add_option("mesh", param_mesh, "input OBJ mesh")->required();
    cmd_param->add_option("-o,--out", param_out, "output atlas (.obj with vt, or container)")
        ->required();

    // sample
    auto* cmd_sample = app.add_subcommand("sample", "draw non-uniform UV samples");
    std::string sample_mesh, sample_atlas, sample_masks, sample_out;
    int sample_M = 0;
    std::int64_t sample_seed = 0;
    double sample_alpha = 4.0, sample_sigma = 0.0;
    bool sample_no_pin = false;
    cmd_sample->add_option("mesh", sample_mesh)->required();
    cmd_sample->add_option("atlas", sample_atlas)->required();
    cmd_sample->add_option("masks", sample_masks)->required();
    cmd_sample->add_option("-M,--samples", sample_M, "number of samples");
    cmd_sample->add_option("--seed", sample_seed, "RNG seed");
    cmd_sample->add_option("-o,--out", sample_out, "output sample-set container")->required();
    cmd_sample->add_option("--alpha", sample_alpha, "keypoint boost (default 4)");
    cmd_sample->add_option("--sigma", sample_sigma, "keypoint falloff (default 0.1 x UV diag)");
    cmd_sample->add_flag("--no-pin-boundary", sample_no_pin, "do not pin boundary vertices");
    bool sample_pin_all = false;
    cmd_sample->add_flag("--pin-all", sample_pin_all,
                         "pin every original vertex (original-topology evaluation mode; "
                         "ignores -M and --seed)");

    // make-synthetic
    auto* cmd_synth_data = app.add_subcommand("make-synthetic", "generate a synthetic dataset");
    std::string synth_dir;
    std::int64_t synth_seed = 0;
    int synth_N = 200, synth_T = 20, synth_D = 32, synth_M = 300;
    double synth_amplitude = 0.05;
    cmd_synth_data->add_option("--seed", synth_seed)->required();
    cmd_synth_data->add_option("--out-dir", synth_dir)->required();
    cmd_synth_data->add_option("--N", synth_N, "target vertex count (default 200)");
    cmd_synth_data->add_option("--T", synth_T, "frame count (default 20)");
    cmd_synth_data->add_option("--D", synth_D, "latent audio width (default 32)");
    cmd_synth_data->add_option("--M", synth_M, "sample count (default 300)");
    cmd_synth_data->add_option("--amplitude", synth_amplitude, "motion amplitude (default 0.05)");

    // train
    auto* cmd_train = app.add_subcommand("train", "train the model from a JSON config");
    std::string train_config, train_out, train_resume;
    bool no_ste = false, no_rgcn = false, no_dcam = false;
    int train_steps_override = -1;
    cmd_train->add_option("config", train_config, "JSON training config")->required();
    cmd_train->add_option("-o,--out", train_out, "output checkpoint")->required();
    cmd_train->add_option("--resume", train_resume, "checkpoint to continue from");
    cmd_train->add_option("--steps", train_steps_override, "override config steps");
    cmd_train->add_flag("--no-ste", no_ste, "position encoding without time");
    cmd_train->add_flag("--no-rgcn", no_rgcn, "replace graph convolution with an MLP");
    cmd_train->add_flag("--no-dcam", no_dcam, "replace cross-attention with an MLP");

    // synth
    auto* cmd_synth = app.add_subcommand("synth", "synthesize an animation from audio");
    std::string syn_ckpt, syn_audio, syn_out, syn_mesh, syn_atlas, syn_samples;
    int syn_frames = 0;
    double syn_fps = 30.0;
    bool syn_container = false;
    cmd_synth->add_option("checkpoint", syn_ckpt)->required();
    cmd_synth->add_option("audio", syn_audio, "feature container")->required();
    cmd_synth->add_option("-o,--out", syn_out, "output animation directory")->required();
    cmd_synth->add_option("--mesh", syn_mesh, "template OBJ")->required();
    cmd_synth->add_option("--samples", syn_samples, "sample-set container")->required();
    cmd_synth->add_option("--atlas", syn_atlas, "atlas file (default: recompute)");
    cmd_synth->add_option("--frames", syn_frames, "frame count (default: audio length)");
    cmd_synth->add_option("--fps", syn_fps, "frame rate for the manifest");
    cmd_synth->add_flag("--container", syn_container, "also write frames.mmtk");

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a prediction against ground truth");
    std::string eval_pred, eval_gt, eval_masks, eval_out, eval_template;
    bool eval_abs_fdd = false;
    cmd_eval->add_option("pred", eval_pred, "animation dir or container")->required();
    cmd_eval->add_option("gt", eval_gt, "ground-truth animation container")->required();
    cmd_eval->add_option("masks", eval_masks, "masks JSON")->required();
    cmd_eval->add_option("-o,--out", eval_out, "output CSV")->required();
    cmd_eval->add_option("--template", eval_template, "template OBJ")->required();
    cmd_eval->add_flag("--abs-fdd", eval_abs_fdd, "report |FDD| instead of signed");

    // gradcheck
    auto* cmd_grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string grad_module;
    cmd_grad->add_option("--module", grad_module, "run only checks whose name contains this");

    std::vector<const char*> argv;
    argv.push_back("mmtalker");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cmd_param->parsed()) {
            const Mesh mesh = load_obj(param_mesh);
            const UVAtlas atlas = conformal_parameterize(mesh);
            save_atlas(atlas, mesh, param_out);
        } else if (cmd_sample->parsed()) {
            const Mesh mesh = load_obj(sample_mesh);
            const UVAtlas atlas = load_atlas(sample_atlas, mesh);
            if (sample_pin_all) {
                save_sample_set(pin_all_vertices(atlas), sample_out);
            } else {
                if (cmd_sample->count("-M") == 0 || cmd_sample->count("--seed") == 0) {
                    std::cerr << "sample: -M and --seed are required unless --pin-all is set\n";
                    return 2;
                }
                const RegionMasks masks = load_region_masks(sample_masks, mesh);
                const double sigma = sample_sigma > 0.0 ? sample_sigma : default_sigma(atlas);
                const SamplingDistribution dist =
                    init_distribution(mesh, atlas, masks, sample_alpha, sigma);
                const SampleSet set =
                    draw_samples(dist, atlas, sample_M, sample_seed, !sample_no_pin);
                save_sample_set(set, sample_out);
            }
        } else if (cmd_synth_data->parsed()) {
            const SyntheticData data = make_synthetic_dataset(synth_seed, synth_N, synth_T,
                                                              synth_D, synth_M, synth_amplitude);
            std::filesystem::create_directories(synth_dir);
            const std::string dir = synth_dir + "/";
            save_obj(data.item.template_mesh, dir + "template.obj");
            save_atlas(data.atlas, data.item.template_mesh, dir + "atlas.obj");
            save_region_masks(data.item.masks, dir + "masks.json");
            save_features(data.item.audio, dir + "audio.mmtk");
            save_sample_set(data.samples, dir + "samples.mmtk");
            AnimationSequence gt;
            gt.frames = data.item.gt_frames;
            gt.topology = data.item.template_mesh.faces;
            gt.frame_rate = data.item.audio.source_rate;
            save_animation_container(gt, dir + "gt.mmtk");
            nlohmann::json cfg = {
                {"template", dir + "template.obj"}, {"gt_frames", dir + "gt.mmtk"},
                {"audio", dir + "audio.mmtk"},      {"masks", dir + "masks.json"},
                {"learning_rate", 1e-4},            {"steps", 2000},
                {"seed", synth_seed},               {"lambda1", 1.0},
                {"lambda2", 10.0},                  {"lambda3", 0.01},
                {"sampling_mode", "frozen"},
                {"sampler",
                 {{"alpha", 4.0}, {"sigma", 0.0}, {"M", synth_M}, {"pin_boundary", true}}},
                {"model", ModelConfig{synth_D, 32, 32, 16, 16, 64, 3}.to_json()}};
            std::ofstream cfg_out(dir + "train_config.json");
            cfg_out << cfg.dump(2) << '\n';
        } else if (cmd_train->parsed()) {
            detail::TrainSpec spec = detail::parse_train_config(train_config);
            if (train_steps_override > 0) spec.cfg.steps = train_steps_override;
            if (no_ste) spec.cfg.model.use_ste_time = false;
            if (no_rgcn) spec.cfg.model.use_rgcn = false;
            if (no_dcam) spec.cfg.model.use_dcam = false;

            DatasetItem item;
            item.template_mesh = load_obj(spec.template_path);
            item.gt_frames = detail::load_gt_frames(spec.gt_path);
            item.audio = load_features(spec.audio_path);
            item.masks = load_region_masks(spec.masks_path, item.template_mesh);

            ParamStore store = train_resume.empty()
                                   ? init_params(spec.cfg.model, spec.cfg.seed)
                                   : ParamStore::load(train_resume);
            const TrainResult result = train({item}, spec.cfg, store);

            nlohmann::json meta;
            meta["model"] = spec.cfg.model.to_json();
            store.save(train_out, meta);
            save_sample_set(result.prepared[0].samples, train_out + ".samples.mmtk");
            const std::string hist =
                spec.history_path.empty() ? train_out + ".history.csv" : spec.history_path;
            write_loss_history(result.history, hist);
        } else if (cmd_synth->parsed()) {
            nlohmann::json meta;
            const ParamStore store = ParamStore::load(syn_ckpt, &meta);
            ModelConfig cfg;
            if (meta.contains("model")) cfg = ModelConfig::from_json(meta["model"]);
            const Mesh mesh = load_obj(syn_mesh);
            const UVAtlas atlas =
                syn_atlas.empty() ? conformal_parameterize(mesh) : load_atlas(syn_atlas, mesh);
            const AdjacencyOperator adjacency = build_adjacency(mesh);
            const SampleSet samples = load_sample_set(syn_samples);
            const AudioFeatureSequence audio = load_features(syn_audio);
            const int T = syn_frames > 0 ? syn_frames : audio.length();
            const AnimationSequence anim =
                synthesize_sequence(mesh, atlas, adjacency, samples, audio, T, store, cfg, syn_fps);
            save_animation_objs(anim, syn_out);
            if (syn_container) save_animation_container(anim, syn_out + "/frames.mmtk");
        } else if (cmd_eval->parsed()) {
            const Mesh mesh = load_obj(eval_template);
            const AnimationSequence pred = detail::load_prediction(eval_pred);
            const std::vector<Eigen::MatrixX3d> gt = detail::load_gt_frames(eval_gt);
            const RegionMasks masks = load_region_masks(eval_masks, mesh);
            const MetricReport report = evaluate_sequence(pred, gt, masks, mesh, eval_abs_fdd);
            write_metric_csv({{"pred", report}}, eval_out);
            std::cout << "E_vl " << report.e_vl << "  E_ve " << report.e_ve << "  FDD "
                      << report.fdd << "\n";
        } else if (cmd_grad->parsed()) {
            bool all_ok = true;
            bool any_run = false;
            for (const RegisteredCheck& check : standard_grad_checks()) {
                if (!grad_module.empty() && check.name.find(grad_module) == std::string::npos)
                    continue;
                any_run = true;
                const GradCheckReport report = check.run();
                const bool ok = report.max_rel_error < 1e-4;
                all_ok = all_ok && ok;
                std::cout << (ok ? "[pass] " : "[FAIL] ") << check.name << "  max_rel_error "
                          << report.max_rel_error;
                if (!report.worst_param.empty())
                    std::cout << "  (worst: " << report.worst_param << "[" << report.worst_row
                              << "," << report.worst_col << "])";
                std::cout << "\n";
            }
            if (!any_run) throw DomainError("no gradient check matches '" + grad_module + "'");
            if (!all_ok) return 1;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args);
}

}  // namespace mmtalker::cli
