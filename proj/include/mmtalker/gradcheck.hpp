#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmtalker/training.hpp"

namespace mmtalker {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    int worst_row = -1;
    int worst_col = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central finite differences per coordinate against supplied analytic
// gradients. `forward` must recompute the scalar from the store's current
// values; the store is restored before returning.
inline GradCheckReport grad_check(const std::function<double()>& forward, ParamStore& store,
                                  const std::vector<std::string>& params,
                                  const std::map<std::string, Eigen::MatrixXd>& analytic,
                                  double eps = 1e-5) {
    if (eps <= 0.0) throw EpsNonPositive("eps = " + std::to_string(eps));
    GradCheckReport report;
    for (const std::string& name : params) {
        Eigen::MatrixXd& p = store.at(name);
        const Eigen::MatrixXd& a = analytic.at(name);
        if (a.rows() != p.rows() || a.cols() != p.cols())
            throw ShapeMismatch("analytic gradient shape mismatch for '" + name + "'");
        for (Eigen::Index r = 0; r < p.rows(); ++r)
            for (Eigen::Index c = 0; c < p.cols(); ++c) {
                const double orig = p(r, c);
                p(r, c) = orig + eps;
                const double fp = forward();
                p(r, c) = orig - eps;
                const double fm = forward();
                p(r, c) = orig;
                const double numeric = (fp - fm) / (2.0 * eps);
                const double an = a(r, c);
                const double rel =
                    std::abs(an - numeric) / std::max({std::abs(an), std::abs(numeric), 1e-12});
                if (rel > report.max_rel_error) {
                    report.max_rel_error = rel;
                    report.worst_param = name;
                    report.worst_row = static_cast<int>(r);
                    report.worst_col = static_cast<int>(c);
                    report.analytic = an;
                    report.numeric = numeric;
                }
            }
    }
    return report;
}

struct RegisteredCheck {
    std::string name;
    std::function<GradCheckReport()> run;
};

namespace detail {

// Projects a matrix output to a scalar with a fixed random weighting so
// every output coordinate contributes to the checked gradient.
inline Eigen::MatrixXd random_projection(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    Eigen::MatrixXd p(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) p(r, c) = rng.uniform(-1.0, 1.0);
    return p;
}

struct ToyPipeline {
    ModelConfig cfg;
    SyntheticData data;
    AdjacencyOperator adjacency;
    Eigen::MatrixXd latent;
    Eigen::MatrixXd gt_sampled;
    std::vector<int> eye_samples;
    int T = 0;
};

inline ToyPipeline make_toy_pipeline() {
    ToyPipeline toy;
    toy.cfg.D = 5;
    toy.cfg.H = 4;
    toy.cfg.H1 = 4;
    toy.cfg.L = 4;
    toy.cfg.d_k = 3;
    toy.cfg.h = 8;
    toy.data = make_synthetic_dataset(7, 12, 4, toy.cfg.D, 20, 0.08);
    toy.adjacency = build_adjacency(toy.data.item.template_mesh);
    toy.T = static_cast<int>(toy.data.item.gt_frames.size());
    toy.latent = resample_time(toy.data.item.audio, toy.T);
    toy.gt_sampled =
        resample_ground_truth(toy.data.item.gt_frames, toy.data.samples, toy.data.atlas.faces);
    toy.eye_samples = region_sample_indices(toy.data.samples, toy.data.atlas.faces,
                                            toy.data.item.masks.eye_vertices);
    return toy;
}

// Runs one scalar-valued builder twice: once on a tape for the analytic
// gradients, then through the finite-difference harness.
inline GradCheckReport check_scalar(ParamStore& store, const std::vector<std::string>& params,
                                    const std::function<double(bool)>& eval_and_maybe_grad,
                                    std::map<std::string, Eigen::MatrixXd>& analytic_out,
                                    double eps = 1e-5) {
    eval_and_maybe_grad(true);  // fills analytic_out
    return grad_check([&]() { return eval_and_maybe_grad(false); }, store, params, analytic_out,
                      eps);
}

}  // namespace detail

// The registered gradient checks behind both the acceptance gate and the
// `gradcheck` CLI subcommand. All run on toy shapes.
inline std::vector<RegisteredCheck> standard_grad_checks() {
    std::vector<RegisteredCheck> checks;

    auto add_check = [&checks](const std::string& name, std::function<GradCheckReport()> fn) {
        checks.push_back(RegisteredCheck{name, std::move(fn)});
    };

    add_check("encode_global", [] {
        Rng rng(11);
        const int T = 4, D = 5, H = 4;
        ParamStore store;
        store.create("Wx", glorot_init(D, 4 * H, rng));
        store.create("Wh", glorot_init(H, 4 * H, rng));
        store.create("b", 0.1 * glorot_init(1, 4 * H, rng));
        Eigen::MatrixXd latent = detail::random_projection(T, D, rng);
        Eigen::MatrixXd proj = detail::random_projection(T, H, rng);
        std::map<std::string, Eigen::MatrixXd> analytic;
        auto eval = [&](bool want_grad) {
            ad::Tape tape;
            GlobalEncoderVars p{tape.param(store.at("Wx")), tape.param(store.at("Wh")),
                                tape.param(store.at("b"))};
            ad::Var out = encode_global(tape.constant(latent), p);
            ad::Var s = ad::sum_all(ad::cmul(out, tape.constant(proj)));
            if (want_grad) {
                tape.backward(s);
                analytic["Wx"] = p.Wx.grad();
                analytic["Wh"] = p.Wh.grad();
                analytic["b"] = p.b.grad();
            }
            return s.value()(0, 0);
        };
        return detail::check_scalar(store, {"Wx", "Wh", "b"}, eval, analytic);
    });

    add_check("encode_local", [] {
        Rng rng(12);
        const int T = 4, D = 5, H = 4, N = 3, k = 3;
        ParamStore store;
        store.create("K", glorot_init(k * D, H, rng));
        store.create("b", 0.1 * glorot_init(1, H, rng));
        store.create("W1", glorot_init(H, H, rng));
        store.create("b1", 0.1 * glorot_init(1, H, rng));
        store.create("W2", glorot_init(H, H, rng));
        store.create("b2", 0.1 * glorot_init(1, H, rng));
        Eigen::MatrixXd latent = detail::random_projection(T, D, rng);
        Eigen::MatrixXd proj = detail::random_projection(T * N, H, rng);
        std::map<std::string, Eigen::MatrixXd> analytic;
        const std::vector<std::string> names = {"K", "b", "W1", "b1", "W2", "b2"};
        auto eval = [&](bool want_grad) {
            ad::Tape tape;
            LocalEncoderVars p{tape.param(store.at("K")),  tape.param(store.at("b")),
                               tape.param(store.at("W1")), tape.param(store.at("b1")),
                               tape.param(store.at("W2")), tape.param(store.at("b2")), k};
            ad::Var out = encode_local(tape, latent, p, N);
            ad::Var s = ad::sum_all(ad::cmul(out, tape.constant(proj)));
            if (want_grad) {
                tape.backward(s);
                analytic["K"] = p.K.grad();
                analytic["b"] = p.b.grad();
                analytic["W1"] = p.W1.grad();
                analytic["b1"] = p.b1.grad();
                analytic["W2"] = p.W2.grad();
                analytic["b2"] = p.b2.grad();
            }
            return s.value()(0, 0);
        };
        return detail::check_scalar(store, names, eval, analytic);
    });

    add_check("ste_encode_w", [] {
        Rng rng(13);
        const int T = 4, L = 6, P = 5;
        ParamStore store;
        store.create("w", Eigen::MatrixXd::Constant(1, 1, M_PI));
        Eigen::MatrixX2d uv(P, 2);
        for (int p = 0; p < P; ++p) {
            uv(p, 0) = rng.uniform(0.05, 0.95);
            uv(p, 1) = rng.uniform(0.05, 0.95);
        }
        Eigen::MatrixXd proj = detail::random_projection(T * P, L, rng);
        std::map<std::string, Eigen::MatrixXd> analytic;
        auto eval = [&](bool want_grad) {
            ad::Tape tape;
            ad::Var w = tape.param(store.at("w"));
            ad::Var out = ste_encode_all(tape, uv, w, T, L, true);
            ad::Var s = ad::sum_all(ad::cmul(out, tape.constant(proj)));
            if (want_grad) {
                tape.backward(s);
                analytic["w"] = w.grad();
            }
            return s.value()(0, 0);
        };
        return detail::check_scalar(store, {"w"}, eval, analytic);
    });

    add_check("attention", [] {
        Rng rng(14);
        const int q = 6, m = 4, dk = 3, H1 = 4;
        ParamStore store;
        store.create("Q", detail::random_projection(q, dk, rng));
        store.create("K", detail::random_projection(m, dk, rng));
        store.create("V", detail::random_projection(m, H1, rng));
        Eigen::MatrixXd proj = detail::random_projection(q, H1, rng);
        std::map<std::string, Eigen::MatrixXd> analytic;
        auto eval = [&](bool want_grad) {
            ad::Tape tape;
            ad::Var Q = tape.param(store.at("Q"));
            ad::Var K = tape.param(store.at("K"));
            ad::Var V = tape.param(store.at("V"));
            ad::Var s = ad::sum_all(ad::cmul(attention(Q, K, V), tape.constant(proj)));
            if (want_grad) {
                tape.backward(s);
                analytic["Q"] = Q.grad();
                analytic["K"] = K.grad();
                analytic["V"] = V.grad();
            }
            return s.value()(0, 0);
        };
        return detail::check_scalar(store, {"Q", "K", "V"}, eval, analytic);
    });

    add_check("rgcn_forward", [] {
        Rng rng(15);
        const int T = 3, L = 4, H = 4, H1 = 5;
        Mesh mesh = make_cap_mesh(2, 4);
        const int N = mesh.vertex_count();
        AdjacencyOperator A = build_adjacency(mesh);
        ParamStore store;
        store.create("W0", glorot_init(L + H, H1, rng));
        store.create("W1", glorot_init(H1, H1, rng));
        store.create("skip0", glorot_init(L + H, H1, rng));
        Eigen::MatrixXd f_st = detail::random_projection(T * N, L, rng);
        Eigen::MatrixXd f_al = detail::random_projection(T * N, H, rng);
        Eigen::MatrixXd proj = detail::random_projection(T * N, H1, rng);
        std::map<std::string, Eigen::MatrixXd> analytic;
        auto eval = [&](bool want_grad) {
            ad::Tape tape;
            RgcnVars p;
            p.W0 = tape.param(store.at("W0"));
            p.W1 = tape.param(store.at("W1"));
            p.skip0 = tape.param(store.at("skip0"));
            p.has_skip0 = true;
            ad::Var out = rgcn_forward(A.matrix, tape.constant(f_st), tape.constant(f_al), p, T);
            ad::Var s = ad::sum_all(ad::cmul(out, tape.constant(proj)));
            if (want_grad) {
                tape.backward(s);
                analytic["W0"] = p.W0.grad();
                analytic["W1"] = p.W1.grad();
                analytic["skip0"] = p.skip0.grad();
            }
            return s.value()(0, 0);
        };
        return detail::check_scalar(store, {"W0", "W1", "skip0"}, eval, analytic);
    });

    add_check("dcam_forward", [] {
        Rng rng(16);
        const int T = 3, N = 4, H = 4, H1 = 5, dk = 3;
        ParamStore store;
        store.create("Wq", glorot_init(H1, dk, rng));
        store.create("Wk", glorot_init(H, dk, rng));
        store.create("Wv", glorot_init(H, H1, rng));
        Eigen::MatrixXd f_pl = detail::random_projection(T * N, H1, rng);
        Eigen::MatrixXd f_ag = detail::random_projection(T, H, rng);
        Eigen::MatrixXd proj = detail::random_projection(T * N, 2 * H1, rng);
        std::map<std::string, Eigen::MatrixXd> analytic;
        auto eval = [&](bool want_grad) {
            ad::Tape tape;
            DcamVars p{tape.param(store.at("Wq")), tape.param(store.at("Wk")),
                       tape.param(store.at("Wv"))};
            ad::Var out = dcam_forward(tape.constant(f_pl), tape.constant(f_ag), p, T, N);
            ad::Var s = ad::sum_all(ad::cmul(out, tape.constant(proj)));
            if (want_grad) {
                tape.backward(s);
                analytic["Wq"] = p.Wq.grad();
                analytic["Wk"] = p.Wk.grad();
                analytic["Wv"] = p.Wv.grad();
            }
            return s.value()(0, 0);
        };
        return detail::check_scalar(store, {"Wq", "Wk", "Wv"}, eval, analytic);
    });

    add_check("decode_displacements", [] {
        Rng rng(17);
        const int rows = 10, in = 6, h = 8;
        ParamStore store;
        const int widths[6] = {in, h, h, h, h, 3};
        std::vector<std::string> names;
        for (int l = 0; l < 5; ++l) {
            names.push_back("W" + std::to_string(l));
            names.push_back("b" + std::to_string(l));
            store.create("W" + std::to_string(l), glorot_init(widths[l], widths[l + 1], rng));
            store.create("b" + std::to_string(l), 0.1 * glorot_init(1, widths[l + 1], rng));
        }
        Eigen::MatrixXd x = detail::random_projection(rows, in, rng);
        Eigen::MatrixXd proj = detail::random_projection(rows, 3, rng);
        std::map<std::string, Eigen::MatrixXd> analytic;
        auto eval = [&](bool want_grad) {
            ad::Tape tape;
            DecoderVars p;
            for (int l = 0; l < 5; ++l) {
                p.W.push_back(tape.param(store.at("W" + std::to_string(l))));
                p.b.push_back(tape.param(store.at("b" + std::to_string(l))));
            }
            ad::Var out = decode_displacements(tape.constant(x), p);
            ad::Var s = ad::sum_all(ad::cmul(out, tape.constant(proj)));
            if (want_grad) {
                tape.backward(s);
                for (int l = 0; l < 5; ++l) {
                    analytic["W" + std::to_string(l)] = p.W[static_cast<std::size_t>(l)].grad();
                    analytic["b" + std::to_string(l)] = p.b[static_cast<std::size_t>(l)].grad();
                }
            }
            return s.value()(0, 0);
        };
        return detail::check_scalar(store, names, eval, analytic);
    });

    // the three losses, differentiated through their pred input
    auto add_loss_check = [&add_check](const std::string& name, int which) {
        add_check(name, [which] {
            Rng rng(18 + which);
            const int T = 4, M = 5;
            ParamStore store;
            store.create("pred", detail::random_projection(T * M, 3, rng));
            Eigen::MatrixXd gt = detail::random_projection(T * M, 3, rng);
            const std::vector<int> eye = {1, 3};
            std::map<std::string, Eigen::MatrixXd> analytic;
            auto eval = [&, which](bool want_grad) {
                ad::Tape tape;
                ad::Var pred = tape.param(store.at("pred"));
                ad::Var loss;
                if (which == 0) loss = loss_rec_op(pred, gt, T, M);
                if (which == 1) loss = loss_velocity_op(pred, gt, T, M);
                if (which == 2) loss = loss_eye_op(pred, gt, T, M, eye);
                if (want_grad) {
                    tape.backward(loss);
                    analytic["pred"] = pred.grad();
                }
                return loss.value()(0, 0);
            };
            return detail::check_scalar(store, {"pred"}, eval, analytic);
        });
    };
    add_loss_check("loss_rec", 0);
    add_loss_check("loss_velocity", 1);
    add_loss_check("loss_eye", 2);

    add_check("end_to_end", [] {
        detail::ToyPipeline toy = detail::make_toy_pipeline();
        ParamStore store = init_params(toy.cfg, 42);
        LossWeights weights;
        std::map<std::string, Eigen::MatrixXd> analytic;
        auto eval = [&](bool want_grad) {
            ad::Tape tape;
            const ModelBinding bind = bind_params(tape, store);
            const ForwardResult fr =
                model_forward(tape, bind, toy.cfg, toy.data.item.template_mesh, toy.data.atlas,
                              toy.adjacency, toy.data.samples, toy.latent);
            const LossVars losses =
                total_loss_op(fr.pred, toy.gt_sampled, toy.T, toy.data.samples.count(),
                              toy.eye_samples, weights);
            if (want_grad) {
                tape.backward(losses.total);
                analytic = bind.grads();
            }
            return losses.total.value()(0, 0);
        };
        return detail::check_scalar(store, store.names(), eval, analytic);
    });

    return checks;
}

}  // namespace mmtalker
