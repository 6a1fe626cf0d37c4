#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mmtalker/autodiff.hpp"
#include "mmtalker/errors.hpp"
#include "mmtalker/feature_container.hpp"
#include "mmtalker/rng.hpp"

namespace mmtalker {

struct AudioFeatureSequence {
    Eigen::MatrixXd frames;  // T_a x D latent features
    double source_rate = 30.0;

    int length() const { return static_cast<int>(frames.rows()); }
    int dim() const { return static_cast<int>(frames.cols()); }
};

inline void save_features(const AudioFeatureSequence& seq, const std::string& path) {
    FeatureContainer fc;
    fc.set_matrix("frames", seq.frames);
    fc.set_scalar("source_rate", seq.source_rate);
    fc.save(path);
}

inline AudioFeatureSequence load_features(const std::string& path) {
    const FeatureContainer fc = FeatureContainer::load(path);
    if (!fc.has("frames") || !fc.has("source_rate"))
        throw FormatError("'" + path + "' lacks the frames/source_rate arrays");
    AudioFeatureSequence seq;
    seq.frames = fc.matrix("frames");
    seq.source_rate = fc.scalar("source_rate");
    if (seq.length() < 1 || seq.dim() < 1) throw FormatError("empty feature sequence");
    if (!seq.frames.allFinite()) throw NonFiniteValue("feature payload contains NaN/Inf");
    return seq;
}

// Deterministic band-limited stand-in for a pretrained speech encoder's
// latents: per-dimension sinusoids plus 10% uniform noise, all drawn from
// the seed. Every entry lies in [-1.1, 1.1].
inline AudioFeatureSequence synth_features(std::int64_t seed, int T_a, int D,
                                           double source_rate = 30.0) {
    if (T_a < 1 || D < 1) throw SizeTooSmall("synth_features needs T_a, D >= 1");
    Rng rng(static_cast<std::uint64_t>(seed));
    Eigen::VectorXd freq(D), phase(D);
    for (int d = 0; d < D; ++d) freq[d] = rng.uniform(1.0, 8.0);
    for (int d = 0; d < D; ++d) phase[d] = rng.uniform(0.0, 2.0 * M_PI);

    AudioFeatureSequence seq;
    seq.source_rate = source_rate;
    seq.frames.resize(T_a, D);
    for (int t = 0; t < T_a; ++t)
        for (int d = 0; d < D; ++d) {
            const double noise = rng.uniform(-1.0, 1.0);
            seq.frames(t, d) =
                std::sin(2.0 * M_PI * freq[d] * t / static_cast<double>(T_a) + phase[d]) +
                0.1 * noise;
        }
    return seq;
}

// Linear time resampling with endpoints aligned: output frame 0 maps to
// source frame 0 and output frame target_T-1 to source frame T_a-1.
inline Eigen::MatrixXd resample_time(const AudioFeatureSequence& seq, int target_T) {
    if (target_T < 1) throw SizeTooSmall("target_T must be >= 1");
    const int T_a = seq.length();
    if (target_T == T_a) return seq.frames;
    Eigen::MatrixXd out(target_T, seq.dim());
    if (target_T == 1) {
        out.row(0) = seq.frames.row(0);
        return out;
    }
    for (int j = 0; j < target_T; ++j) {
        const double pos = static_cast<double>(j) * (T_a - 1) / static_cast<double>(target_T - 1);
        const int lo = std::min(static_cast<int>(pos), T_a - 2 >= 0 ? T_a - 2 : 0);
        const double frac = pos - lo;
        if (T_a == 1)
            out.row(j) = seq.frames.row(0);
        else
            out.row(j) = (1.0 - frac) * seq.frames.row(lo) + frac * seq.frames.row(lo + 1);
    }
    return out;
}

struct SteParams {
    double w = M_PI;  // learnable temporal phase scale
    int L = 16;       // encoding width, even
    int T = 1;        // sequence length the phase is normalized by
};

// Chebyshev-style spatio-temporal encoding of a chart point. Odd entries
// (1-based i) read the u coordinate, even entries v, so the output is
// exactly L wide: entry_i = cos(i * arccos(x') + w * t / T) with x' = 2x-1.
inline Eigen::MatrixXd ste_encode(const Eigen::MatrixX2d& uv_points, const SteParams& params,
                                  int t, bool time_on = true) {
    if (params.L < 2 || params.L % 2 != 0) throw ShapeMismatch("L must be even and >= 2");
    if (t < 0 || t >= params.T) throw DomainError("frame index out of range");
    const double phase = time_on ? params.w * static_cast<double>(t) / params.T : 0.0;

    Eigen::MatrixXd out(uv_points.rows(), params.L);
    for (Eigen::Index p = 0; p < uv_points.rows(); ++p) {
        const double u = uv_points(p, 0), v = uv_points(p, 1);
        if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0)
            throw DomainError("uv point outside [0,1]^2");
        const double au = std::acos(2.0 * u - 1.0);
        const double av = std::acos(2.0 * v - 1.0);
        for (int i = 1; i <= params.L; ++i)
            out(p, i - 1) = std::cos(i * (i % 2 == 1 ? au : av) + phase);
    }
    return out;
}

// Tape op producing the full f_st block for all frames: (T*P) x L with row
// t*P + p. Differentiable in the scalar phase parameter w.
inline ad::Var ste_encode_all(ad::Tape& tape, const Eigen::MatrixX2d& uv_points, const ad::Var& w,
                              int T, int L, bool time_on = true) {
    if (L < 2 || L % 2 != 0) throw ShapeMismatch("L must be even and >= 2");
    const Eigen::Index P = uv_points.rows();

    Eigen::MatrixXd base(P, L);  // i * arccos(component), time-independent
    for (Eigen::Index p = 0; p < P; ++p) {
        const double u = uv_points(p, 0), v = uv_points(p, 1);
        if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0)
            throw DomainError("uv point outside [0,1]^2");
        const double au = std::acos(2.0 * u - 1.0);
        const double av = std::acos(2.0 * v - 1.0);
        for (int i = 1; i <= L; ++i) base(p, i - 1) = i * (i % 2 == 1 ? au : av);
    }

    const double wv = w.value()(0, 0);
    Eigen::MatrixXd out(T * P, L);
    for (int t = 0; t < T; ++t) {
        const double phase = time_on ? wv * static_cast<double>(t) / T : 0.0;
        out.middleRows(static_cast<Eigen::Index>(t) * P, P) = (base.array() + phase).cos();
    }

    const bool rg = time_on && w.tape()->requires_grad(w);
    return tape.make(std::move(out), rg,
                     [w, base, T, P, time_on](ad::Tape& tp, const ad::Mat& g) {
                         if (!time_on) return;
                         const double wv = w.value()(0, 0);
                         double dw = 0.0;
                         for (int t = 0; t < T; ++t) {
                             const double ts = static_cast<double>(t) / T;
                             const Eigen::ArrayXXd s = -(base.array() + wv * ts).sin() * ts;
                             dw += (g.middleRows(static_cast<Eigen::Index>(t) * P, P).array() * s)
                                       .sum();
                         }
                         ad::Mat d(1, 1);
                         d(0, 0) = dw;
                         tp.accumulate(w, d);
                     },
                     "ste_encode");
}

// One-layer LSTM over time; zero initial state; causal by construction.
// Gate order in the stacked weights: input, forget, cell, output.
struct GlobalEncoderVars {
    ad::Var Wx;  // D x 4H
    ad::Var Wh;  // H x 4H
    ad::Var b;   // 1 x 4H
};

inline ad::Var encode_global(const ad::Var& latent, const GlobalEncoderVars& p) {
    const Eigen::Index T = latent.value().rows();
    const Eigen::Index H4 = p.Wx.value().cols();
    if (H4 % 4 != 0 || p.Wh.value().cols() != H4 || p.b.value().cols() != H4 ||
        p.Wx.value().rows() != latent.value().cols() || p.Wh.value().rows() != H4 / 4)
        throw ShapeMismatch("encode_global: inconsistent LSTM weight shapes");
    const Eigen::Index H = H4 / 4;

    ad::Tape& tape = *latent.tape();
    ad::Var h = tape.constant(ad::Mat::Zero(1, H), "lstm_h0");
    ad::Var c = tape.constant(ad::Mat::Zero(1, H), "lstm_c0");
    std::vector<ad::Var> hs;
    hs.reserve(static_cast<std::size_t>(T));
    for (Eigen::Index t = 0; t < T; ++t) {
        ad::Var x = ad::slice_rows(latent, t, 1);
        ad::Var gates = ad::add(ad::add(ad::matmul(x, p.Wx), ad::matmul(h, p.Wh)), p.b);
        ad::Var gi = ad::sigmoid(ad::slice_cols(gates, 0, H));
        ad::Var gf = ad::sigmoid(ad::slice_cols(gates, H, H));
        ad::Var gc = ad::tanh_op(ad::slice_cols(gates, 2 * H, H));
        ad::Var go = ad::sigmoid(ad::slice_cols(gates, 3 * H, H));
        c = ad::add(ad::cmul(gf, c), ad::cmul(gi, gc));
        h = ad::cmul(go, ad::tanh_op(c));
        hs.push_back(h);
    }
    return ad::vstack(hs);  // T x H
}

// Temporal 1-D convolution (zero padded, stride 1) followed by a two-layer
// perceptron. Returns the per-frame T x H matrix; vertex broadcast happens
// at fusion time.
struct LocalEncoderVars {
    ad::Var K;   // (k*D) x H stacked kernel taps
    ad::Var b;   // 1 x H
    ad::Var W1;  // H x H
    ad::Var b1;  // 1 x H
    ad::Var W2;  // H x H
    ad::Var b2;  // 1 x H
    int kernel = 3;
};

inline ad::Var encode_local_frames(ad::Tape& tape, const Eigen::MatrixXd& latent,
                                   const LocalEncoderVars& p) {
    const int T = static_cast<int>(latent.rows());
    const int D = static_cast<int>(latent.cols());
    const int k = p.kernel;
    if (p.K.value().rows() != static_cast<Eigen::Index>(k) * D)
        throw ShapeMismatch("encode_local: kernel rows != k * D");
    const int pad = k / 2;

    // stack the k zero-padded shifts of the (constant) input so the whole
    // convolution is one matmul against the kernel
    Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(T, static_cast<Eigen::Index>(k) * D);
    for (int j = 0; j < k; ++j)
        for (int t = 0; t < T; ++t) {
            const int src = t + j - pad;
            if (src >= 0 && src < T) shifted.block(t, static_cast<Eigen::Index>(j) * D, 1, D) = latent.row(src);
        }

    ad::Var x = tape.constant(std::move(shifted), "conv_input");
    ad::Var conv = ad::add_rowvec(ad::matmul(x, p.K), p.b);
    ad::Var hidden = ad::relu(ad::add_rowvec(ad::matmul(conv, p.W1), p.b1));
    return ad::add_rowvec(ad::matmul(hidden, p.W2), p.b2);  // T x H
}

// Spec-shaped wrapper: broadcast the per-frame vectors across N vertex
// slots, yielding the frame-flattened (T*N) x H local feature block.
inline ad::Var encode_local(ad::Tape& tape, const Eigen::MatrixXd& latent,
                            const LocalEncoderVars& p, int N) {
    if (N < 1) throw ShapeMismatch("encode_local: N must be >= 1");
    return ad::repeat_each_row(encode_local_frames(tape, latent, p), N);
}

}  // namespace mmtalker
