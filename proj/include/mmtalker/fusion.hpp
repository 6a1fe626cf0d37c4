#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mmtalker/autodiff.hpp"
#include "mmtalker/errors.hpp"
#include "mmtalker/mesh.hpp"

namespace mmtalker {

// Scaled dot-product attention: softmax(Q K^T / sqrt(d_k)) V.
inline ad::Var attention(const ad::Var& Q, const ad::Var& K, const ad::Var& V) {
    if (Q.value().cols() != K.value().cols())
        throw ShapeMismatch("attention: query/key dims differ");
    if (K.value().rows() != V.value().rows())
        throw ShapeMismatch("attention: key/value row counts differ");
    const double dk = static_cast<double>(Q.value().cols());
    ad::Var logits = ad::scale(ad::matmul_nt(Q, K), 1.0 / std::sqrt(dk));
    return ad::matmul(ad::softmax_rows(logits), V);
}

struct RgcnVars {
    ad::Var W0;      // (L+H) x H1
    ad::Var W1;      // H1 x H1
    ad::Var skip0;   // (L+H) x H1 projection for the first residual
    ad::Var skip1;   // H1 x H1, optional; identity when absent
    bool has_skip0 = false;
    bool has_skip1 = false;
};

// Two-layer residual graph convolution over the frame-flattened feature
// block: per layer O' = ReLU(A O W) + skip(O). A skip is the identity when
// absent and the widths match; an explicit matrix otherwise (zeroing the
// skips recovers the plain two-layer stack).
inline ad::Var rgcn_forward(const ad::SpMat& A, const ad::Var& f_st, const ad::Var& f_al,
                            const RgcnVars& p, int T) {
    if (f_st.value().rows() != f_al.value().rows())
        throw ShapeMismatch("rgcn_forward: f_st/f_al row counts differ");
    ad::Var O0 = ad::concat_cols(f_st, f_al);
    const Eigen::Index width0 = O0.value().cols();
    if (p.W0.value().rows() != width0) throw ShapeMismatch("rgcn_forward: W0 rows != L+H");
    const Eigen::Index H1 = p.W0.value().cols();
    if (p.W1.value().rows() != H1 || p.W1.value().cols() != H1)
        throw ShapeMismatch("rgcn_forward: W1 must be H1 x H1");

    ad::Var propagated0 = ad::relu(ad::matmul(ad::block_sparse_premul(A, O0, T), p.W0));
    ad::Var O1;
    if (p.has_skip0) {
        O1 = ad::add(propagated0, ad::matmul(O0, p.skip0));
    } else {
        if (width0 != H1) throw ShapeMismatch("rgcn_forward: skip projection required");
        O1 = ad::add(propagated0, O0);
    }
    ad::Var propagated1 = ad::relu(ad::matmul(ad::block_sparse_premul(A, O1, T), p.W1));
    return p.has_skip1 ? ad::add(propagated1, ad::matmul(O1, p.skip1))
                       : ad::add(propagated1, O1);  // O2 = f_pl
}

// MLP stand-in used by the ablation that removes the graph convolution:
// a per-vertex two-layer perceptron on O0, reusing the RGCN weight shapes.
inline ad::Var fuse_mlp_forward(const ad::Var& f_st, const ad::Var& f_al, const RgcnVars& p) {
    ad::Var O0 = ad::concat_cols(f_st, f_al);
    return ad::matmul(ad::relu(ad::matmul(O0, p.W0)), p.W1);
}

struct DcamVars {
    ad::Var Wq;  // H1 x d_k
    ad::Var Wk;  // H x d_k
    ad::Var Wv;  // H x H1
};

namespace detail {

// Fixed identity-padded H x H1 projection aligning the global feature width
// to the vertex feature width; not learned.
inline Eigen::MatrixXd align_projection(Eigen::Index H, Eigen::Index H1) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(H, H1);
    for (Eigen::Index i = 0; i < std::min(H, H1); ++i) P(i, i) = 1.0;
    return P;
}

}  // namespace detail

// Dual cross-attention: one query per (frame, vertex) row of f_pl, one
// key/value per frame of f_ag; output concat(f_pl + Att, f_ag' + Att) with
// the global feature broadcast across vertices and width-aligned.
inline ad::Var dcam_forward(const ad::Var& f_pl, const ad::Var& f_ag, const DcamVars& p, int T,
                            int N) {
    if (f_pl.value().rows() != static_cast<Eigen::Index>(T) * N)
        throw ShapeMismatch("dcam_forward: f_pl rows != T * N");
    if (f_ag.value().rows() != T) throw ShapeMismatch("dcam_forward: f_ag rows != T");
    const Eigen::Index H1 = f_pl.value().cols();
    const Eigen::Index H = f_ag.value().cols();
    if (p.Wq.value().rows() != H1 || p.Wk.value().rows() != H || p.Wv.value().rows() != H ||
        p.Wv.value().cols() != H1 || p.Wq.value().cols() != p.Wk.value().cols())
        throw ShapeMismatch("dcam_forward: projection shapes inconsistent");

    ad::Tape& tape = *f_pl.tape();
    ad::Var Q = ad::matmul(f_pl, p.Wq);
    ad::Var K = ad::matmul(f_ag, p.Wk);
    ad::Var V = ad::matmul(f_ag, p.Wv);
    ad::Var att = attention(Q, K, V);  // (T*N) x H1

    ad::Var align = tape.constant(detail::align_projection(H, H1), "dcam_align");
    ad::Var ag_aligned = ad::repeat_each_row(ad::matmul(f_ag, align), N);
    return ad::concat_cols(ad::add(f_pl, att), ad::add(ag_aligned, att));  // (T*N) x 2H1
}

struct DcamMlpVars {
    ad::Var W1;  // (H1+H) x 2H1
    ad::Var b1;  // 1 x 2H1
    ad::Var W2;  // 2H1 x 2H1
    ad::Var b2;  // 1 x 2H1
};

// Ablation stand-in for DCAM: concat(f_pl, broadcast f_ag) through a
// two-layer perceptron to width 2H1.
inline ad::Var dcam_mlp_forward(const ad::Var& f_pl, const ad::Var& f_ag, const DcamMlpVars& p,
                                int N) {
    ad::Var ag = ad::repeat_each_row(f_ag, N);
    ad::Var x = ad::concat_cols(f_pl, ag);
    ad::Var hidden = ad::relu(ad::add_rowvec(ad::matmul(x, p.W1), p.b1));
    return ad::add_rowvec(ad::matmul(hidden, p.W2), p.b2);
}

struct FusionAblation {
    bool use_rgcn = true;
    bool use_dcam = true;
};

struct FusedFeature {
    ad::Var f_pl;  // (T*N) x H1
    ad::Var f_lg;  // (T*N) x 2H1
};

inline FusedFeature fuse(const ad::SpMat& A, const ad::Var& f_st, const ad::Var& f_al,
                         const ad::Var& f_ag, const RgcnVars& rgcn, const DcamVars& dcam,
                         const DcamMlpVars& dcam_mlp, int T, int N,
                         const FusionAblation& ablation = {}) {
    FusedFeature out;
    out.f_pl = ablation.use_rgcn ? rgcn_forward(A, f_st, f_al, rgcn, T)
                                 : fuse_mlp_forward(f_st, f_al, rgcn);
    out.f_lg = ablation.use_dcam ? dcam_forward(out.f_pl, f_ag, dcam, T, N)
                                 : dcam_mlp_forward(out.f_pl, f_ag, dcam_mlp, N);
    return out;
}

}  // namespace mmtalker
