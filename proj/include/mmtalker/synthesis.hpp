#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "mmtalker/autodiff.hpp"
#include "mmtalker/errors.hpp"
#include "mmtalker/feature_container.hpp"
#include "mmtalker/mesh.hpp"
#include "mmtalker/sampler.hpp"
#include "mmtalker/uv_param.hpp"

namespace mmtalker {

struct AnimationSequence {
    std::vector<Eigen::MatrixX3d> frames;  // T frames of P x 3 positions
    std::vector<Face> topology;            // triangles over the P points
    double frame_rate = 30.0;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int point_count() const { return frames.empty() ? 0 : static_cast<int>(frames[0].rows()); }
};

// Sparse M x N barycentric gather: row m holds the sample's three weights at
// its face's vertex columns. Applying it per frame realizes Eq-style
// barycentric interpolation of any per-vertex quantity.
inline ad::SpMat interpolation_matrix(const SampleSet& samples, const std::vector<Face>& faces,
                                      int N) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(samples.locations.size() * 3);
    for (std::size_t m = 0; m < samples.locations.size(); ++m) {
        const BarycentricLocation& loc = samples.locations[m];
        const Face& f = faces[loc.face_index];
        for (int k = 0; k < 3; ++k)
            trips.emplace_back(static_cast<int>(m), f[k], loc.coords[k]);
    }
    ad::SpMat B(static_cast<int>(samples.locations.size()), N);
    B.setFromTriplets(trips.begin(), trips.end());
    return B;
}

// Template surface positions at the sample points: barycentric blend of the
// template's vertex coordinates. Pinned vertex samples reproduce their
// vertex positions bitwise (weights are exactly one-hot).
inline Eigen::MatrixX3d sample_template_positions(const SampleSet& samples, const Mesh& mesh,
                                                  const std::vector<Face>& atlas_faces) {
    Eigen::MatrixX3d out(samples.count(), 3);
    for (int m = 0; m < samples.count(); ++m) {
        const BarycentricLocation& loc = samples.locations[m];
        out.row(m) =
            barycentric_eval_rows(loc, atlas_faces, mesh.vertices).transpose();
    }
    return out;
}

// Per frame, per sample barycentric blend of the fused per-vertex features:
// (T*N) x C -> (T*M) x C.
inline ad::Var interpolate_features(const SampleSet& samples, const std::vector<Face>& faces,
                                    int N, const ad::Var& f_lg, int T) {
    if (f_lg.value().rows() != static_cast<Eigen::Index>(T) * N)
        throw ShapeMismatch("interpolate_features: f_lg rows != T * N");
    return ad::block_sparse_premul(interpolation_matrix(samples, faces, N), f_lg, T);
}

// Five-layer fully connected decoder: four ReLU hidden layers, linear
// 3-channel output, applied independently per (frame, sample) row.
struct DecoderVars {
    std::vector<ad::Var> W;  // widths 2H1 -> h -> h -> h -> h -> 3
    std::vector<ad::Var> b;
};

inline ad::Var decode_displacements(const ad::Var& features, const DecoderVars& p) {
    if (p.W.size() != 5 || p.b.size() != 5)
        throw ShapeMismatch("decoder must have exactly 5 layers");
    ad::Var x = features;
    for (int l = 0; l < 5; ++l) {
        if (p.W[l].value().rows() != x.value().cols())
            throw ShapeMismatch("decoder layer " + std::to_string(l) + " width mismatch");
        x = ad::add_rowvec(ad::matmul(x, p.W[l]), p.b[l]);
        if (l + 1 < 5) x = ad::relu(x);
    }
    if (x.value().cols() != 3) throw ShapeMismatch("decoder output must be 3-wide");
    return x;
}

inline void save_animation_container(const AnimationSequence& anim, const std::string& path) {
    FeatureContainer fc;
    const std::size_t T = anim.frames.size();
    const std::size_t P = static_cast<std::size_t>(anim.point_count());
    std::vector<double> flat(T * P * 3);
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t p = 0; p < P; ++p)
            for (int c = 0; c < 3; ++c)
                flat[(t * P + p) * 3 + c] = anim.frames[t](static_cast<Eigen::Index>(p), c);
    fc.set("frames", {T, P, 3}, std::move(flat));
    std::vector<double> topo;
    for (const Face& f : anim.topology)
        for (int k = 0; k < 3; ++k) topo.push_back(static_cast<double>(f[k]));
    fc.set("topology", {anim.topology.size(), 3}, std::move(topo));
    fc.set_scalar("frame_rate", anim.frame_rate);
    fc.save(path);
}

inline AnimationSequence load_animation_container(const std::string& path) {
    const FeatureContainer fc = FeatureContainer::load(path);
    const NamedArray& fr = fc.array("frames");
    if (fr.shape.size() != 3 || fr.shape[2] != 3)
        throw FormatError("frames array must be T x P x 3");
    AnimationSequence anim;
    const std::size_t T = fr.shape[0], P = fr.shape[1];
    anim.frames.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        anim.frames[t].resize(static_cast<Eigen::Index>(P), 3);
        for (std::size_t p = 0; p < P; ++p)
            for (int c = 0; c < 3; ++c)
                anim.frames[t](static_cast<Eigen::Index>(p), c) = fr.data[(t * P + p) * 3 + c];
    }
    const NamedArray& topo = fc.array("topology");
    for (std::size_t i = 0; i + 2 < topo.count(); i += 3)
        anim.topology.push_back(Face{static_cast<int>(topo.data[i]),
                                     static_cast<int>(topo.data[i + 1]),
                                     static_cast<int>(topo.data[i + 2])});
    anim.frame_rate = fc.scalar("frame_rate");
    return anim;
}

// One OBJ per frame (frame_%05d.obj) plus a JSON manifest.
inline void save_animation_objs(const AnimationSequence& anim, const std::string& dir) {
    std::filesystem::create_directories(dir);
    char name[64];
    for (int t = 0; t < anim.frame_count(); ++t) {
        std::snprintf(name, sizeof(name), "frame_%05d.obj", t);
        Mesh m;
        m.vertices = anim.frames[static_cast<std::size_t>(t)];
        m.faces = anim.topology;
        save_obj(m, dir + "/" + name);
    }
    nlohmann::json manifest;
    manifest["frame_count"] = anim.frame_count();
    manifest["frame_rate"] = anim.frame_rate;
    manifest["point_count"] = anim.point_count();
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw IoError("cannot write manifest in '" + dir + "'");
    out << manifest.dump(2) << '\n';
}

}  // namespace mmtalker
