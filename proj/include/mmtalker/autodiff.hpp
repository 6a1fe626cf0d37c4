#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "mmtalker/errors.hpp"

namespace mmtalker::ad {

using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class Tape;

// Lightweight handle into a tape node. Values are matrices; higher-rank
// tensors are stored frame-flattened, e.g. a T x N x C tensor as a
// (T*N) x C matrix with row t*N + n.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int idx) : tape_(tape), idx_(idx) {}

    bool valid() const { return tape_ != nullptr; }
    int index() const { return idx_; }
    Tape* tape() const { return tape_; }

    const Mat& value() const;
    Mat grad() const;

private:
    Tape* tape_ = nullptr;
    int idx_ = -1;
};

// Reverse-mode tape. Nodes are created in evaluation order; backward walks
// them in reverse, so parents are always visited after their children. One
// tape per forward pass; parameters re-enter as leaves each time.
class Tape {
public:
    Var constant(Mat value, std::string name = "") {
        return push(std::move(value), false, nullptr, std::move(name));
    }

    Var param(Mat value, std::string name = "") {
        return push(std::move(value), true, nullptr, std::move(name));
    }

    // Low-level node constructor for ops with bespoke backward rules.
    Var make(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> back,
             std::string name = "") {
        return push(std::move(value), requires_grad, std::move(back), std::move(name));
    }

    const Mat& value(const Var& v) const { return nodes_[v.index()].value; }

    bool requires_grad(const Var& v) const { return nodes_[v.index()].requires_grad; }

    // Gradient after backward(); zero matrix if the node was never reached.
    Mat grad(const Var& v) const {
        const Node& n = nodes_[v.index()];
        if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
        return n.grad;
    }

    void accumulate(const Var& v, const Mat& delta) {
        Node& n = nodes_[v.index()];
        if (!n.requires_grad) return;
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        n.grad += delta;
    }

    void backward(const Var& root) {
        Node& r = nodes_[root.index()];
        if (r.value.rows() != 1 || r.value.cols() != 1)
            throw ShapeMismatch("backward root must be a 1x1 scalar");
        for (Node& n : nodes_) n.grad.resize(0, 0);
        r.grad = Mat::Ones(1, 1);
        for (int i = root.index(); i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.grad.size() == 0 || !n.back) continue;
            n.back(*this, n.grad);
        }
    }

    // First node holding a non-finite value, if any; for loss diagnostics.
    std::string first_nonfinite() const {
        for (const Node& n : nodes_)
            if (!n.value.allFinite()) return n.name.empty() ? "<unnamed node>" : n.name;
        return {};
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat value;
        Mat grad;
        bool requires_grad = false;
        std::function<void(Tape&, const Mat&)> back;
        std::string name;
    };

    Var push(Mat value, bool requires_grad, std::function<void(Tape&, const Mat&)> back,
             std::string name) {
        nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(back),
                              std::move(name)});
        return Var(this, static_cast<int>(nodes_.size()) - 1);
    }

    // deque: node references stay valid while later ops are appended
    std::deque<Node> nodes_;
};

inline const Mat& Var::value() const { return tape_->value(*this); }
inline Mat Var::grad() const { return tape_->grad(*this); }

namespace detail {

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.value().rows() != b.value().rows() || a.value().cols() != b.value().cols())
        throw ShapeMismatch(std::string(op) + ": operand shapes differ");
}

inline bool any_grad(std::initializer_list<Var> vars) {
    for (const Var& v : vars)
        if (v.tape()->requires_grad(v)) return true;
    return false;
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) {
    detail::check_same_shape(a, b, "add");
    Tape& t = *a.tape();
    return t.make(a.value() + b.value(), detail::any_grad({a, b}),
                  [a, b](Tape& t, const Mat& g) {
                      t.accumulate(a, g);
                      t.accumulate(b, g);
                  },
                  "add");
}

inline Var sub(const Var& a, const Var& b) {
    detail::check_same_shape(a, b, "sub");
    Tape& t = *a.tape();
    return t.make(a.value() - b.value(), detail::any_grad({a, b}),
                  [a, b](Tape& t, const Mat& g) {
                      t.accumulate(a, g);
                      t.accumulate(b, -g);
                  },
                  "sub");
}

inline Var scale(const Var& a, double s) {
    Tape& t = *a.tape();
    return t.make(s * a.value(), t.requires_grad(a),
                  [a, s](Tape& t, const Mat& g) { t.accumulate(a, s * g); }, "scale");
}

inline Var matmul(const Var& a, const Var& b) {
    if (a.value().cols() != b.value().rows()) throw ShapeMismatch("matmul: inner dims differ");
    Tape& t = *a.tape();
    return t.make(a.value() * b.value(), detail::any_grad({a, b}),
                  [a, b](Tape& t, const Mat& g) {
                      if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
                      if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
                  },
                  "matmul");
}

// a * b^T
inline Var matmul_nt(const Var& a, const Var& b) {
    if (a.value().cols() != b.value().cols()) throw ShapeMismatch("matmul_nt: inner dims differ");
    Tape& t = *a.tape();
    return t.make(a.value() * b.value().transpose(), detail::any_grad({a, b}),
                  [a, b](Tape& t, const Mat& g) {
                      if (t.requires_grad(a)) t.accumulate(a, g * b.value());
                      if (t.requires_grad(b)) t.accumulate(b, g.transpose() * a.value());
                  },
                  "matmul_nt");
}

inline Var cmul(const Var& a, const Var& b) {
    detail::check_same_shape(a, b, "cmul");
    Tape& t = *a.tape();
    return t.make(a.value().cwiseProduct(b.value()), detail::any_grad({a, b}),
                  [a, b](Tape& t, const Mat& g) {
                      if (t.requires_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
                      if (t.requires_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
                  },
                  "cmul");
}

inline Var relu(const Var& a) {
    Tape& t = *a.tape();
    return t.make(a.value().cwiseMax(0.0), t.requires_grad(a),
                  [a](Tape& t, const Mat& g) {
                      const Mat mask = (a.value().array() > 0.0).cast<double>();
                      t.accumulate(a, g.cwiseProduct(mask));
                  },
                  "relu");
}

inline Var sigmoid(const Var& a) {
    Tape& t = *a.tape();
    Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    return t.make(std::move(y), t.requires_grad(a),
                  [a](Tape& t, const Mat& g) {
                      const Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
                      t.accumulate(a, g.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
                  },
                  "sigmoid");
}

inline Var tanh_op(const Var& a) {
    Tape& t = *a.tape();
    Mat y = a.value().array().tanh().matrix();
    return t.make(std::move(y), t.requires_grad(a),
                  [a](Tape& t, const Mat& g) {
                      const Mat y = a.value().array().tanh().matrix();
                      t.accumulate(a, g.cwiseProduct((1.0 - y.array().square()).matrix()));
                  },
                  "tanh");
}

// Row-wise softmax with the usual max-shift for stability.
inline Var softmax_rows(const Var& a) {
    Tape& t = *a.tape();
    Mat y(a.value().rows(), a.value().cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double m = a.value().row(r).maxCoeff();
        Eigen::RowVectorXd e = (a.value().row(r).array() - m).exp();
        y.row(r) = e / e.sum();
    }
    return t.make(std::move(y), t.requires_grad(a),
                  [a](Tape& t, const Mat& g) {
                      Mat y(a.value().rows(), a.value().cols());
                      for (Eigen::Index r = 0; r < y.rows(); ++r) {
                          const double m = a.value().row(r).maxCoeff();
                          Eigen::RowVectorXd e = (a.value().row(r).array() - m).exp();
                          y.row(r) = e / e.sum();
                      }
                      Mat da(y.rows(), y.cols());
                      for (Eigen::Index r = 0; r < y.rows(); ++r) {
                          const double dot = g.row(r).dot(y.row(r));
                          da.row(r) = (g.row(r).array() - dot) * y.row(r).array();
                      }
                      t.accumulate(a, da);
                  },
                  "softmax_rows");
}

inline Var concat_cols(const Var& a, const Var& b) {
    if (a.value().rows() != b.value().rows()) throw ShapeMismatch("concat_cols: row counts differ");
    Tape& t = *a.tape();
    Mat y(a.value().rows(), a.value().cols() + b.value().cols());
    y << a.value(), b.value();
    const Eigen::Index ca = a.value().cols();
    return t.make(std::move(y), detail::any_grad({a, b}),
                  [a, b, ca](Tape& t, const Mat& g) {
                      t.accumulate(a, g.leftCols(ca));
                      t.accumulate(b, g.rightCols(g.cols() - ca));
                  },
                  "concat_cols");
}

inline Var slice_cols(const Var& a, Eigen::Index c0, Eigen::Index n) {
    Tape& t = *a.tape();
    return t.make(a.value().middleCols(c0, n), t.requires_grad(a),
                  [a, c0, n](Tape& t, const Mat& g) {
                      Mat da = Mat::Zero(a.value().rows(), a.value().cols());
                      da.middleCols(c0, n) = g;
                      t.accumulate(a, da);
                  },
                  "slice_cols");
}

inline Var slice_rows(const Var& a, Eigen::Index r0, Eigen::Index n) {
    Tape& t = *a.tape();
    return t.make(a.value().middleRows(r0, n), t.requires_grad(a),
                  [a, r0, n](Tape& t, const Mat& g) {
                      Mat da = Mat::Zero(a.value().rows(), a.value().cols());
                      da.middleRows(r0, n) = g;
                      t.accumulate(a, da);
                  },
                  "slice_rows");
}

inline Var vstack(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("vstack: no parts");
    Tape& t = *parts[0].tape();
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts[0].value().cols();
    for (const Var& p : parts) {
        if (p.value().cols() != cols) throw ShapeMismatch("vstack: column counts differ");
        rows += p.value().rows();
    }
    Mat y(rows, cols);
    Eigen::Index r = 0;
    bool rg = false;
    for (const Var& p : parts) {
        y.middleRows(r, p.value().rows()) = p.value();
        r += p.value().rows();
        rg = rg || t.requires_grad(p);
    }
    return t.make(std::move(y), rg,
                  [parts](Tape& t, const Mat& g) {
                      Eigen::Index r = 0;
                      for (const Var& p : parts) {
                          t.accumulate(p, g.middleRows(r, p.value().rows()));
                          r += p.value().rows();
                      }
                  },
                  "vstack");
}

// Row t of the input becomes rows [t*times, (t+1)*times) of the output.
// Broadcasts per-frame features across a vertex axis.
inline Var repeat_each_row(const Var& a, Eigen::Index times) {
    Tape& t = *a.tape();
    Mat y(a.value().rows() * times, a.value().cols());
    for (Eigen::Index r = 0; r < a.value().rows(); ++r)
        y.middleRows(r * times, times).rowwise() = a.value().row(r);
    return t.make(std::move(y), t.requires_grad(a),
                  [a, times](Tape& t, const Mat& g) {
                      Mat da(a.value().rows(), a.value().cols());
                      for (Eigen::Index r = 0; r < a.value().rows(); ++r)
                          da.row(r) = g.middleRows(r * times, times).colwise().sum();
                      t.accumulate(a, da);
                  },
                  "repeat_each_row");
}

// Applies a fixed sparse operator to every frame block of a frame-flattened
// tensor: input (frames*rows_in) x C, output (frames*rows_out) x C with
// out_block = S * in_block per frame.
inline Var block_sparse_premul(const SpMat& S, const Var& a, Eigen::Index frames) {
    const Eigen::Index rows_in = S.cols(), rows_out = S.rows();
    if (a.value().rows() != frames * rows_in)
        throw ShapeMismatch("block_sparse_premul: rows do not match frames * S.cols()");
    Tape& t = *a.tape();
    Mat y(frames * rows_out, a.value().cols());
    for (Eigen::Index f = 0; f < frames; ++f)
        y.middleRows(f * rows_out, rows_out) = S * a.value().middleRows(f * rows_in, rows_in);
    // capture S by value: cheap at desk scale and keeps lifetimes simple
    return t.make(std::move(y), t.requires_grad(a),
                  [S, a, frames, rows_in, rows_out](Tape& t, const Mat& g) {
                      const SpMat St = SpMat(S.transpose());
                      Mat da(frames * rows_in, a.value().cols());
                      for (Eigen::Index f = 0; f < frames; ++f)
                          da.middleRows(f * rows_in, rows_in) =
                              St * g.middleRows(f * rows_out, rows_out);
                      t.accumulate(a, da);
                  },
                  "block_sparse_premul");
}

// a + broadcast row vector b (1 x C).
inline Var add_rowvec(const Var& a, const Var& b) {
    if (b.value().rows() != 1 || b.value().cols() != a.value().cols())
        throw ShapeMismatch("add_rowvec: b must be 1 x cols(a)");
    Tape& t = *a.tape();
    return t.make(a.value().rowwise() + b.value().row(0), detail::any_grad({a, b}),
                  [a, b](Tape& t, const Mat& g) {
                      t.accumulate(a, g);
                      if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
                  },
                  "add_rowvec");
}

inline Var sum_all(const Var& a) {
    Tape& t = *a.tape();
    Mat y(1, 1);
    y(0, 0) = a.value().sum();
    return t.make(std::move(y), t.requires_grad(a),
                  [a](Tape& t, const Mat& g) {
                      t.accumulate(a, Mat::Constant(a.value().rows(), a.value().cols(), g(0, 0)));
                  },
                  "sum_all");
}

}  // namespace mmtalker::ad
