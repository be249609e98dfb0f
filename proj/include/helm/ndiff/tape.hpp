#pragma once

// Eager reverse-mode differentiation over dense row-major-semantics matrices.
//
// Every value on a tape is a 2-D matrix; vectors are 1 x n rows, scalars are
// 1 x 1. Operations are free functions that evaluate immediately and append
// a node with its local backward rule. Nodes are appended in evaluation
// order, so the tape is topologically sorted by construction.

#include <Eigen/Dense>

#include <cstddef>
#include <algorithm>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "helm/ndiff/params.hpp"

namespace helm::nd {

class Tape;

/// Handle to a node on a tape.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const;

    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    /// Receives the node output, the gradient flowing into it, and one
    /// gradient accumulator per input (already sized and zero-initialized).
    using BackwardFn = std::function<void(const Matrix& out, const Matrix& grad, std::span<Matrix* const> input_grads)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    /// Leaf bound to a parameter; backward() adds its gradient into p.grad.
    Var param(Parameter& p);

    Var record(Matrix value, std::vector<Var> inputs, BackwardFn backward);

    const Matrix& value(Var v) const;
    /// Gradient of the last backward() output with respect to v.
    const Matrix& grad(Var v) const;

    /// Scalar output; seeds with 1.
    void backward(Var out);
    void backward(Var out, const Matrix& out_grad);

    bool has_gradients() const { return backward_done_; }
    std::size_t size() const { return nodes_.size(); }
    void clear();

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool grad_ready = false;
    };

    const Node& node(Var v) const;

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

std::string shape_str(const Matrix& m);

// Linear algebra and elementwise arithmetic. add/sub/mul accept a 1 x c
// right operand broadcast over the rows of an r x c left operand, or a 1 x 1
// right operand broadcast everywhere.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var transpose(Var a);

Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var minimum(Var a, Var b);
Var clamp(Var a, double lo, double hi);

/// While alive, records how close any relu or clamp input on this thread
/// comes to a non-differentiable point. Finite-difference checks use it to
/// reject sample points that straddle a kink.
class KinkProbe {
public:
    KinkProbe();
    ~KinkProbe();
    KinkProbe(const KinkProbe&) = delete;
    KinkProbe& operator=(const KinkProbe&) = delete;

    double min_distance() const { return min_distance_; }
    void note(double d) { min_distance_ = std::min(min_distance_, d); }
    KinkProbe* outer() const { return outer_; }

private:
    KinkProbe* outer_;
    double min_distance_ = std::numeric_limits<double>::infinity();
};

// Row-wise normalizations.
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// Row i of an r x c input is normalized over columns j <= i + (c - r);
/// remaining entries are exactly zero.
Var causal_softmax(Var a);
/// (x - mean) / sqrt(var + eps) per row, without affine terms.
Var layer_norm_rows(Var a, double eps = 1e-5);

// Indexing and shape.
Var gather_rows(Var table, std::span<const int> index);
/// out(r, 0) = a(r, index[r]).
Var pick(Var a, std::span<const int> index);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
/// T x T matrix with out(i, j) = bias(0, i - j) for j <= i and 0 above the
/// diagonal. bias is 1 x L with L >= T.
Var relative_bias(Var bias, Eigen::Index length);

// Reductions.
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);

/// Mean next-token cross-entropy of logits (r x k) against targets.
Var cross_entropy(Var logits, std::span<const int> targets);

}  // namespace helm::nd
