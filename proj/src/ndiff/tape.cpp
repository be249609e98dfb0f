#include "helm/ndiff/tape.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace helm::nd {

namespace {

enum class Broadcast { none, row, scalar };

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b)
{
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

Broadcast broadcast_kind(const char* op, const Matrix& a, const Matrix& b)
{
    if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::none;
    if (b.rows() == 1 && b.cols() == 1) return Broadcast::scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::row;
    shape_error(op, a, b);
}

Matrix expand(const Matrix& b, Broadcast kind, Eigen::Index rows, Eigen::Index cols)
{
    switch (kind) {
    case Broadcast::none: return b;
    case Broadcast::row: return b.replicate(rows, 1);
    case Broadcast::scalar: return Matrix::Constant(rows, cols, b(0, 0));
    }
    return b;
}

void reduce_into(Matrix& target, const Matrix& g, Broadcast kind)
{
    switch (kind) {
    case Broadcast::none: target += g; break;
    case Broadcast::row: target += g.colwise().sum(); break;
    case Broadcast::scalar: target(0, 0) += g.sum(); break;
    }
}

Tape& tape_of(Var a)
{
    if (!a.valid()) throw std::invalid_argument("ndiff: operation on an unbound variable");
    return *a.tape();
}

Tape& common_tape(const char* op, Var a, Var b)
{
    Tape& t = tape_of(a);
    if (&t != b.tape()) throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
    return t;
}

Var unary(Var a, Matrix value, std::function<void(const Matrix& x, const Matrix& y, const Matrix& g, Matrix& gx)> rule)
{
    return tape_of(a).record(std::move(value), {a},
                             [a, rule = std::move(rule)](const Matrix& out, const Matrix& g, std::span<Matrix* const> in) {
                                 rule(a.value(), out, g, *in[0]);
                             });
}

Matrix row_softmax(const Matrix& x)
{
    Matrix y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mx = x.row(r).maxCoeff();
        y.row(r) = (x.row(r).array() - mx).exp();
        y.row(r) /= y.row(r).sum();
    }
    return y;
}

}  // namespace

std::string shape_str(const Matrix& m)
{
    std::ostringstream os;
    os << "(" << m.rows() << "x" << m.cols() << ")";
    return os.str();
}

const Matrix& Var::value() const
{
    if (!tape_) throw std::invalid_argument("ndiff: value of an unbound variable");
    return tape_->value(*this);
}

double Var::scalar() const
{
    const Matrix& v = value();
    if (v.size() != 1) throw std::invalid_argument("ndiff: scalar() on shape " + shape_str(v));
    return v(0, 0);
}

Var Tape::constant(Matrix value)
{
    return record(std::move(value), {}, nullptr);
}

Var Tape::param(Parameter& p)
{
    Var v = record(p.value, {}, nullptr);
    nodes_.back().param = &p;
    return v;
}

Var Tape::record(Matrix value, std::vector<Var> inputs, BackwardFn backward)
{
    Node n;
    n.value = std::move(value);
    n.inputs.reserve(inputs.size());
    for (const Var& v : inputs) {
        if (v.tape_ != this) throw std::invalid_argument("ndiff: input recorded on a different tape");
        n.inputs.push_back(v.id_);
    }
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    backward_done_ = false;
    return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const
{
    if (v.tape_ != this || v.id_ >= nodes_.size())
        throw std::invalid_argument("ndiff: variable is not recorded on this tape");
    return nodes_[v.id_];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

const Matrix& Tape::grad(Var v) const
{
    const Node& n = node(v);
    if (!backward_done_) throw std::logic_error("ndiff: gradients requested before backward()");
    if (!n.grad_ready) {
        static thread_local Matrix zero;
        zero = Matrix::Zero(n.value.rows(), n.value.cols());
        return zero;
    }
    return n.grad;
}

void Tape::backward(Var out)
{
    if (node(out).value.size() != 1)
        throw std::invalid_argument("ndiff: backward() without a seed needs a scalar, got " +
                                    shape_str(node(out).value));
    backward(out, Matrix::Ones(1, 1));
}

void Tape::backward(Var out, const Matrix& out_grad)
{
    if (nodes_.empty()) throw std::logic_error("ndiff: backward() on an empty tape (no forward pass recorded)");
    const Node& o = node(out);
    if (o.value.rows() != out_grad.rows() || o.value.cols() != out_grad.cols())
        shape_error("backward", o.value, out_grad);

    for (Node& n : nodes_) n.grad_ready = false;
    nodes_[out.id_].grad = out_grad;
    nodes_[out.id_].grad_ready = true;

    std::vector<Matrix*> input_grads;
    for (std::size_t i = out.id_ + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.grad_ready) continue;
        if (n.backward) {
            input_grads.clear();
            for (std::size_t in : n.inputs) {
                Node& src = nodes_[in];
                if (!src.grad_ready) {
                    src.grad = Matrix::Zero(src.value.rows(), src.value.cols());
                    src.grad_ready = true;
                }
                input_grads.push_back(&src.grad);
            }
            n.backward(n.value, n.grad, input_grads);
        }
        if (n.param) {
            Parameter& p = *n.param;
            if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
                p.grad = Matrix::Zero(p.value.rows(), p.value.cols());
            p.grad += n.grad;
        }
    }
    backward_done_ = true;
}

void Tape::clear()
{
    nodes_.clear();
    backward_done_ = false;
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b)
{
    Tape& t = common_tape("matmul", a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.cols() != bv.rows()) shape_error("matmul", av, bv);
    Matrix out = av * bv;
    return t.record(std::move(out), {a, b}, [a, b](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
        in[0]->noalias() += g * b.value().transpose();
        in[1]->noalias() += a.value().transpose() * g;
    });
}

Var add(Var a, Var b)
{
    Tape& t = common_tape("add", a, b);
    const Broadcast kind = broadcast_kind("add", a.value(), b.value());
    Matrix out = a.value() + expand(b.value(), kind, a.rows(), a.cols());
    return t.record(std::move(out), {a, b}, [kind](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
        *in[0] += g;
        reduce_into(*in[1], g, kind);
    });
}

Var sub(Var a, Var b)
{
    Tape& t = common_tape("sub", a, b);
    const Broadcast kind = broadcast_kind("sub", a.value(), b.value());
    Matrix out = a.value() - expand(b.value(), kind, a.rows(), a.cols());
    return t.record(std::move(out), {a, b}, [kind](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
        *in[0] += g;
        reduce_into(*in[1], -g, kind);
    });
}

Var mul(Var a, Var b)
{
    Tape& t = common_tape("mul", a, b);
    const Broadcast kind = broadcast_kind("mul", a.value(), b.value());
    Matrix out = a.value().cwiseProduct(expand(b.value(), kind, a.rows(), a.cols()));
    return t.record(std::move(out), {a, b}, [a, b, kind](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
        *in[0] += g.cwiseProduct(expand(b.value(), kind, g.rows(), g.cols()));
        reduce_into(*in[1], g.cwiseProduct(a.value()), kind);
    });
}

Var scale(Var a, double s)
{
    return unary(a, a.value() * s, [s](const Matrix&, const Matrix&, const Matrix& g, Matrix& gx) { gx += s * g; });
}

Var add_scalar(Var a, double s)
{
    return unary(a, (a.value().array() + s).matrix(),
                 [](const Matrix&, const Matrix&, const Matrix& g, Matrix& gx) { gx += g; });
}

Var transpose(Var a)
{
    return unary(a, a.value().transpose(),
                 [](const Matrix&, const Matrix&, const Matrix& g, Matrix& gx) { gx += g.transpose(); });
}

namespace {

thread_local KinkProbe* active_probe = nullptr;

void note_kink_distance(double d)
{
    for (KinkProbe* p = active_probe; p; p = p->outer()) p->note(d);
}

}  // namespace

KinkProbe::KinkProbe() : outer_(active_probe) { active_probe = this; }

KinkProbe::~KinkProbe() { active_probe = outer_; }

Var relu(Var a)
{
    if (active_probe && a.value().size() > 0) note_kink_distance(a.value().cwiseAbs().minCoeff());
    return unary(a, a.value().cwiseMax(0.0), [](const Matrix& x, const Matrix&, const Matrix& g, Matrix& gx) {
        gx.array() += (x.array() > 0.0).select(g.array(), 0.0);
    });
}

Var tanh(Var a)
{
    return unary(a, a.value().array().tanh().matrix(), [](const Matrix&, const Matrix& y, const Matrix& g, Matrix& gx) {
        gx.array() += g.array() * (1.0 - y.array().square());
    });
}

Var sigmoid(Var a)
{
    Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
    return unary(a, std::move(y), [](const Matrix&, const Matrix& y, const Matrix& g, Matrix& gx) {
        gx.array() += g.array() * y.array() * (1.0 - y.array());
    });
}

Var exp(Var a)
{
    return unary(a, a.value().array().exp().matrix(), [](const Matrix&, const Matrix& y, const Matrix& g, Matrix& gx) {
        gx.array() += g.array() * y.array();
    });
}

Var log(Var a)
{
    if ((a.value().array() <= 0.0).any()) throw std::domain_error("log: non-positive input");
    return unary(a, a.value().array().log().matrix(), [](const Matrix& x, const Matrix&, const Matrix& g, Matrix& gx) {
        gx.array() += g.array() / x.array();
    });
}

Var square(Var a)
{
    return unary(a, a.value().array().square().matrix(), [](const Matrix& x, const Matrix&, const Matrix& g, Matrix& gx) {
        gx.array() += 2.0 * g.array() * x.array();
    });
}

Var minimum(Var a, Var b)
{
    Tape& t = common_tape("minimum", a, b);
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("minimum", a.value(), b.value());
    Matrix out = a.value().cwiseMin(b.value());
    return t.record(std::move(out), {a, b}, [a, b](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
        const auto take_a = a.value().array() <= b.value().array();
        in[0]->array() += take_a.select(g.array(), 0.0);
        in[1]->array() += take_a.select(0.0, g.array());
    });
}

Var clamp(Var a, double lo, double hi)
{
    if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
    if (active_probe && a.value().size() > 0)
        note_kink_distance(std::min((a.value().array() - lo).abs().minCoeff(), (a.value().array() - hi).abs().minCoeff()));
    return unary(a, a.value().cwiseMax(lo).cwiseMin(hi), [lo, hi](const Matrix& x, const Matrix&, const Matrix& g, Matrix& gx) {
        gx.array() += (x.array() >= lo && x.array() <= hi).select(g.array(), 0.0);
    });
}

Var softmax_rows(Var a)
{
    return unary(a, row_softmax(a.value()), [](const Matrix&, const Matrix& y, const Matrix& g, Matrix& gx) {
        const Eigen::VectorXd dot = (g.array() * y.array()).rowwise().sum();
        gx.array() += y.array() * (g.array().colwise() - dot.array());
    });
}

Var log_softmax_rows(Var a)
{
    const Matrix& x = a.value();
    Matrix y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mx = x.row(r).maxCoeff();
        const double lse = mx + std::log((x.row(r).array() - mx).exp().sum());
        y.row(r) = x.row(r).array() - lse;
    }
    return unary(a, std::move(y), [](const Matrix&, const Matrix& y, const Matrix& g, Matrix& gx) {
        const Eigen::VectorXd gs = g.rowwise().sum();
        gx.array() += g.array() - y.array().exp().colwise() * gs.array();
    });
}

Var causal_softmax(Var a)
{
    const Matrix& x = a.value();
    const Eigen::Index offset = x.cols() - x.rows();
    if (offset < 0) throw std::invalid_argument("causal_softmax: needs cols >= rows, got " + shape_str(x));
    Matrix y = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const Eigen::Index n = r + offset + 1;
        const double mx = x.row(r).head(n).maxCoeff();
        y.row(r).head(n) = (x.row(r).head(n).array() - mx).exp();
        y.row(r).head(n) /= y.row(r).head(n).sum();
    }
    return unary(a, std::move(y), [](const Matrix&, const Matrix& y, const Matrix& g, Matrix& gx) {
        const Eigen::VectorXd dot = (g.array() * y.array()).rowwise().sum();
        gx.array() += y.array() * (g.array().colwise() - dot.array());
    });
}

Var layer_norm_rows(Var a, double eps)
{
    const Matrix& x = a.value();
    const Eigen::Index n = x.cols();
    Matrix y(x.rows(), n);
    Eigen::VectorXd inv_sigma(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double var = (x.row(r).array() - mu).square().mean();
        inv_sigma(r) = 1.0 / std::sqrt(var + eps);
        y.row(r) = (x.row(r).array() - mu) * inv_sigma(r);
    }
    return unary(a, std::move(y), [inv_sigma, n](const Matrix&, const Matrix& y, const Matrix& g, Matrix& gx) {
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            const double gm = g.row(r).mean();
            const double gy = g.row(r).dot(y.row(r)) / static_cast<double>(n);
            gx.row(r).array() += inv_sigma(r) * (g.row(r).array() - gm - y.row(r).array() * gy);
        }
    });
}

Var gather_rows(Var table, std::span<const int> index)
{
    const Matrix& tv = table.value();
    Matrix out(static_cast<Eigen::Index>(index.size()), tv.cols());
    for (std::size_t r = 0; r < index.size(); ++r) {
        if (index[r] < 0 || index[r] >= tv.rows())
            throw std::out_of_range("gather_rows: index " + std::to_string(index[r]) + " outside table " + shape_str(tv));
        out.row(static_cast<Eigen::Index>(r)) = tv.row(index[r]);
    }
    std::vector<int> idx(index.begin(), index.end());
    return tape_of(table).record(std::move(out), {table},
                                 [idx = std::move(idx)](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                                     for (std::size_t r = 0; r < idx.size(); ++r)
                                         in[0]->row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
                                 });
}

Var pick(Var a, std::span<const int> index)
{
    const Matrix& av = a.value();
    if (static_cast<Eigen::Index>(index.size()) != av.rows())
        throw std::invalid_argument("pick: " + std::to_string(index.size()) + " indices for shape " + shape_str(av));
    Matrix out(av.rows(), 1);
    for (Eigen::Index r = 0; r < av.rows(); ++r) {
        if (index[r] < 0 || index[r] >= av.cols()) throw std::out_of_range("pick: index out of range");
        out(r, 0) = av(r, index[r]);
    }
    std::vector<int> idx(index.begin(), index.end());
    return tape_of(a).record(std::move(out), {a},
                             [idx = std::move(idx)](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                                 for (std::size_t r = 0; r < idx.size(); ++r)
                                     (*in[0])(static_cast<Eigen::Index>(r), idx[r]) += g(static_cast<Eigen::Index>(r), 0);
                             });
}

Var concat_cols(std::span<const Var> parts)
{
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    Tape& t = tape_of(parts[0]);
    const Eigen::Index rows = parts[0].rows();
    Eigen::Index cols = 0;
    for (const Var& p : parts) {
        if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
        cols += p.cols();
    }
    Matrix out(rows, cols);
    std::vector<Eigen::Index> widths;
    Eigen::Index at = 0;
    for (const Var& p : parts) {
        out.middleCols(at, p.cols()) = p.value();
        widths.push_back(p.cols());
        at += p.cols();
    }
    return t.record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                    [widths](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                        Eigen::Index at = 0;
                        for (std::size_t k = 0; k < widths.size(); ++k) {
                            *in[k] += g.middleCols(at, widths[k]);
                            at += widths[k];
                        }
                    });
}

Var concat_rows(std::span<const Var> parts)
{
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    Tape& t = tape_of(parts[0]);
    const Eigen::Index cols = parts[0].cols();
    Eigen::Index rows = 0;
    for (const Var& p : parts) {
        if (p.cols() != cols) shape_error("concat_rows", parts[0].value(), p.value());
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::vector<Eigen::Index> heights;
    Eigen::Index at = 0;
    for (const Var& p : parts) {
        out.middleRows(at, p.rows()) = p.value();
        heights.push_back(p.rows());
        at += p.rows();
    }
    return t.record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                    [heights](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                        Eigen::Index at = 0;
                        for (std::size_t k = 0; k < heights.size(); ++k) {
                            *in[k] += g.middleRows(at, heights[k]);
                            at += heights[k];
                        }
                    });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count)
{
    if (start < 0 || count < 0 || start + count > a.cols())
        throw std::out_of_range("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                                ") outside " + shape_str(a.value()));
    return unary(a, a.value().middleCols(start, count),
                 [start, count](const Matrix&, const Matrix&, const Matrix& g, Matrix& gx) {
                     gx.middleCols(start, count) += g;
                 });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count)
{
    if (start < 0 || count < 0 || start + count > a.rows())
        throw std::out_of_range("slice_rows: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                                ") outside " + shape_str(a.value()));
    return unary(a, a.value().middleRows(start, count),
                 [start, count](const Matrix&, const Matrix&, const Matrix& g, Matrix& gx) {
                     gx.middleRows(start, count) += g;
                 });
}

Var relative_bias(Var bias, Eigen::Index length)
{
    const Matrix& b = bias.value();
    if (b.rows() != 1 || b.cols() < length)
        throw std::invalid_argument("relative_bias: bias " + shape_str(b) + " too short for length " +
                                    std::to_string(length));
    Matrix out = Matrix::Zero(length, length);
    for (Eigen::Index i = 0; i < length; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) out(i, j) = b(0, i - j);
    return unary(bias, std::move(out), [](const Matrix&, const Matrix& y, const Matrix& g, Matrix& gx) {
        for (Eigen::Index i = 0; i < y.rows(); ++i)
            for (Eigen::Index j = 0; j <= i; ++j) gx(0, i - j) += g(i, j);
    });
}

Var sum(Var a)
{
    return unary(a, Matrix::Constant(1, 1, a.value().sum()),
                 [](const Matrix&, const Matrix&, const Matrix& g, Matrix& gx) { gx.array() += g(0, 0); });
}

Var mean(Var a)
{
    const double n = static_cast<double>(a.value().size());
    if (n == 0) throw std::invalid_argument("mean: empty input");
    return unary(a, Matrix::Constant(1, 1, a.value().sum() / n),
                 [n](const Matrix&, const Matrix&, const Matrix& g, Matrix& gx) { gx.array() += g(0, 0) / n; });
}

Var row_sum(Var a)
{
    return unary(a, a.value().rowwise().sum(), [](const Matrix&, const Matrix&, const Matrix& g, Matrix& gx) {
        gx.colwise() += g.col(0);
    });
}

Var cross_entropy(Var logits, std::span<const int> targets)
{
    return scale(mean(pick(log_softmax_rows(logits), targets)), -1.0);
}

}  // namespace helm::nd
