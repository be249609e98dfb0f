#pragma once

// Continuous modern Hopfield network with stored patterns as rows of E.
//
//   energy  L(xi) = -1/beta log sum_i exp(beta e_i^T xi) + 1/beta log k
//                   + 1/2 xi^T xi + 1/2 M^2
//   update  f(xi) = E^T softmax(beta E xi)
//
// One update of f is what the observation-to-token mapping uses; iterating
// to convergence is deliberately not offered.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace helm::hopfield {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
class PatternStore {
public:
    PatternStore(MatrixX<Scalar> patterns, Scalar beta) : patterns_(std::move(patterns)), beta_(beta)
    {
        if (patterns_.rows() < 1) throw std::invalid_argument("PatternStore: needs at least one pattern");
        if (!(beta_ > Scalar(0))) throw std::invalid_argument("PatternStore: beta must be positive");
        if (!patterns_.allFinite()) throw std::invalid_argument("PatternStore: non-finite pattern entries");
        max_norm_ = patterns_.rowwise().norm().maxCoeff();
    }

    const MatrixX<Scalar>& patterns() const { return patterns_; }
    Scalar beta() const { return beta_; }
    /// M = max_i ||e_i||.
    Scalar max_norm() const { return max_norm_; }
    Eigen::Index size() const { return patterns_.rows(); }
    Eigen::Index dim() const { return patterns_.cols(); }

    PatternStore with_beta(Scalar beta) const { return PatternStore(patterns_, beta); }

private:
    MatrixX<Scalar> patterns_;
    Scalar beta_;
    Scalar max_norm_{};
};

template <typename Scalar>
struct RetrievalReport {
    VectorX<Scalar> retrieved;
    VectorX<Scalar> weights;
    Scalar energy_before{};
    Scalar energy_after{};
    /// Index of the largest weight; ties resolve to the lowest index.
    Eigen::Index argmax = 0;
};

/// Probability vector softmax(beta * z) with the max subtracted first.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& z, typename Derived::Scalar beta)
{
    using Scalar = typename Derived::Scalar;
    const VectorX<Scalar> scaled = beta * z;
    VectorX<Scalar> w = (scaled.array() - scaled.maxCoeff()).exp();
    return w / w.sum();
}

template <typename Derived>
Eigen::Index first_argmax(const Eigen::MatrixBase<Derived>& v)
{
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (v(i) > v(best)) best = i;
    return best;
}

namespace detail {
template <typename Scalar, typename Derived>
void check_dim(const PatternStore<Scalar>& store, const Eigen::MatrixBase<Derived>& xi, const char* op)
{
    if (xi.size() != store.dim())
        throw std::invalid_argument(std::string(op) + ": state has dimension " + std::to_string(xi.size()) +
                                    ", patterns have " + std::to_string(store.dim()));
}
}  // namespace detail

template <typename Scalar, typename Derived>
Scalar energy(const PatternStore<Scalar>& store, const Eigen::MatrixBase<Derived>& xi)
{
    using std::exp;
    using std::log;
    detail::check_dim(store, xi, "energy");
    const VectorX<Scalar> z = store.beta() * (store.patterns() * xi.derived());
    const Scalar mx = z.maxCoeff();
    const Scalar lse = mx + log((z.array() - mx).exp().sum());
    const Scalar k = static_cast<Scalar>(store.size());
    return -lse / store.beta() + log(k) / store.beta() + Scalar(0.5) * xi.squaredNorm() +
           Scalar(0.5) * store.max_norm() * store.max_norm();
}

/// Softmax weights of one update, without the energy bookkeeping.
template <typename Scalar, typename Derived>
VectorX<Scalar> retrieval_weights(const PatternStore<Scalar>& store, const Eigen::MatrixBase<Derived>& xi)
{
    detail::check_dim(store, xi, "retrieve");
    return softmax(store.patterns() * xi.derived(), store.beta());
}

template <typename Scalar, typename Derived>
RetrievalReport<Scalar> retrieve(const PatternStore<Scalar>& store, const Eigen::MatrixBase<Derived>& xi)
{
    RetrievalReport<Scalar> r;
    r.weights = retrieval_weights(store, xi);
    r.retrieved = store.patterns().transpose() * r.weights;
    r.argmax = first_argmax(r.weights);
    r.energy_before = energy(store, xi);
    r.energy_after = energy(store, r.retrieved);
    return r;
}

/// Delta_i = min_{j != i} (e_i^T e_i - e_i^T e_j).
template <typename Scalar>
Scalar separation(const PatternStore<Scalar>& store, Eigen::Index i)
{
    if (store.size() < 2) throw std::invalid_argument("separation: undefined for a single pattern");
    if (i < 0 || i >= store.size()) throw std::out_of_range("separation: pattern index out of range");
    const auto& e = store.patterns();
    const VectorX<Scalar> dots = e * e.row(i).transpose();
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < store.size(); ++j)
        if (j != i) best = std::min(best, dots(i) - dots(j));
    return best;
}

/// Threshold 2/(beta k) + 1/beta log(2 (k-1) k beta M^2).
template <typename Scalar>
Scalar separation_threshold(const PatternStore<Scalar>& store)
{
    using std::log;
    const Scalar k = static_cast<Scalar>(store.size());
    const Scalar b = store.beta();
    const Scalar m = store.max_norm();
    return Scalar(2) / (b * k) + log(Scalar(2) * (k - 1) * k * b * m * m) / b;
}

template <typename Scalar>
bool well_separated(const PatternStore<Scalar>& store, Eigen::Index i)
{
    if (store.size() < 2) throw std::invalid_argument("well_separated: needs at least two patterns");
    return separation(store, i) >= separation_threshold(store);
}

template <typename Scalar>
struct RetrievalBound {
    /// ||xi - e_i||
    Scalar query_distance{};
    /// Upper bound used for ||e_i* - e_i||.
    Scalar fixed_point_distance{};
    /// 2 beta k M^2 (k-1) exp(-beta (Delta_i - 2 max{..} M)).
    Scalar jacobian_bound{};
    /// jacobian_bound * (query_distance + fixed_point_distance), which bounds
    /// ||f(xi) - e_i*|| because ||xi - e_i*|| <= ||xi - e_i|| + ||e_i - e_i*||.
    Scalar one_update_bound{};
    /// 2 (k-1) exp(-beta (Delta_i - 2 max{..} M)) M, bounding ||f(xi) - e_i||.
    Scalar error_bound{};
};

/// Self-consistent estimate of ||e_i* - e_i||: the fixed point of
/// d = 2 (k-1) M exp(-beta (Delta_i - 2 d M)) reached from d = 0, capped at 2M
/// (the fixed point lies in the convex hull of the patterns).
template <typename Scalar>
Scalar fixed_point_distance_estimate(const PatternStore<Scalar>& store, Eigen::Index i)
{
    using std::abs;
    using std::exp;
    const Scalar k = static_cast<Scalar>(store.size());
    const Scalar m = store.max_norm();
    const Scalar cap = Scalar(2) * m;
    const Scalar delta = separation(store, i);
    Scalar d = 0;
    for (int it = 0; it < 200; ++it) {
        const Scalar next = std::min(cap, Scalar(2) * (k - 1) * m * exp(-store.beta() * (delta - Scalar(2) * d * m)));
        if (abs(next - d) <= std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + next)) return next;
        d = next;
    }
    return d;
}

template <typename Scalar, typename Derived>
RetrievalBound<Scalar> retrieval_error_bound(const PatternStore<Scalar>& store, const Eigen::MatrixBase<Derived>& xi,
                                             Eigen::Index i, std::optional<Scalar> fixed_point_distance = std::nullopt)
{
    using std::exp;
    detail::check_dim(store, xi, "retrieval_error_bound");
    const Scalar k = static_cast<Scalar>(store.size());
    const Scalar m = store.max_norm();
    const Scalar delta = separation(store, i);

    RetrievalBound<Scalar> b;
    b.query_distance = (xi.derived() - store.patterns().row(i).transpose()).norm();
    b.fixed_point_distance = fixed_point_distance ? *fixed_point_distance : fixed_point_distance_estimate(store, i);
    const Scalar reach = std::max(b.query_distance, b.fixed_point_distance);
    const Scalar factor = exp(-store.beta() * (delta - Scalar(2) * reach * m));
    b.jacobian_bound = Scalar(2) * store.beta() * k * m * m * (k - 1) * factor;
    b.one_update_bound = b.jacobian_bound * (b.query_distance + b.fixed_point_distance);
    b.error_bound = Scalar(2) * (k - 1) * factor * m;
    return b;
}

/// Principal branch W0 of the Lambert W function, w e^w = x, by Halley
/// iteration. Initial guess ln(1 + x) for x >= 0 and the branch-point series
/// -1 + p - p^2/3 + 11 p^3 / 72 with p = sqrt(2 (e x + 1)) below zero.
template <typename Scalar>
Scalar lambert_w0(Scalar x)
{
    using std::abs;
    using std::exp;
    using std::log;
    using std::sqrt;
    const Scalar e = exp(Scalar(1));
    const Scalar branch = Scalar(-1) / e;
    if (x < branch) {
        // Allow round-off right at the branch point.
        if (branch - x > Scalar(64) * std::numeric_limits<Scalar>::epsilon())
            throw std::domain_error("lambert_w0: argument below -1/e");
        return Scalar(-1);
    }
    if (x == Scalar(0)) return Scalar(0);

    Scalar w;
    if (x >= Scalar(0)) {
        w = log(Scalar(1) + x);
    } else {
        const Scalar p = sqrt(Scalar(2) * (e * x + Scalar(1)));
        w = Scalar(-1) + p - p * p / Scalar(3) + Scalar(11) * p * p * p / Scalar(72);
    }
    const Scalar tol = Scalar(4) * std::numeric_limits<Scalar>::epsilon();
    for (int it = 0; it < 50; ++it) {
        const Scalar ew = exp(w);
        const Scalar f = w * ew - x;
        const Scalar wp1 = w + Scalar(1);
        if (wp1 == Scalar(0)) break;
        const Scalar step = f / (ew * wp1 - (w + Scalar(2)) * f / (Scalar(2) * wp1));
        w -= step;
        if (abs(step) <= tol * (Scalar(1) + abs(w))) break;
    }
    return w;
}

/// Storage-capacity bound for random patterns on the sphere of radius
/// K sqrt(m - 1) with failure probability p.
struct CapacityBound {
    double beta = 0;
    double radius_scale = 0;  // K
    double dim = 0;           // m
    double failure_prob = 0;  // p
    double a = 0;             // 2/(m-1) (1 + ln(2 beta K^2 p (m-1)))
    double b = 0;             // 2 K^2 beta / 5
    double c = 0;             // b / W0(exp(a + ln b))
    double exponent = 0;      // a + ln b
    double min_patterns = 0;  // sqrt(p) c^((m-1)/4)
    double c_threshold = 0;   // (2 / sqrt(p))^(4/(m-1))
    bool feasible = false;    // c >= c_threshold
};

CapacityBound capacity_bound(double beta, double radius_scale, int dim, double failure_prob);

}  // namespace helm::hopfield
