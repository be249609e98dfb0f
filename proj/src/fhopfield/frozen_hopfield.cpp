#include "helm/fhopfield/frozen_hopfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "helm/rng.hpp"

namespace helm::fhopfield {

double ProjectionMatrix::entry_variance() const
{
    const double n = static_cast<double>(obs_dim());
    const double m = static_cast<double>(embed_dim());
    return scaling == ProjectionScaling::distance_preserving ? 1.0 / m : n / m;
}

ProjectionMatrix sample_projection(int obs_dim, int embed_dim, std::uint64_t seed, ProjectionScaling scaling)
{
    if (obs_dim < 1 || embed_dim < 1) throw std::invalid_argument("sample_projection: dimensions must be >= 1");
    ProjectionMatrix p;
    p.seed = seed;
    p.scaling = scaling;
    p.matrix.resize(embed_dim, obs_dim);
    const double n = obs_dim;
    const double m = embed_dim;
    const double stddev = std::sqrt(scaling == ProjectionScaling::distance_preserving ? 1.0 / m : n / m);
    Rng rng(seed);
    for (int r = 0; r < embed_dim; ++r)
        for (int c = 0; c < obs_dim; ++c) p.matrix(r, c) = rng.normal(0.0, stddev);
    return p;
}

FrozenHopfield::FrozenHopfield(MatrixXd embeddings, ProjectionMatrix projection, double beta)
    : store_(std::move(embeddings), beta), projection_(std::move(projection))
{
    if (store_.dim() != projection_.embed_dim())
        throw std::invalid_argument("FrozenHopfield: embedding dim " + std::to_string(store_.dim()) +
                                    " does not match projection rows " + std::to_string(projection_.embed_dim()));
}

void FrozenHopfield::check(const Eigen::Ref<const VectorXd>& obs) const
{
    if (obs.size() != obs_dim())
        throw std::invalid_argument("FrozenHopfield: observation has dimension " + std::to_string(obs.size()) +
                                    ", expected " + std::to_string(obs_dim()));
}

VectorXd FrozenHopfield::query(const Eigen::Ref<const VectorXd>& obs) const
{
    check(obs);
    return projection_.matrix * obs;
}

VectorXd FrozenHopfield::weights(const Eigen::Ref<const VectorXd>& obs) const
{
    return hopfield::retrieval_weights(store_, query(obs));
}

VectorXd FrozenHopfield::embed(const Eigen::Ref<const VectorXd>& obs) const
{
    return store_.patterns().transpose() * weights(obs);
}

Eigen::Index FrozenHopfield::nearest_token(const Eigen::Ref<const VectorXd>& obs) const
{
    const VectorXd scores = store_.patterns() * query(obs);
    return hopfield::first_argmax(scores);
}

FrozenHopfield FrozenHopfield::with_beta(double beta) const
{
    return FrozenHopfield(store_.patterns(), projection_, beta);
}

double jl_failure_prob(int embed_dim, double eps)
{
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("jl_failure_prob: need 0 < eps < 1");
    const double m = embed_dim;
    return 2.0 * std::exp(-m * (eps * eps / 2.0 - eps * eps * eps / 3.0) / 2.0);
}

JlReport distortion_stats(const ProjectionMatrix& projection, const MatrixXd& first, const MatrixXd& second, double eps)
{
    if (first.rows() != second.rows() || first.cols() != second.cols())
        throw std::invalid_argument("distortion_stats: pair matrices differ in shape");
    if (first.cols() != projection.obs_dim())
        throw std::invalid_argument("distortion_stats: observation dim does not match projection");

    JlReport r;
    r.eps = eps;
    r.embed_dim = static_cast<int>(projection.embed_dim());
    r.delta = jl_failure_prob(r.embed_dim, eps);
    r.min_ratio = std::numeric_limits<double>::infinity();
    r.max_ratio = -std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (Eigen::Index i = 0; i < first.rows(); ++i) {
        const VectorXd d = (first.row(i) - second.row(i)).transpose();
        const double dn = d.squaredNorm();
        if (dn == 0.0) {
            ++r.skipped;
            continue;
        }
        const double ratio = (projection.matrix * d).squaredNorm() / dn;
        ++r.pairs;
        total += ratio;
        r.min_ratio = std::min(r.min_ratio, ratio);
        r.max_ratio = std::max(r.max_ratio, ratio);
        if (ratio < 1.0 - eps || ratio > 1.0 + eps) ++r.violations;
    }
    if (r.pairs > 0) {
        r.mean_ratio = total / static_cast<double>(r.pairs);
        r.violation_fraction = static_cast<double>(r.violations) / static_cast<double>(r.pairs);
    } else {
        r.min_ratio = r.max_ratio = 0.0;
    }
    return r;
}

MatrixXd pairwise_distances(const MatrixXd& rows)
{
    const Eigen::Index n = rows.rows();
    MatrixXd d = MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (rows.row(i) - rows.row(j)).norm();
    return d;
}

DistanceMatrices distance_matrices(const MatrixXd& observations, const FrozenHopfield& fh, std::span<const double> betas)
{
    if (observations.rows() < 2) throw std::invalid_argument("distance_matrices: need at least two observations");
    DistanceMatrices out;
    out.observation = pairwise_distances(observations);
    for (double beta : betas) {
        const FrozenHopfield mapped = fh.with_beta(beta);
        MatrixXd emb(observations.rows(), fh.embed_dim());
        for (Eigen::Index i = 0; i < observations.rows(); ++i)
            emb.row(i) = mapped.embed(observations.row(i).transpose()).transpose();
        out.embedded.emplace_back(beta, pairwise_distances(emb));
    }
    return out;
}

VectorXd flatten_grayscale(std::span<const double> rgb, int rows, int cols)
{
    if (rgb.size() != static_cast<std::size_t>(rows) * cols * 3)
        throw std::invalid_argument("flatten_grayscale: expected rows * cols * 3 values");
    VectorXd out(rows * cols);
    for (int i = 0; i < rows * cols; ++i)
        out(i) = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    return out;
}

}  // namespace helm::fhopfield
