#pragma once

// Frozen observation-to-token association: a fixed Gaussian projection P
// maps an observation o into token-embedding space, and a single Hopfield
// update over the embedding table E returns
//
//   x^T = softmax(beta o^T P^T E^T) E,
//
// a point in the convex hull of the token embeddings.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "helm/hopfield/hopfield.hpp"

namespace helm::fhopfield {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class ProjectionScaling {
    /// Entries N(0, 1/m): E||P d||^2 = ||d||^2.
    distance_preserving,
    /// Entries N(0, n/m), the literal variance; equivalent to the above with
    /// beta multiplied by sqrt(n).
    variance_n_over_m,
};

struct ProjectionMatrix {
    MatrixXd matrix;  // m x n
    std::uint64_t seed = 0;
    ProjectionScaling scaling = ProjectionScaling::distance_preserving;

    Eigen::Index obs_dim() const { return matrix.cols(); }
    Eigen::Index embed_dim() const { return matrix.rows(); }
    double entry_variance() const;
};

/// Deterministic in (n, m, seed, scaling); entries drawn row-major.
ProjectionMatrix sample_projection(int obs_dim, int embed_dim, std::uint64_t seed,
                                   ProjectionScaling scaling = ProjectionScaling::distance_preserving);

class FrozenHopfield {
public:
    FrozenHopfield(MatrixXd embeddings, ProjectionMatrix projection, double beta);

    const hopfield::PatternStore<double>& store() const { return store_; }
    const ProjectionMatrix& projection() const { return projection_; }
    double beta() const { return store_.beta(); }
    Eigen::Index obs_dim() const { return projection_.obs_dim(); }
    Eigen::Index embed_dim() const { return projection_.embed_dim(); }
    Eigen::Index vocab_size() const { return store_.size(); }

    /// P o
    VectorXd query(const Eigen::Ref<const VectorXd>& obs) const;
    /// Token-space input for the memory model.
    VectorXd embed(const Eigen::Ref<const VectorXd>& obs) const;
    /// Softmax weights over tokens for the same retrieval.
    VectorXd weights(const Eigen::Ref<const VectorXd>& obs) const;
    /// argmax_i e_i^T (P o), ties to the lowest index.
    Eigen::Index nearest_token(const Eigen::Ref<const VectorXd>& obs) const;

    FrozenHopfield with_beta(double beta) const;

private:
    void check(const Eigen::Ref<const VectorXd>& obs) const;

    hopfield::PatternStore<double> store_;
    ProjectionMatrix projection_;
};

/// delta = 2 exp(-m (eps^2/2 - eps^3/3) / 2)
double jl_failure_prob(int embed_dim, double eps);

struct JlReport {
    double eps = 0;
    int embed_dim = 0;
    double delta = 0;
    std::size_t pairs = 0;       // pairs with non-zero difference
    std::size_t skipped = 0;     // zero-difference pairs
    std::size_t violations = 0;  // ratio outside [1 - eps, 1 + eps]
    double violation_fraction = 0;
    double mean_ratio = 0;
    double min_ratio = 0;
    double max_ratio = 0;
};

/// Ratios ||P d||^2 / ||d||^2 over d = first.row(r) - second.row(r).
JlReport distortion_stats(const ProjectionMatrix& projection, const MatrixXd& first, const MatrixXd& second, double eps);

/// Symmetric Euclidean distance matrix between rows, exact zero diagonal.
MatrixXd pairwise_distances(const MatrixXd& rows);

struct DistanceMatrices {
    MatrixXd observation;
    std::vector<std::pair<double, MatrixXd>> embedded;  // (beta, distances)
};

/// Distances between observations (rows) before and after the mapping, one
/// embedded matrix per beta.
DistanceMatrices distance_matrices(const MatrixXd& observations, const FrozenHopfield& fh, std::span<const double> betas);

/// Flattened luma 0.299 R + 0.587 G + 0.114 B of an interleaved RGB image.
VectorXd flatten_grayscale(std::span<const double> rgb, int rows, int cols);

}  // namespace helm::fhopfield
