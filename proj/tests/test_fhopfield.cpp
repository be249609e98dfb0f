#include <doctest.h>

#include <cmath>

#include "helm/fhopfield/frozen_hopfield.hpp"
#include "helm/rng.hpp"

using namespace helm;
using namespace helm::fhopfield;

namespace {

MatrixXd gaussian(Rng& rng, int rows, int cols, double sd = 1.0)
{
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal(0.0, sd);
    return m;
}

double sample_variance(const MatrixXd& m)
{
    const double mu = m.mean();
    return (m.array() - mu).square().sum() / static_cast<double>(m.size() - 1);
}

}  // namespace

TEST_CASE("projection entries have the requested variance")
{
    auto literal = sample_projection(1024, 256, 11, ProjectionScaling::variance_n_over_m);
    const double v = sample_variance(literal.matrix);
    CHECK(v >= 3.8);
    CHECK(v <= 4.2);
    CHECK(literal.entry_variance() == 4.0);

    auto square = sample_projection(400, 400, 12, ProjectionScaling::variance_n_over_m);
    CHECK(std::abs(sample_variance(square.matrix) - 1.0) < 0.05);

    auto dp = sample_projection(1024, 256, 11);
    CHECK(std::abs(sample_variance(dp.matrix) * 256.0 - 1.0) < 0.05);
    CHECK(dp.matrix.rows() == 256);
    CHECK(dp.matrix.cols() == 1024);
}

TEST_CASE("projection is deterministic in the seed")
{
    CHECK(sample_projection(30, 20, 5).matrix == sample_projection(30, 20, 5).matrix);
    CHECK(sample_projection(30, 20, 5).matrix != sample_projection(30, 20, 6).matrix);
}

TEST_CASE("one token maps everything to itself")
{
    Rng rng(1);
    FrozenHopfield fh(gaussian(rng, 1, 8), sample_projection(20, 8, 2), 3.0);
    for (int k = 0; k < 10; ++k) {
        VectorXd o = gaussian(rng, 20, 1).col(0);
        CHECK(fh.embed(o) == fh.store().patterns().row(0).transpose());
        CHECK(fh.nearest_token(o) == 0);
    }
}

TEST_CASE("embed equals one Hopfield retrieval on the projected query")
{
    Rng rng(2);
    FrozenHopfield fh(gaussian(rng, 50, 16, 0.5), sample_projection(81, 16, 3), 7.0);
    for (int k = 0; k < 20; ++k) {
        VectorXd o = gaussian(rng, 81, 1).col(0);
        auto r = hopfield::retrieve(fh.store(), fh.projection().matrix * o);
        VectorXd x = fh.embed(o);
        CHECK((x - r.retrieved).cwiseAbs().maxCoeff() <= 1e-12);
        VectorXd w = fh.weights(o);
        CHECK((w.array() >= 0.0).all());
        CHECK(std::abs(w.sum() - 1.0) < 1e-12);
        CHECK((fh.store().patterns().transpose() * w - x).norm() < 1e-12);
    }
    CHECK_THROWS_AS(fh.embed(VectorXd::Zero(80)), std::invalid_argument);
}

TEST_CASE("large beta retrieves the aligned token")
{
    Rng rng(3);
    MatrixXd e = gaussian(rng, 10, 16);
    auto p = sample_projection(64, 16, 4);
    FrozenHopfield fh(e, p, 1e4);
    // o in the row space of P with P o = e_3.
    const MatrixXd pinv = p.matrix.completeOrthogonalDecomposition().pseudoInverse();
    VectorXd o = pinv * e.row(3).transpose();
    CHECK((p.matrix * o - e.row(3).transpose()).norm() < 1e-9);
    CHECK(fh.nearest_token(o) == 3);
    CHECK((fh.embed(o) - e.row(3).transpose()).norm() < 1e-6);
}

TEST_CASE("nearest token agrees with very sharp retrieval")
{
    Rng rng(4);
    FrozenHopfield fh(gaussian(rng, 64, 16), sample_projection(49, 16, 5), 1e6);
    for (int k = 0; k < 50; ++k) {
        VectorXd o = gaussian(rng, 49, 1).col(0);
        const auto i = fh.nearest_token(o);
        CHECK((fh.embed(o) - fh.store().patterns().row(i).transpose()).norm() < 1e-4);
        CHECK(fh.nearest_token(o) == i);
    }
}

TEST_CASE("beta limits of the mapping")
{
    Rng rng(5);
    FrozenHopfield fh(gaussian(rng, 12, 8), sample_projection(30, 8, 6), 1e-8);
    VectorXd o = gaussian(rng, 30, 1).col(0);
    CHECK((fh.embed(o) - fh.store().patterns().colwise().mean().transpose()).norm() < 1e-6);
}

TEST_CASE("JL failure probability")
{
    CHECK(jl_failure_prob(1024, 0.5) == doctest::Approx(2.0 * std::exp(-1024.0 * (0.125 - 0.125 / 3.0) / 2.0)));
    CHECK(jl_failure_prob(1024, 0.5) == doctest::Approx(5.9e-19).epsilon(0.01));
    CHECK(jl_failure_prob(256, 0.5) == doctest::Approx(4.7e-5).epsilon(0.02));
    CHECK(jl_failure_prob(64, 1e-9) == doctest::Approx(2.0));
    for (int m = 1; m < 200; ++m) CHECK(jl_failure_prob(m + 1, 0.3) < jl_failure_prob(m, 0.3));
    CHECK_THROWS(jl_failure_prob(10, 1.5));
}

TEST_CASE("random projection preserves distances")
{
    Rng rng(6);
    const auto p = sample_projection(1024, 256, 7);
    MatrixXd a = gaussian(rng, 1000, 1024), b = gaussian(rng, 1000, 1024);
    b.row(0) = a.row(0);
    auto rep = distortion_stats(p, a, b, 0.5);
    CHECK(rep.skipped == 1);
    CHECK(rep.pairs == 999);
    CHECK(rep.delta == jl_failure_prob(256, 0.5));
    CHECK(static_cast<double>(rep.violations) <= 999.0 * (rep.delta + 3.0 * std::sqrt(rep.delta / 1000.0)));
    CHECK(rep.mean_ratio >= 0.95);
    CHECK(rep.mean_ratio <= 1.05);
}

TEST_CASE("distance matrices")
{
    Rng rng(8);
    MatrixXd obs = gaussian(rng, 6, 20);
    obs.row(5) = obs.row(4);
    FrozenHopfield fh(gaussian(rng, 32, 8), sample_projection(20, 8, 9), 1.0);
    const std::vector<double> betas{1.0, 10.0, 100.0};
    auto dm = distance_matrices(obs, fh, betas);
    REQUIRE(dm.embedded.size() == 3);
    for (const MatrixXd* m : {&dm.observation, &dm.embedded[0].second, &dm.embedded[2].second}) {
        CHECK(*m == m->transpose());
        CHECK(m->diagonal().isZero(0.0));
        CHECK((*m)(4, 5) == 0.0);
    }
    CHECK(dm.embedded[1].first == 10.0);
}

TEST_CASE("grayscale flattening uses luma weights")
{
    const std::vector<double> rgb{1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1};
    VectorXd g = flatten_grayscale(rgb, 2, 2);
    CHECK(g(0) == doctest::Approx(0.299));
    CHECK(g(1) == doctest::Approx(0.587));
    CHECK(g(2) == doctest::Approx(0.114));
    CHECK(g(3) == doctest::Approx(1.0));
}
