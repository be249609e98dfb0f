#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include "helm/hopfield/hopfield.hpp"
#include "helm/rng.hpp"

using namespace helm;
using namespace helm::hopfield;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd gaussian(Rng& rng, int rows, int cols, double sd = 1.0)
{
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal(0.0, sd);
    return m;
}

VectorXd gaussian_vec(Rng& rng, int n, double sd = 1.0) { return gaussian(rng, n, 1, sd).col(0); }

MatrixXd random_rotation(Rng& rng, int n)
{
    Eigen::HouseholderQR<MatrixXd> qr(gaussian(rng, n, n));
    return qr.householderQ();
}

}  // namespace

TEST_CASE("single pattern retrieves itself")
{
    Rng rng(1);
    PatternStore<double> s(gaussian(rng, 1, 5), 2.0);
    for (int k = 0; k < 10; ++k) {
        auto r = retrieve(s, gaussian_vec(rng, 5, 3.0));
        CHECK((r.retrieved - s.patterns().row(0).transpose()).norm() == 0.0);
        CHECK(r.argmax == 0);
    }
    VectorXd e1 = s.patterns().row(0).transpose();
    CHECK(std::abs(energy(s, e1)) < 1e-12);
}

TEST_CASE("retrieval lies in the convex hull")
{
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        PatternStore<double> s(gaussian(rng, 1 + static_cast<int>(rng.below(16)), 8), rng.uniform(0.01, 50.0));
        auto r = retrieve(s, gaussian_vec(rng, 8));
        CHECK((r.weights.array() >= 0.0).all());
        CHECK(std::abs(r.weights.sum() - 1.0) < 1e-12);
        CHECK((r.retrieved - s.patterns().transpose() * r.weights).norm() < 1e-12);
    }
}

TEST_CASE("dimension mismatch is an error")
{
    PatternStore<double> s(MatrixXd::Identity(3, 3), 1.0);
    CHECK_THROWS_AS(retrieve(s, VectorXd::Zero(4)), std::invalid_argument);
    CHECK_THROWS_AS(energy(s, VectorXd::Zero(2)), std::invalid_argument);
    CHECK_THROWS_AS(PatternStore<double>(MatrixXd::Identity(3, 3), 0.0), std::invalid_argument);
}

TEST_CASE("beta limits")
{
    Rng rng(3);
    MatrixXd e = gaussian(rng, 6, 10);
    VectorXd xi = e.row(2).transpose() + 0.05 * gaussian_vec(rng, 10);
    auto low = retrieve(PatternStore<double>(e, 1e-8), xi);
    CHECK((low.retrieved - e.colwise().mean().transpose()).norm() < 1e-6);
    auto high = retrieve(PatternStore<double>(e, 1e4), xi);
    CHECK(high.argmax == 2);
    CHECK((high.retrieved - e.row(2).transpose()).norm() < 1e-6);
}

TEST_CASE("max weight index follows the brute-force dot product argmax")
{
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        PatternStore<double> s(gaussian(rng, 8, 32, 2.0), 1.0);
        const auto i = static_cast<Eigen::Index>(rng.below(8));
        VectorXd xi = s.patterns().row(i).transpose() + 0.01 * gaussian_vec(rng, 32);
        VectorXd dots = s.patterns() * xi;
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < dots.size(); ++j)
            if (dots(j) > dots(best)) best = j;
        CHECK(retrieve(s, xi).argmax == best);
    }
}

TEST_CASE("ties in the argmax go to the lowest index")
{
    MatrixXd e(3, 2);
    e << 1, 0, 1, 0, 0, 1;
    CHECK(retrieve(PatternStore<double>(e, 1e4), VectorXd::Unit(2, 0)).argmax == 0);
}

TEST_CASE("energy does not increase under one update")
{
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(16));
        const int m = 1 + static_cast<int>(rng.below(16));
        PatternStore<double> s(gaussian(rng, k, m), std::exp(rng.uniform(-3.0, 4.0)));
        auto r = retrieve(s, gaussian_vec(rng, m, 2.0));
        CHECK(r.energy_after <= r.energy_before + 1e-9);
    }
}

TEST_CASE("energy is rotation invariant")
{
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        MatrixXd e = gaussian(rng, 5, 6);
        VectorXd xi = gaussian_vec(rng, 6);
        MatrixXd q = random_rotation(rng, 6);
        PatternStore<double> a(e, 1.5), b(e * q.transpose(), 1.5);
        CHECK(std::abs(energy(a, xi) - energy(b, VectorXd(q * xi))) < 1e-9);
    }
}

TEST_CASE("separation")
{
    PatternStore<double> ortho(MatrixXd::Identity(4, 4), 1.0);
    for (int i = 0; i < 4; ++i) CHECK(separation(ortho, i) == doctest::Approx(1.0));

    MatrixXd dup(3, 2);
    dup << 1, 2, 1, 2, -1, 0;
    PatternStore<double> d(dup, 1.0);
    CHECK(separation(d, 0) == 0.0);
    CHECK_FALSE(well_separated(d, 0));

    CHECK_THROWS_AS(separation(PatternStore<double>(MatrixXd::Ones(1, 3), 1.0), 0), std::invalid_argument);

    Rng rng(7);
    PatternStore<double> s(gaussian(rng, 9, 5), 1.0);
    for (int i = 0; i < 9; ++i) {
        double best = 1e300;
        for (int j = 0; j < 9; ++j)
            if (j != i) best = std::min(best, s.patterns().row(i).dot(s.patterns().row(i)) -
                                                  s.patterns().row(i).dot(s.patterns().row(j)));
        CHECK(separation(s, i) == doctest::Approx(best).epsilon(1e-14));
    }
}

TEST_CASE("well-separated threshold")
{
    PatternStore<double> sharp(MatrixXd::Identity(4, 4), 100.0);
    // 2/400 + ln(2 * 3 * 4 * 100) / 100
    CHECK(separation_threshold(sharp) == doctest::Approx(0.005 + std::log(2400.0) / 100.0).epsilon(1e-14));
    CHECK(well_separated(sharp, 0));
    // As beta -> 0 the log term dominates and the threshold diverges to -inf.
    auto tiny = sharp.with_beta(1e-6);
    CHECK(separation_threshold(tiny) == doctest::Approx((0.5 + std::log(24e-6)) / 1e-6).epsilon(1e-12));
    CHECK(well_separated(tiny, 0));
    // beta = 1: 1/2 + ln 24 > 1.
    CHECK_FALSE(well_separated(sharp.with_beta(1.0), 0));
}

TEST_CASE("retrieval error bound")
{
    MatrixXd e = MatrixXd::Identity(2, 2);
    PatternStore<double> s(e, 4.0);
    VectorXd xi = e.row(0).transpose();
    auto at = [&](double d) { return retrieval_error_bound(s, xi, 0, std::optional<double>(d)).error_bound; };
    CHECK(at(0.1) == doctest::Approx(2.0 * std::exp(-4.0 * 0.8)).epsilon(1e-14));
    CHECK(at(0.2) == doctest::Approx(2.0 * std::exp(-4.0 * 0.6)).epsilon(1e-14));
    CHECK(at(0.1) < at(0.2));

    auto jb = retrieval_error_bound(s, xi, 0, std::optional<double>(0.1));
    CHECK(jb.jacobian_bound == doctest::Approx(2.0 * 4.0 * 2.0 * 1.0 * std::exp(-3.2)).epsilon(1e-14));
    CHECK(jb.one_update_bound == doctest::Approx(jb.jacobian_bound * 0.1).epsilon(1e-14));

    MatrixXd far(2, 1);
    far << 1000.0, -1000.0;
    PatternStore<double> wide(far, 1.0);
    CHECK(separation(wide, 0) == doctest::Approx(2e6));
    CHECK(retrieval_error_bound(wide, VectorXd::Constant(1, 1000.0), 0, std::optional<double>(0.0)).error_bound == 0.0);
}

TEST_CASE("measured retrieval error stays under the bound")
{
    Rng rng(8);
    int checked = 0;
    while (checked < 200) {
        const int k = 2 + static_cast<int>(rng.below(15));
        const int m = 2 + static_cast<int>(rng.below(63));
        PatternStore<double> s(gaussian(rng, k, m), rng.uniform(0.5, 4.0));
        const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(k)));
        if (!well_separated(s, i)) continue;
        VectorXd xi = s.patterns().row(i).transpose() + 0.05 * gaussian_vec(rng, m) / std::sqrt(m);
        auto b = retrieval_error_bound(s, xi, i);
        CHECK((retrieve(s, xi).retrieved - s.patterns().row(i).transpose()).norm() <= b.error_bound);
        ++checked;
    }
}

TEST_CASE("lambert W0")
{
    CHECK(lambert_w0(0.0) == 0.0);
    CHECK(lambert_w0(std::exp(1.0)) == doctest::Approx(1.0).epsilon(1e-15));
    const double w = lambert_w0(3.573);
    CHECK(w == doctest::Approx(1.1411).epsilon(1e-4));
    CHECK(std::abs(w * std::exp(w) - 3.573) < 1e-10);
    CHECK(lambert_w0(-1.0 / std::exp(1.0)) == doctest::Approx(-1.0).epsilon(1e-7));
    CHECK(lambert_w0(-0.2) >= -1.0);
    CHECK_THROWS_AS(lambert_w0(-0.5), std::domain_error);

    for (int j = 0; j <= 120; ++j) {
        const double x = std::pow(10.0, -6.0 + j * 0.1);
        const double v = lambert_w0(x);
        CHECK(std::abs(v * std::exp(v) - x) <= 1e-12 * std::max(1.0, x));
    }
}

TEST_CASE("lambert W0 in extended precision")
{
    using quad = boost::multiprecision::cpp_bin_float_quad;
    const quad x = 1e6;
    const quad w = lambert_w0(x);
    CHECK(static_cast<double>(abs(w * exp(w) - x)) < 1e-12);
}

TEST_CASE("capacity bound constants")
{
    auto first = capacity_bound(1.0, 3.0, 20, 0.001);
    CHECK(first.b == 2.0 * 9.0 / 5.0);
    CHECK(first.exponent > 1.27);
    CHECK(first.exponent < 1.28);
    CHECK(std::abs(first.c - 3.1546) < 1e-3);
    CHECK(std::abs(first.min_patterns - 7.4) < 0.1);
    CHECK(first.min_patterns == doctest::Approx(std::sqrt(0.001) * std::pow(first.c, 19.0 / 4.0)).epsilon(1e-14));

    auto second = capacity_bound(1.0, 1.0, 75, 0.001);
    CHECK(second.exponent < -0.94);
    CHECK(second.exponent > -0.95);
    CHECK(std::abs(second.c - 1.3718) < 1e-3);

    CHECK_THROWS(capacity_bound(1.0, 3.0, 1, 0.001));
    CHECK_THROWS(capacity_bound(1.0, 3.0, 20, 0.0));
}
