#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "helm/ndiff/checkpoint.hpp"
#include "helm/ndiff/optim.hpp"
#include "helm/ndiff/tape.hpp"
#include "support/primitive_graphs.hpp"

using namespace helm;
using nd::Matrix;

TEST_CASE("softmax of equal logits is uniform")
{
    nd::Tape t;
    Matrix z = Matrix::Zero(1, 3);
    Matrix y = nd::softmax_rows(t.constant(z)).value();
    for (int j = 0; j < 3; ++j) CHECK(y(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax rows are probability vectors")
{
    Rng rng(3);
    nd::Tape t;
    Matrix y = nd::softmax_rows(t.constant(testing::random_matrix(rng, 20, 7, 10.0))).value();
    CHECK((y.array() >= 0.0).all());
    for (Eigen::Index r = 0; r < y.rows(); ++r) CHECK(std::abs(y.row(r).sum() - 1.0) < 1e-12);
}

TEST_CASE("identity matmul")
{
    Rng rng(1);
    nd::Tape t;
    Matrix a = testing::random_matrix(rng, 3, 5);
    Matrix y = nd::matmul(t.constant(Matrix::Identity(3, 3)), t.constant(a)).value();
    CHECK(y == a);
}

TEST_CASE("layer norm standardizes")
{
    nd::Tape t;
    Matrix x(1, 3);
    x << 1, 2, 3;
    Matrix y = nd::layer_norm_rows(t.constant(x), 0.0).value();
    CHECK(std::abs(y.mean()) < 1e-15);
    CHECK(y.array().square().mean() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(y(0, 0) == doctest::Approx(-std::sqrt(1.5)).epsilon(1e-14));
}

TEST_CASE("shape mismatch names the primitive and both shapes")
{
    nd::Tape t;
    auto a = t.constant(Matrix::Zero(2, 3));
    auto b = t.constant(Matrix::Zero(4, 5));
    try {
        nd::matmul(a, b);
        FAIL("expected a shape error");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("matmul") != std::string::npos);
        CHECK(msg.find("(2x3)") != std::string::npos);
        CHECK(msg.find("(4x5)") != std::string::npos);
    }
    CHECK_THROWS_AS(nd::add(a, b), std::invalid_argument);
}

TEST_CASE("backward preconditions")
{
    nd::Tape t;
    CHECK_THROWS_AS(t.backward(nd::Var{}), std::exception);
    auto x = t.constant(Matrix::Ones(2, 2));
    CHECK_THROWS_AS(t.grad(x), std::logic_error);
    CHECK_THROWS_AS(t.backward(x), std::exception);  // non-scalar without seed
}

TEST_CASE("gradient of sum is all ones")
{
    nd::Tape t;
    auto x = t.constant(Matrix::Random(3, 4));
    t.backward(nd::sum(x));
    CHECK(t.grad(x) == Matrix::Ones(3, 4));
}

TEST_CASE("softmax cross-entropy gradient at uniform logits")
{
    nd::Tape t;
    auto z = t.constant(Matrix::Zero(1, 4));
    const std::vector<int> target{2};
    t.backward(nd::cross_entropy(z, target));
    Matrix expected = Matrix::Constant(1, 4, 0.25);
    expected(0, 2) -= 1.0;
    CHECK((t.grad(z) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("every primitive matches central differences")
{
    Rng rng(20240611);
    for (const auto& c : testing::primitive_cases()) {
        CAPTURE(c.name);
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) worst = std::max(worst, testing::max_grad_error(c.graph, c.inputs(rng)));
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("composite graph matches central differences")
{
    Rng rng(5);
    testing::Graph g = [](nd::Tape&, std::span<const nd::Var> x) {
        auto h = nd::tanh(nd::add(nd::matmul(x[0], x[1]), x[2]));
        auto n = nd::layer_norm_rows(h);
        auto p = nd::softmax_rows(nd::matmul(n, nd::transpose(x[1])));
        return nd::mean(nd::log(nd::add_scalar(p, 1e-3)));
    };
    for (int trial = 0; trial < 5; ++trial) {
        auto err = testing::max_grad_error(
            g, {testing::random_matrix(rng, 4, 3), testing::random_matrix(rng, 3, 5), testing::random_matrix(rng, 1, 5)});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("forward is bit-deterministic")
{
    auto run = [] {
        Rng rng(9);
        nd::Tape t;
        auto x = t.constant(testing::random_matrix(rng, 5, 5));
        return nd::softmax_rows(nd::layer_norm_rows(nd::matmul(x, x))).value();
    };
    CHECK(run() == run());
}

TEST_CASE("parameter gradients accumulate through the tape")
{
    nd::ParameterSet ps;
    auto i = ps.add("w", Matrix::Constant(1, 2, 3.0));
    nd::Tape t;
    auto w = t.param(ps[i]);
    t.backward(nd::sum(nd::square(w)));
    CHECK(ps[i].grad == Matrix::Constant(1, 2, 6.0));
}

namespace {

// Hand-rolled scalar AdamW.
struct ScalarAdamW {
    double lr, b1, b2, eps, wd;
    double m = 0, v = 0;
    int t = 0;
    double step(double p, double g)
    {
        ++t;
        p -= lr * wd * p;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        return p - lr * mh / (std::sqrt(vh) + eps);
    }
};

}  // namespace

TEST_CASE("adamw matches a scalar reference trajectory")
{
    nd::ParameterSet ps;
    auto i = ps.add("p", Matrix::Constant(1, 1, 0.7));
    nd::AdamWConfig cfg{1e-2, 0.9, 0.999, 1e-8, 1e-2};
    auto st = nd::make_optimizer_state(ps, cfg);
    ScalarAdamW ref{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
    double p = 0.7;
    for (int k = 0; k < 50; ++k) {
        ps[i].grad = Matrix::Constant(1, 1, 0.3);
        nd::adamw_step(ps, st);
        p = ref.step(p, 0.3);
        CHECK(std::abs(ps[i].value(0, 0) - p) < 1e-10);
    }
    CHECK(st.step == 50);
}

TEST_CASE("adamw edge cases")
{
    nd::ParameterSet ps;
    auto i = ps.add("p", Matrix::Constant(2, 2, 1.5));
    SUBCASE("zero gradient and zero decay leaves parameters unchanged")
    {
        auto st = nd::make_optimizer_state(ps, {1e-3, 0.9, 0.999, 1e-8, 0.0});
        ps.zero_grad();
        nd::adamw_step(ps, st);
        CHECK(ps[i].value == Matrix::Constant(2, 2, 1.5));
    }
    SUBCASE("decay shrinks by 1 - lr * lambda per step")
    {
        auto st = nd::make_optimizer_state(ps, {0.1, 0.9, 0.999, 1e-8, 0.5});
        for (int k = 1; k <= 3; ++k) {
            ps.zero_grad();
            nd::adamw_step(ps, st);
            CHECK(ps[i].value(0, 0) == doctest::Approx(1.5 * std::pow(0.95, k)).epsilon(1e-14));
        }
    }
    SUBCASE("non-finite gradient names the parameter")
    {
        auto st = nd::make_optimizer_state(ps, {});
        ps[i].grad(1, 1) = std::nan("");
        try {
            nd::adamw_step(ps, st);
            FAIL("expected an error");
        } catch (const std::domain_error& e) {
            CHECK(std::string(e.what()).find("p") != std::string::npos);
        }
    }
    SUBCASE("frozen parameters are skipped")
    {
        ps[i].trainable = false;
        auto st = nd::make_optimizer_state(ps, {1.0, 0.9, 0.999, 1e-8, 0.5});
        ps[i].grad.setOnes();
        nd::adamw_step(ps, st);
        CHECK(ps[i].value == Matrix::Constant(2, 2, 1.5));
    }
}

TEST_CASE("clip_grad_norm")
{
    nd::ParameterSet ps;
    auto i = ps.add("g", Matrix::Zero(1, 2));
    ps[i].grad << 3, 4;
    CHECK(nd::clip_grad_norm(ps, 0.5) == doctest::Approx(5.0));
    CHECK(ps[i].grad(0, 0) == doctest::Approx(0.3));
    CHECK(ps[i].grad(0, 1) == doctest::Approx(0.4));
    CHECK(nd::grad_norm(ps) <= 0.5 + 1e-12);

    ps[i].grad << 0.18, 0.24;
    nd::clip_grad_norm(ps, 0.5);
    CHECK(ps[i].grad(0, 0) == 0.18);

    ps[i].grad.setZero();
    nd::clip_grad_norm(ps, 0.5);
    CHECK(ps[i].grad.isZero(0.0));

    Rng rng(2);
    for (int k = 0; k < 100; ++k) {
        ps[i].grad = testing::random_matrix(rng, 1, 2, 10.0);
        nd::clip_grad_norm(ps, 0.5);
        CHECK(nd::grad_norm(ps) <= 0.5 + 1e-12);
    }
}

TEST_CASE("checkpoint round-trip is bit-exact")
{
    Rng rng(4);
    std::vector<nd::NamedArray> arrays{nd::to_named_array("a.weights", testing::random_matrix(rng, 3, 7)),
                                       nd::scalar_array("beta", 100.0),
                                       nd::to_named_array("tiny", Matrix::Constant(1, 1, 5e-324))};
    auto bytes = nd::encode_checkpoint(arrays);
    CHECK(bytes[0] == 'H');
    CHECK(bytes[3] == 'M');
    CHECK(nd::decode_checkpoint(bytes) == arrays);

    auto path = std::filesystem::temp_directory_path() / "helm_ckpt_roundtrip.bin";
    nd::write_checkpoint(path, arrays);
    CHECK(nd::read_checkpoint(path) == arrays);
    std::filesystem::remove(path);

    bytes[0] = 'X';
    CHECK_THROWS(nd::decode_checkpoint(bytes));
}

TEST_CASE("parameter digest tracks values")
{
    nd::ParameterSet ps;
    ps.add("w", Matrix::Ones(2, 2));
    const auto d0 = ps.digest();
    CHECK(d0.size() == 64);
    ps.at("w").grad.setConstant(3.0);
    CHECK(ps.digest() == d0);
    ps.at("w").value(0, 0) = 2.0;
    CHECK(ps.digest() != d0);
}
