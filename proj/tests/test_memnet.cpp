#include <doctest.h>

#include <cmath>
#include <set>

#include "helm/memnet/memory.hpp"
#include "helm/memnet/pretrain.hpp"
#include "support/models.hpp"

using namespace helm;
using namespace helm::memnet;
using testing::full_forward;
using testing::random_inputs;
using testing::scrambled_model;

namespace {

MemoryModelConfig small_config(int layers = 2, int memory_len = 8)
{
    MemoryModelConfig c;
    c.vocab = 16;
    c.dim = 8;
    c.layers = layers;
    c.heads = 2;
    c.ff = 16;
    c.memory_len = memory_len;
    return c;
}

std::vector<RowVector> stream(const TransformerLM& model, const Matrix& inputs)
{
    MemoryState s = model.initial_state();
    std::vector<RowVector> out;
    for (Eigen::Index t = 0; t < inputs.rows(); ++t) out.push_back(model.step(s, inputs.row(t)));
    return out;
}

}  // namespace

TEST_CASE("config validation")
{
    MemoryModelConfig c = small_config();
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.memory_len = 0;
    CHECK_THROWS_AS(TransformerLM(c, 1), std::invalid_argument);
}

TEST_CASE("first step equals a length-one forward pass")
{
    auto model = scrambled_model(small_config(), 1);
    Rng rng(1);
    Matrix x = random_inputs(rng, 1, 8);
    MemoryState s = model.initial_state();
    RowVector h = model.step(s, x.row(0));
    CHECK((h - full_forward(model, x).row(0)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.steps == 1);
}

TEST_CASE("streaming matches the full causal pass")
{
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        auto model = scrambled_model(small_config(1 + trial % 3, 8), 100 + trial);
        const int T = 1 + static_cast<int>(rng.below(8));
        Matrix x = random_inputs(rng, T, 8);
        Matrix full = full_forward(model, x);
        auto steps = stream(model, x);
        Matrix enc = model.encode(x);
        for (int t = 0; t < T; ++t) {
            CHECK((steps[static_cast<std::size_t>(t)] - full.row(t)).cwiseAbs().maxCoeff() < 1e-8);
            CHECK((enc.row(t) - full.row(t)).cwiseAbs().maxCoeff() < 1e-8);
        }
    }
}

TEST_CASE("step rejects a wrong input dimension")
{
    TransformerLM model(small_config(), 3);
    MemoryState s = model.initial_state();
    CHECK_THROWS_AS(model.step(s, RowVector::Zero(7)), std::invalid_argument);
}

TEST_CASE("different seeds give different weights")
{
    TransformerLM a(small_config(), 1), b(small_config(), 2);
    CHECK(a.digest() != b.digest());
    Rng rng(3);
    Matrix x = random_inputs(rng, 3, 8);
    CHECK((a.encode(x) - b.encode(x)).norm() > 1e-6);
}

TEST_CASE("outputs are causal")
{
    auto model = scrambled_model(small_config(), 4);
    Rng rng(4);
    Matrix x = random_inputs(rng, 8, 8);
    Matrix base = model.encode(x);
    for (int t = 0; t < 7; ++t) {
        Matrix y = x;
        y.bottomRows(7 - t) = random_inputs(rng, 7 - t, 8);
        Matrix out = model.encode(y);
        CHECK((out.topRows(t + 1) - base.topRows(t + 1)).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("register length bounds how far back a step can see")
{
    Rng rng(5);
    const int L = 5;
    for (int layers : {1, 2}) {
        CAPTURE(layers);
        auto model = scrambled_model(small_config(layers, L), 50 + static_cast<std::uint64_t>(layers));
        // Each layer caches its own inputs for L-1 steps, so influence reaches
        // back layers * (L-1) steps before it is gone.
        const int reach = layers * (L - 1);
        const int T = reach + 6;
        Matrix x = random_inputs(rng, T, 8);
        Matrix y = x;
        y.row(0) = random_inputs(rng, 1, 8);
        auto hx = stream(model, x), hy = stream(model, y);
        for (int t = 0; t < T; ++t) {
            const double diff = (hx[static_cast<std::size_t>(t)] - hy[static_cast<std::size_t>(t)]).cwiseAbs().maxCoeff();
            if (t > reach)
                CHECK(diff == 0.0);
            else if (t <= L - 1)
                CHECK(diff > 0.0);
        }
    }
}

TEST_CASE("register never exceeds L - 1 entries")
{
    TransformerLM model(small_config(2, 4), 6);
    MemoryState s = model.initial_state();
    Rng rng(6);
    for (int t = 0; t < 20; ++t) {
        model.step(s, random_inputs(rng, 1, 8).row(0));
        for (const auto& l : s.layers) {
            CHECK(l.activations.size() <= 3);
            CHECK(l.keys.size() == l.activations.size());
        }
    }
    CHECK(s.steps == 20);
}

TEST_CASE("attention maps")
{
    auto model = scrambled_model(small_config(2, 8), 7);
    Rng rng(7);
    auto maps = attention_maps(model, random_inputs(rng, 6, 8));
    REQUIRE(maps.size() == 2);
    REQUIRE(maps[0].size() == 2);
    for (const auto& layer : maps)
        for (const Matrix& m : layer) {
            CHECK(m.rows() == 6);
            for (int r = 0; r < 6; ++r) {
                CHECK(std::abs(m.row(r).sum() - 1.0) < 1e-9);
                for (int c = r + 1; c < 6; ++c) CHECK(m(r, c) == 0.0);
            }
        }
    auto one = attention_maps(model, random_inputs(rng, 1, 8));
    CHECK(one[1][1].rows() == 1);
    CHECK(one[1][1](0, 0) == 1.0);
    CHECK_THROWS_AS(attention_maps(model, random_inputs(rng, 9, 8)), std::invalid_argument);
}

TEST_CASE("checkpoint round-trip restores the model")
{
    auto model = scrambled_model(small_config(), 8);
    auto arrays = model.to_arrays();
    auto cfg = TransformerLM::config_from_arrays(arrays);
    CHECK(cfg.layers == 2);
    CHECK(cfg.memory_len == 8);
    TransformerLM copy(cfg, 999);
    copy.load(arrays);
    CHECK(copy.digest() == model.digest());
}

TEST_CASE("memory kinds")
{
    CHECK(parse_memory_kind("frozen-random") == MemoryKind::frozen_random);
    CHECK(to_string(MemoryKind::positional) == "positional");
    CHECK_THROWS_AS(parse_memory_kind("lstm"), std::invalid_argument);
    CHECK_THROWS_AS(make_memory(MemoryKind::pretrained, small_config(), 1), std::invalid_argument);

    Rng rng(9);
    RowVector x = random_inputs(rng, 1, 8).row(0);

    SUBCASE("noise memory is reproducible and input independent")
    {
        auto mem = make_memory(MemoryKind::noise, small_config(), 1);
        auto a = mem->initial_state(42), b = mem->initial_state(42), c = mem->initial_state(43);
        RowVector h1 = mem->step(a, x), h2 = mem->step(b, RowVector::Zero(8)), h3 = mem->step(c, x);
        CHECK(h1 == h2);
        CHECK(h1 != h3);
        CHECK(mem->step(a, x) != h1);
    }
    SUBCASE("positional memory is distinct over a long horizon")
    {
        auto mem = make_memory(MemoryKind::positional, MemoryModelConfig{}, 1);
        auto s = mem->initial_state(0);
        std::vector<RowVector> seen;
        for (int t = 0; t < 10000; ++t) seen.push_back(mem->step(s, RowVector::Zero(32)));
        std::sort(seen.begin(), seen.end(), [](const RowVector& a, const RowVector& b) {
            return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
        });
        for (std::size_t i = 1; i < seen.size(); ++i) CHECK((seen[i] - seen[i - 1]).norm() > 1e-9);
        CHECK(sinusoidal_embedding(0, 4) == RowVector((RowVector(4) << 0, 1, 0, 1).finished()));
    }
    SUBCASE("frozen-random memory is a seeded transformer")
    {
        auto a = make_memory(MemoryKind::frozen_random, small_config(), 5);
        auto b = make_memory(MemoryKind::frozen_random, small_config(), 5);
        REQUIRE(a->transformer() != nullptr);
        CHECK(a->digest() == b->digest());
        auto sa = a->initial_state(0);
        CHECK(a->step(sa, x).size() == 8);
    }
}

TEST_CASE("corpora")
{
    auto cyc = cyclic_corpus(8, 20);
    CHECK(cyc[9] == 1);
    auto chain = random_markov_chain(6, 3, 1);
    for (int i = 0; i < 6; ++i) {
        CHECK(std::abs(chain.transition.row(i).sum() - 1.0) < 1e-12);
        CHECK((chain.transition.row(i).array() > 0.0).count() == 3);
    }
    Eigen::VectorXd pi = chain.stationary();
    CHECK((pi.transpose() * chain.transition - pi.transpose()).norm() < 1e-12);

    MarkovChain det;
    det.transition = Matrix::Zero(3, 3);
    det.transition(0, 1) = det.transition(1, 2) = det.transition(2, 0) = 1.0;
    CHECK(det.entropy_rate() == 0.0);
    MarkovChain uni;
    uni.transition = Matrix::Constant(4, 4, 0.25);
    CHECK(uni.entropy_rate() == doctest::Approx(std::log(4.0)));

    auto text = synthetic_corpus(32, 5000, 3);
    CHECK(text.size() == 5000);
    CHECK(*std::max_element(text.begin(), text.end()) < 32);
    CHECK(synthetic_corpus(32, 5000, 3) == text);
}

TEST_CASE("pretraining")
{
    MemoryModelConfig cfg = small_config(1, 8);
    cfg.vocab = 8;
    TransformerLM model(cfg, 1);
    const auto before = model.digest();
    PretrainConfig pc;
    pc.steps = 0;
    pc.seq_len = 8;
    pretrain_clm(model, cyclic_corpus(8, 200), {}, pc);
    CHECK(model.digest() == before);

    CHECK_THROWS_AS(pretrain_clm(model, std::vector<int>{0, 1, 8, 2, 3, 4, 5, 6, 7, 0}, {}, pc), std::out_of_range);

    pc.steps = 300;
    auto report = pretrain_clm(model, cyclic_corpus(8, 400), cyclic_corpus(8, 65), pc);
    CHECK(report.final_loss < report.initial_loss);
    CHECK(std::exp(report.final_loss) < 1.2);
}
