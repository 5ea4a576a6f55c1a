#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sedformer/backbone.hpp"
#include "sedformer/error.hpp"
#include "sedformer/log.hpp"
#include "support/attention_oracle.hpp"
#include "support/gradcheck.hpp"

using namespace sed;
using sed::testing::gradcheck;
using sed::testing::quadratic_attention;
using sed::testing::random_tensor;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("time embedding: zero parameters, phase, periodicity") {
    std::mt19937_64 rng(1);
    TimeEmbedding te(5, 90.0, rng);
    te.w.mutable_value().fill(0.0);
    te.omega.mutable_value().fill(0.0);
    te.phi.mutable_value().fill(0.0);
    const Tensor zero = te.at(42.0);
    for (double v : zero.data()) CHECK(v == 0.0);

    te.phi.mutable_value().fill(std::numbers::pi / 2);
    Tensor e0 = te.at(0.0);
    for (std::size_t i = 1; i < 5; ++i) CHECK(e0[i] == doctest::Approx(1.0).epsilon(1e-15));

    TimeEmbedding p(3, 90.0, rng);
    const double w0 = p.omega.value()[0], w1 = p.omega.value()[1];
    Tensor a = p.at(13.0);
    CHECK(p.at(13.0 + 2 * std::numbers::pi * 90.0 / w0)[1] == doctest::Approx(a[1]).epsilon(1e-9));
    CHECK(p.at(13.0 + 2 * std::numbers::pi * 90.0 / w1)[2] == doctest::Approx(a[2]).epsilon(1e-9));
}

TEST_CASE("embed_tokens: silence, one-hot selection, shared rows") {
    std::mt19937_64 rng(2);
    const std::size_t C = 3, d = 4, D = 2;
    TimeEmbedding te(d, 90.0, rng);
    Var E = linear_weight(C, d, rng);
    std::vector<double> t{3.0, 7.0};
    Tensor zero = embed_tokens(constant(Tensor({2, D, C}, 0.0)), t, E, te).value();
    Tensor te_rows = te.forward(t).value();
    for (std::size_t u = 0; u < 2; ++u)
        for (std::size_t dd = 0; dd < D; ++dd)
            for (std::size_t j = 0; j < d; ++j) CHECK(zero.at(u * D + dd, j) == te_rows.at(u, j));

    Tensor s({2, D, C}, 0.0);
    s[(1 * D + 0) * C + 2] = 1.0;
    s[(1 * D + 1) * C + 2] = 1.0;
    Tensor one = embed_tokens(constant(s), t, E, te).value();
    for (std::size_t j = 0; j < d; ++j) {
        CHECK(one.at(2, j) == doctest::Approx(E.value().at(2, j) + te_rows.at(1, j)));
        CHECK(one.at(2, j) == one.at(3, j));
    }
}

TEST_CASE("linear attention: constant values, single key, quadratic oracle") {
    std::mt19937_64 rng(3);
    Tensor q = random_tensor({6, 4}, rng, 0.1, 2.0), k = random_tensor({6, 4}, rng, 0.1, 2.0);
    Tensor c({6, 4});
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) c.at(i, j) = 0.5 + j;
    Tensor y = linear_attention(constant(q), constant(k), constant(c), 2, {}, 0.0).value();
    CHECK(max_abs_diff(y, c) < 1e-12);

    Tensor single = linear_attention(constant(Tensor::matrix({{0.3, 1.1}})), constant(Tensor::matrix({{0.7, 0.2}})),
                                     constant(Tensor::matrix({{-1.5, 4.0}})), 1, {}, 0.0)
                        .value();
    CHECK(single.at(0, 0) == doctest::Approx(-1.5).epsilon(1e-14));
    CHECK(single.at(0, 1) == doctest::Approx(4.0).epsilon(1e-14));

    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> lens{5 * 3, 2 * 3, 7 * 3};
        auto rows = Segments::from_lengths(lens);
        Tensor pq = random_tensor({42, 8}, rng, 0.0, 3.0), pk = random_tensor({42, 8}, rng, 0.0, 3.0);
        Tensor v = random_tensor({42, 8}, rng);
        Tensor fast = linear_attention(constant(pq), constant(pk), constant(v), 2, rows).value();
        CHECK(max_abs_diff(fast, quadratic_attention(pq, pk, v, 2, rows)) <= 1e-10);
    }
}

TEST_CASE("sed attention: features are positive, forward matches oracle, cost is linear") {
    std::mt19937_64 rng(4);
    const std::size_t d = 8, D = 3;
    SedAttention attn(d, 2, neuron::EaLifConfig::with_tau(2.0), 0.1, rng);
    const std::size_t K = 5;
    Tensor x = random_tensor({K * D, d}, rng);
    std::vector<double> dt{0.0, 1.0, 4.0, 0.5, 2.0};
    auto steps = Segments::single(K);
    auto f = attn.features(constant(x), dt, steps, NormMode::train);
    for (double v : f.phi_q.value().data()) CHECK(v > 0.0);
    for (double v : f.phi_k.value().data()) CHECK(v > 0.0);

    Var out = attn.forward(constant(x), dt, steps, NormMode::eval);
    auto fe = attn.features(constant(x), dt, steps, NormMode::eval);
    Tensor ref = quadratic_attention(fe.phi_q.value(), fe.phi_k.value(), fe.v_tilde.value(), 2,
                                     token_rows(steps, D));
    Tensor expect = ops::matmul(constant(ref), attn.w_o).value();
    CHECK(max_abs_diff(out.value(), expect) <= 1e-10);

    auto macs_for = [&](std::size_t steps_n) {
        Tensor xi = random_tensor({steps_n * D, d}, rng);
        std::vector<double> g(steps_n, 1.0);
        reset_mac_count();
        attn.forward(constant(xi), g, Segments::single(steps_n), NormMode::eval);
        return static_cast<double>(mac_count());
    };
    const double r = macs_for(64) / macs_for(16);
    CHECK(r == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("block: zero output layers give the identity; attention is global") {
    std::mt19937_64 rng(5);
    BlockConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    Block block(cfg, rng);
    const std::size_t K = 4, D = 2;
    Tensor x = random_tensor({K * D, 8}, rng);
    std::vector<double> dt{0.0, 1.0, 1.0, 3.0};
    auto steps = Segments::single(K);

    Block zeroed(cfg, rng);
    zeroed.attention.w_o.mutable_value().fill(0.0);
    zeroed.w2.mutable_value().fill(0.0);
    CHECK(zeroed.forward(constant(x), dt, steps, NormMode::train).value() == x);

    Tensor base = block.forward(constant(x), dt, steps, NormMode::eval).value();
    Tensor x2 = x;
    x2.at(K * D - 1, 3) += 1.0;
    Tensor moved = block.forward(constant(x2), dt, steps, NormMode::eval).value();
    for (std::size_t r = 0; r + 1 < K * D; ++r) {
        double diff = 0.0;
        for (std::size_t j = 0; j < 8; ++j) diff += std::abs(moved.at(r, j) - base.at(r, j));
        CHECK(diff > 0.0);
    }
}

TEST_CASE("block: gradients for every parameter") {
    std::mt19937_64 rng(6);
    BlockConfig cfg;
    cfg.dim = 4;
    cfg.heads = 2;
    Block block(cfg, rng);
    std::vector<std::size_t> lens{3, 2};
    auto steps = Segments::from_lengths(lens);
    auto x = parameter(random_tensor({10, 4}, rng));
    std::vector<double> dt{0.0, 0.7, 2.0, 0.0, 1.5};
    auto w = constant(random_tensor({10, 4}, rng));
    auto params = block.parameters();
    params.push_back(x);
    auto res = gradcheck([&] { return ops::sum(ops::mul(block.forward(x, dt, steps, NormMode::train), w)); },
                         params);
    CHECK_MESSAGE(res.ok, res.detail);
}

TEST_CASE("masked time aggregation: mean, single step, masking, empty variate") {
    std::mt19937_64 rng(7);
    Tensor x = random_tensor({6, 3}, rng);  // K'=3, D=2
    Tensor all({3, 2}, 1.0);
    Tensor z = masked_time_aggregation(constant(x), all, {}).value();
    CHECK(z.shape() == Shape{2, 3});
    for (std::size_t d = 0; d < 2; ++d)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(z.at(d, j) == doctest::Approx((x.at(d, j) + x.at(2 + d, j) + x.at(4 + d, j)) / 3.0));

    Tensor m = Tensor::matrix({{0, 1}, {1, 1}, {0, 0}});
    Tensor zm = masked_time_aggregation(constant(x), m, {}).value();
    for (std::size_t j = 0; j < 3; ++j) CHECK(zm.at(0, j) == x.at(2, j));

    Tensor junk = x;
    junk.at(0, 0) = 1e6;
    junk.at(5, 2) = -1e6;
    CHECK(masked_time_aggregation(constant(junk), m, {}).value() == zm);

    WarningCapture cap;
    Tensor none = Tensor::matrix({{1, 0}, {1, 0}, {0, 0}});
    Tensor ze = masked_time_aggregation(constant(x), none, {}).value();
    CHECK(cap.contains("no observed"));
    for (std::size_t j = 0; j < 3; ++j) CHECK(ze.at(1, j) == 0.0);
}
