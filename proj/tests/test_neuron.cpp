#include <doctest.h>

#include <cmath>
#include <random>

#include "sedformer/error.hpp"
#include "sedformer/neuron.hpp"
#include "support/gradcheck.hpp"

using namespace sed;
using namespace sed::neuron;
using sed::testing::gradcheck;
using sed::testing::random_tensor;

TEST_CASE("lif_step: resting state, hand evaluation, IF reduction") {
    LifConfig cfg;
    auto r0 = lif_step(NeuronState::zeros({1}), Tensor::vector({0.0}), cfg);
    CHECK(r0.m[0] == 0.0);
    CHECK(r0.s[0] == 0.0);
    CHECK(r0.v[0] == 0.0);

    cfg.alpha = 0.5;
    auto r1 = lif_step(NeuronState{Tensor::vector({1.0})}, Tensor::vector({1.0}), cfg);
    CHECK(r1.m[0] == 1.0);
    CHECK(r1.s[0] == 1.0);
    CHECK(r1.v[0] == 0.0);

    cfg.alpha = 0.0;
    auto r2 = lif_step(NeuronState{Tensor::vector({7.0, -3.0})}, Tensor::vector({0.4, 0.2}), cfg);
    CHECK(r2.m[0] == 0.4);
    CHECK(r2.m[1] == 0.2);

    cfg.alpha = 1.0;
    CHECK_THROWS_AS(lif_step(NeuronState::zeros({1}), Tensor::vector({0.0}), cfg), ConfigError);
}

TEST_CASE("ealif_leak: zero gap, half-life, long-gap forgetting") {
    const double eta2 = EaLifConfig::with_tau(2.0).eta;
    CHECK(sed::softplus(eta2) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ealif_leak(0.0, eta2) == 1.0);
    CHECK(ealif_leak(2.0 * std::log(2.0), eta2) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(ealif_leak(200.0, eta2) < 1e-43);
    CHECK_THROWS_AS(ealif_leak(-1.0, eta2), DataError);
    CHECK_THROWS_AS(EaLifConfig::with_tau(1.0), ConfigError);
}

TEST_CASE("ealif_leak: strictly decreasing in dt, increasing in tau") {
    for (double tau : {1.5, 2.0, 3.0, 4.0}) {
        const double eta = EaLifConfig::with_tau(tau).eta;
        double prev = 2.0;
        for (double dt = 0.0; dt < 20.0; dt += 0.25) {
            const double b = ealif_leak(dt, eta);
            CHECK(b < prev);
            prev = b;
        }
    }
    for (double dt : {0.5, 1.0, 5.0}) {
        double prev = -1.0;
        for (double tau : {1.1, 1.5, 2.0, 3.0, 8.0}) {
            const double b = ealif_leak(dt, EaLifConfig::with_tau(tau).eta);
            CHECK(b > prev);
            prev = b;
        }
    }
}

TEST_CASE("ealif_step: hand evaluation and resting input") {
    // beta = 0.5 via tau = 2, dt = 2 ln 2
    auto cfg = EaLifConfig::with_tau(2.0);
    auto r = ealif_step(NeuronState::zeros({1}), Tensor::vector({2.0}), 2.0 * std::log(2.0), cfg);
    CHECK(r.m[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.s[0] == 1.0);
    CHECK(r.v[0] == doctest::Approx(0.0));

    auto z = ealif_step(NeuronState::zeros({1}), Tensor::vector({0.0}), 3.0, cfg);
    CHECK(z.m[0] == 0.0);
    CHECK(z.s[0] == 0.0);
    CHECK(z.v[0] == 0.0);
}

TEST_CASE("ealif_step: uniform gaps reproduce vanilla LIF") {
    std::mt19937_64 rng(42);
    const double delta = 0.7;
    auto ea = EaLifConfig::with_tau(2.5);
    LifConfig lif{std::exp(-delta / ea.tau()), ea.v_th, ea.alpha_ste};
    NeuronState a = NeuronState::zeros({4}), b = NeuronState::zeros({4});
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        Tensor x = random_tensor({4}, rng, -1.0, 3.0);
        auto ra = ealif_step(a, x, delta, ea);
        auto rb = lif_step(b, x, lif);
        for (std::size_t i = 0; i < 4; ++i) {
            worst = std::max(worst, std::abs(ra.m[i] - rb.m[i]));
            worst = std::max(worst, std::abs(ra.v[i] - rb.v[i]));
            CHECK(ra.s[i] == rb.s[i]);
        }
        a.v = ra.v;
        b.v = rb.v;
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("surrogate heaviside: boundary fires, surrogate slope, saturation") {
    auto u = parameter(Tensor::vector({0.0, -0.3, 0.2}));
    auto s = surrogate_heaviside(u, 4.0);
    CHECK(s.value()[0] == 1.0);
    CHECK(s.value()[1] == 0.0);
    CHECK(s.value()[2] == 1.0);
    backward(ops::sum(s));
    CHECK(u.grad()[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(surrogate_grad(50.0, 4.0) < 1e-80);
    CHECK(surrogate_grad(-50.0, 4.0) < 1e-80);
}

TEST_CASE("surrogate heaviside: smooth forward agrees with surrogate backward") {
    std::mt19937_64 rng(1);
    auto u = parameter(random_tensor({8}, rng, -2.0, 2.0));
    auto res = gradcheck([&] { return ops::sum(surrogate_heaviside(u, 4.0, SpikeMode::smooth)); }, {u});
    CHECK_MESSAGE(res.ok, res.detail);
}

TEST_CASE("spike scan: matches step-by-step EA-LIF and stays binary") {
    std::mt19937_64 rng(9);
    auto cfg = EaLifConfig::with_tau(2.0);
    const std::size_t K = 30, N = 5;
    Tensor I = random_tensor({K, N}, rng, -1.0, 3.0);
    std::vector<double> dt(K);
    std::uniform_real_distribution<double> gap(0.0, 3.0);
    for (std::size_t k = 1; k < K; ++k) dt[k] = gap(rng);

    EaLifNeuron neuron(cfg);
    Tensor spikes = neuron.spikes(constant(I), dt, SpikeMode::hard).value();

    NeuronState st = NeuronState::zeros({N});
    for (std::size_t k = 0; k < K; ++k) {
        Tensor row({N});
        for (std::size_t j = 0; j < N; ++j) row[j] = I.at(k, j);
        auto r = ealif_step(st, row, dt[k], cfg);
        for (std::size_t j = 0; j < N; ++j) {
            CHECK(spikes.at(k, j) == r.s[j]);
            CHECK((r.s[j] == 0.0 || r.s[j] == 1.0));
            // reset soundness
            CHECK(r.v[j] == doctest::Approx(r.m[j] - cfg.v_th * r.s[j]));
            if (r.s[j] == 1.0 && r.m[j] < 2.0 * cfg.v_th) CHECK(r.v[j] < cfg.v_th);
        }
        st.v = r.v;
    }
}

TEST_CASE("spike scan: first event current is zeroed when its gap is zero") {
    EaLifNeuron neuron(EaLifConfig::with_tau(2.0));
    std::vector<double> dt{0.0, 1.0};
    Tensor s = neuron.spikes(constant(Tensor::matrix({{100.0}, {0.0}})), dt, SpikeMode::hard).value();
    CHECK(s[0] == 0.0);
    // the median convention gives the first event a real gap
    auto gaps = inter_event_gaps(std::vector<double>{1.0, 2.0, 4.0, 5.0}, {}, FirstGap::median);
    CHECK(gaps[0] == 1.0);
    CHECK(gaps[2] == 2.0);
    CHECK(inter_event_gaps(std::vector<double>{1.0, 2.0}, {})[0] == 0.0);
}

TEST_CASE("spike scan: BPTT matches finite differences in smooth mode") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 4; ++trial) {
        EaLifNeuron neuron(EaLifConfig::with_tau(1.5 + trial * 0.5));
        auto I = parameter(random_tensor({7, 3}, rng, -1.0, 3.0));
        std::vector<double> dt{0.0, 0.5, 1.2, 0.1, 3.0, 0.7, 0.2};
        auto w = constant(random_tensor({7, 3}, rng));
        Segments seg{{0, 3, 7}};
        auto res = gradcheck(
            [&] { return ops::sum(ops::mul(neuron.spikes(I, dt, SpikeMode::smooth, seg), w)); },
            {I, neuron.eta});
        CHECK_MESSAGE(res.ok, res.detail);
    }
}

TEST_CASE("ealif_filter: zero input, memoryless limit, single event") {
    auto eta = parameter(Tensor::scalar(EaLifConfig::with_tau(2.0).eta));
    std::vector<double> dt{0.0, 1.0, 2.0};
    Tensor zeros({3, 2, 4}, 0.0);
    const Tensor squashed = ealif_filter(constant(zeros), dt, eta, Squash::with_softplus).value();
    for (double v : squashed.data()) CHECK(v == doctest::Approx(std::log(2.0)));
    const Tensor raw = ealif_filter(constant(zeros), dt, eta, Squash::without).value();
    for (double v : raw.data()) CHECK(v == 0.0);

    std::vector<double> huge{1e6, 1e6, 1e6};
    Tensor x = Tensor::matrix({{0.3}, {-1.2}, {2.0}});
    Tensor out = ealif_filter(constant(x), huge, eta, Squash::with_softplus).value();
    for (std::size_t i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(sed::softplus(x[i])).epsilon(1e-12));

    std::vector<double> one{0.0};
    Tensor single = ealif_filter(constant(Tensor::matrix({{5.0}})), one, eta, Squash::with_softplus).value();
    CHECK(single[0] == doctest::Approx(std::log(2.0)));

    CHECK_THROWS_AS(ealif_filter(constant(x), std::vector<double>{0.0, 1.0}, eta, Squash::without), DataError);
}

TEST_CASE("ealif_filter: gradients w.r.t. input and eta") {
    std::mt19937_64 rng(5);
    auto eta = parameter(Tensor::scalar(0.3));
    auto x = parameter(random_tensor({6, 4}, rng));
    std::vector<double> dt{0.0, 0.4, 2.0, 0.0, 0.9, 1.5};
    auto w = constant(random_tensor({6, 4}, rng));
    for (auto squash : {Squash::with_softplus, Squash::without}) {
        auto res = gradcheck(
            [&] { return ops::sum(ops::mul(ealif_filter(x, dt, eta, squash, Segments{{0, 2, 6}}), w)); },
            {x, eta});
        CHECK_MESSAGE(res.ok, res.detail);
    }
}
