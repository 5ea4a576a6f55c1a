#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sedformer/backbone.hpp"
#include "sedformer/downsample.hpp"
#include "sedformer/encoder.hpp"
#include "sedformer/window.hpp"

namespace sed {

struct ModelConfig {
    std::size_t variates = 1;
    std::size_t channels = 8;
    std::size_t kernel = 3;
    std::size_t stride = 4;
    std::size_t dim = 32;
    std::size_t heads = 4;
    std::size_t blocks = 2;
    double tau = 2.0;
    double v_th = 1.0;
    double alpha_ste = 4.0;
    double span = 90.0;
    double bn_momentum = 0.1;
    bool shared_time_embedding = true;
    neuron::FirstGap first_gap = neuron::FirstGap::zero;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// x = MLP(z ⊕ TE(q)), widths 2d -> 2d -> relu -> 2d -> relu -> 1.
class Decoder {
public:
    Decoder(std::size_t dim, std::mt19937_64& rng);

    // summary and time rows are both [Q x dim]; returns [Q x 1].
    Var forward(const Var& summary, const Var& query_time) const;
    std::vector<Var> parameters() const { return {w1, b1, w2, b2, w3, b3}; }

    Var w1, b1, w2, b2, w3, b3;
};

struct ForwardResult {
    Var predictions;             // [Q x 1], queries in batch order
    std::vector<double> truths;
    std::vector<std::size_t> window_of;
    std::vector<std::size_t> variate_of;
    Var spikes;                  // encoder output [sum K x D x C]
    PooledSeries pooled;
    std::size_t events = 0;        // sum K
    std::size_t observations = 0;  // observed (event, variate) pairs
    std::size_t dropped = 0;       // events lost to the pooling remainder
};

class Model {
    // Declared first: every member below draws its initial values from it.
    std::mt19937_64 rng_;

public:
    Model(const ModelConfig& cfg, std::uint64_t seed);
    // Copies would share parameter nodes.
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    ForwardResult forward(std::span<const ForecastWindow> batch, NormMode norm,
                          neuron::SpikeMode mode = neuron::SpikeMode::hard);

    const ModelConfig& config() const { return cfg_; }
    std::vector<std::pair<std::string, Var>> named_parameters() const;
    std::vector<Var> parameters() const;
    // Parameters plus BatchNorm running statistics.
    std::vector<std::pair<std::string, Tensor*>> state();
    void zero_grad();

    SpikeEncoder encoder;
    Var projection;  // [C x dim]
    TimeEmbedding time_embedding;
    std::optional<TimeEmbedding> query_embedding;
    std::vector<Block> blocks;
    Decoder decoder;

private:
    std::vector<std::pair<std::string, BatchNorm*>> batch_norms();

    ModelConfig cfg_;
    bool warned_remainder_ = false;
};

// Mean over windows of (1/D_b) sum_d (1/Q_bd) sum_r (x^ - x)^2, where D_b
// counts variates with at least one query. Variates without queries among
// `variates` are reported once per call.
Var mse_loss(const Var& predictions, std::span<const double> truths,
             std::span<const std::size_t> window_of, std::span<const std::size_t> variate_of,
             std::size_t variates);

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::size_t count = 0;
};

// Flat MSE / MAE pooled over all queries.
Metrics metrics(std::span<const double> predictions, std::span<const double> truths);

} // namespace sed
