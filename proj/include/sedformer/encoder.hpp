#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "sedformer/autodiff.hpp"
#include "sedformer/batch_norm.hpp"
#include "sedformer/neuron.hpp"

namespace sed {

// Event-aligned view of one multivariate history: the union of all variates'
// timestamps, values at those stamps and the observation mask.
struct EventSeries {
    std::vector<double> times;  // K, nondecreasing
    Tensor values;              // [K x D]; entries where mask == 0 are ignored
    Tensor mask;                // [K x D], binary

    std::size_t events() const { return times.size(); }
    std::size_t variates() const { return mask.empty() ? 0 : mask.dim(1); }
    std::size_t observations() const;

    // Throws DataError on shape mismatch, unsorted or non-finite times,
    // non-binary mask or events that no variate observed.
    void validate() const;
    EventSeries shifted(double offset) const;
};

struct RawEvent {
    double t;
    double x;
};

// Union of per-variate event lists. Each list must be sorted with no
// duplicate stamps; empty variates are accepted with a warning.
EventSeries align_events(const std::vector<std::vector<RawEvent>>& per_variate);

// Scalar gate per event: sigmoid(a * log(1 + dt / rho) + b), rho = softplus(rho_hat) + 1e-3.
// Returns a length-K vector.
Var interval_gate(std::span<const double> dt, const Var& rho_hat, const Var& a, const Var& b);

// I = gamma * (gate_k * x_local - theta), gamma = softplus(gamma_hat). x_local is
// [K x D x C], gate has K entries, theta has C.
Var synaptic_current(const Var& x_local, const Var& gate, const Var& gamma_hat, const Var& theta);

struct EncoderConfig {
    std::size_t variates = 1;
    std::size_t channels = 8;
    std::size_t kernel = 3;
    neuron::EaLifConfig neuron = neuron::EaLifConfig::with_tau(2.0);
    neuron::FirstGap first_gap = neuron::FirstGap::zero;
    double bn_momentum = 0.1;

    void validate() const;
};

// Histories stacked along the event axis, one segment per series.
struct EventBatch {
    std::vector<double> times;
    std::vector<double> gaps;
    Tensor masked_values;  // [sum K x D]
    Tensor mask;           // [sum K x D]
    Segments segments;

    static EventBatch stack(std::span<const EventSeries* const> series,
                            neuron::FirstGap first_gap = neuron::FirstGap::zero);
};

class SpikeEncoder {
public:
    SpikeEncoder(const EncoderConfig& cfg, std::mt19937_64& rng);

    // Binary spikes [sum K x D x C] on the event grid of the batch.
    Var encode(const EventBatch& batch, NormMode norm,
               neuron::SpikeMode mode = neuron::SpikeMode::hard);
    Var encode(const EventSeries& series, NormMode norm,
               neuron::SpikeMode mode = neuron::SpikeMode::hard);

    const EncoderConfig& config() const { return cfg_; }
    double rho() const;
    double gamma() const;
    std::vector<Var> parameters() const;

    Var kernels;    // [D x C x k]
    BatchNorm bn;
    Var rho_hat;
    Var gate_a;
    Var gate_b;
    Var gamma_hat;
    Var theta;      // [C]
    neuron::EaLifNeuron neuron;

private:
    EncoderConfig cfg_;
};

} // namespace sed
