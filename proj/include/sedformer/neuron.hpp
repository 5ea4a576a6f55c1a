#pragma once

#include <span>
#include <vector>

#include "sedformer/autodiff.hpp"

namespace sed::neuron {

// Forward rule for the firing nonlinearity. `smooth` replaces H(u) by
// sigmoid(alpha_ste * u) so finite differences can check the surrogate.
enum class SpikeMode { hard, smooth };

// Whether the leaky filter output goes through softplus.
enum class Squash { with_softplus, without };

// How the first inter-event gap of a sequence is defined.
enum class FirstGap { zero, median };

// Vanilla LIF with a constant leak.
struct LifConfig {
    double alpha = 0.5;
    double v_th = 1.0;
    double alpha_ste = 4.0;

    void validate() const;
};

// Event-aligned LIF: tau = softplus(eta) + 1 > 1.
struct EaLifConfig {
    double eta = 0.0;
    double v_th = 1.0;
    double alpha_ste = 4.0;

    double tau() const;
    static EaLifConfig with_tau(double tau, double v_th = 1.0, double alpha_ste = 4.0);
    void validate() const;
};

struct NeuronState {
    Tensor v;

    static NeuronState zeros(Shape shape) { return NeuronState{Tensor(std::move(shape), 0.0)}; }
};

// Pre-spike membrane, spikes, post-spike membrane.
struct StepResult {
    Tensor m;
    Tensor s;
    Tensor v;
};

inline double heaviside(double u) { return u >= 0.0 ? 1.0 : 0.0; }

// alpha * sigmoid(alpha u) * (1 - sigmoid(alpha u)).
double surrogate_grad(double u, double alpha_ste);

StepResult lif_step(const NeuronState& state, const Tensor& x, const LifConfig& cfg);

// beta = exp(-dt / (softplus(eta) + 1)).
double ealif_leak(double dt, double eta);
// d beta / d eta.
double ealif_leak_grad(double dt, double eta);

StepResult ealif_step(const NeuronState& state, const Tensor& current, double dt,
                      const EaLifConfig& cfg);

// Gaps t_k - t_{k-1} inside each segment of `times`; the first gap of each
// segment is 0 or the segment's median gap.
std::vector<double> inter_event_gaps(std::span<const double> times, const Segments& segments,
                                     FirstGap first = FirstGap::zero);

// H(u) forward (or the smooth sigmoid), STE-sigmoid backward.
Var surrogate_heaviside(const Var& u, double alpha_ste, SpikeMode mode = SpikeMode::hard);

// Full EA-LIF recurrence over the leading (event) axis of `current`; every
// leading slice holds the neurons of one event. State restarts at zero at
// each segment start. `eta` is a 1-element parameter. Returns the spikes
// with the same shape as `current`; backward is hand-derived BPTT through
// the surrogate.
Var ealif_spike_scan(const Var& current, std::span<const double> dt, const Var& eta,
                     double v_th, double alpha_ste, SpikeMode mode = SpikeMode::hard,
                     const Segments& segments = {});

// Interval-conditioned leaky integrator without threshold or reset:
// m[u] = beta(dt_u) m[u-1] + (1 - beta(dt_u)) x[u], m[0] = 0 before the
// first event, output softplus(m) or m. `dt` has one entry per event.
Var ealif_filter(const Var& x, std::span<const double> dt, const Var& eta, Squash squash,
                 const Segments& segments = {});

// An EA-LIF population with a learnable time constant.
class EaLifNeuron {
public:
    explicit EaLifNeuron(const EaLifConfig& cfg = {});

    double tau() const;
    EaLifConfig config() const;

    Var spikes(const Var& current, std::span<const double> dt, SpikeMode mode,
               const Segments& segments = {}) const;
    Var filter(const Var& x, std::span<const double> dt, Squash squash,
               const Segments& segments = {}) const;

    Var eta;
    double v_th;
    double alpha_ste;
};

} // namespace sed::neuron
