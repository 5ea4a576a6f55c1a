#include "sedformer/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sedformer/error.hpp"
#include "sedformer/log.hpp"

namespace sed {

std::size_t EventSeries::observations() const {
    std::size_t n = 0;
    for (double m : mask.data()) n += m != 0.0;
    return n;
}

void EventSeries::validate() const {
    const std::size_t K = times.size();
    if (mask.rank() != 2 || values.shape() != mask.shape() || mask.dim(0) != K)
        throw DataError("event series: times, values and mask disagree in shape");
    for (std::size_t k = 0; k < K; ++k) {
        if (!std::isfinite(times[k])) throw DataError("event series: non-finite timestamp");
        if (k > 0 && times[k] < times[k - 1])
            throw DataError("event series: timestamps must be nondecreasing");
    }
    const std::size_t D = mask.dim(1);
    for (std::size_t k = 0; k < K; ++k) {
        bool any = false;
        for (std::size_t d = 0; d < D; ++d) {
            const double m = mask.at(k, d);
            if (m != 0.0 && m != 1.0) throw DataError("event series: mask must be binary");
            any = any || m == 1.0;
            if (m == 1.0 && !std::isfinite(values.at(k, d)))
                throw DataError("event series: non-finite observed value");
        }
        if (!any) throw DataError("event series: event " + std::to_string(k) + " has no observation");
    }
}

EventSeries EventSeries::shifted(double offset) const {
    EventSeries out = *this;
    for (double& t : out.times) t += offset;
    return out;
}

EventSeries align_events(const std::vector<std::vector<RawEvent>>& per_variate) {
    const std::size_t D = per_variate.size();
    if (D == 0) throw DataError("align_events: no variates");
    std::vector<double> times;
    for (std::size_t d = 0; d < D; ++d) {
        const auto& ev = per_variate[d];
        if (ev.empty()) warn("align_events: variate " + std::to_string(d) + " has no events");
        for (std::size_t i = 0; i < ev.size(); ++i) {
            if (!std::isfinite(ev[i].t)) throw DataError("align_events: non-finite timestamp");
            if (i > 0 && ev[i].t == ev[i - 1].t)
                throw DataError("align_events: duplicate timestamp " + std::to_string(ev[i].t) +
                                " in variate " + std::to_string(d));
            if (i > 0 && ev[i].t < ev[i - 1].t)
                throw DataError("align_events: variate " + std::to_string(d) + " is not time-sorted");
            times.push_back(ev[i].t);
        }
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    EventSeries out{times, Tensor({times.size(), D}), Tensor({times.size(), D})};
    for (std::size_t d = 0; d < D; ++d)
        for (const auto& e : per_variate[d]) {
            const auto k = static_cast<std::size_t>(
                std::lower_bound(times.begin(), times.end(), e.t) - times.begin());
            out.values.at(k, d) = e.x;
            out.mask.at(k, d) = 1.0;
        }
    return out;
}

Var interval_gate(std::span<const double> dt, const Var& rho_hat, const Var& a, const Var& b) {
    for (double g : dt)
        if (!(g >= 0.0)) throw DataError("interval_gate: gaps must be non-negative");
    Var rho = ops::add_scalar(ops::softplus(rho_hat), 1e-3);
    Var gaps = constant(Tensor::vector({dt.begin(), dt.end()}));
    Var scaled = ops::log(ops::add_scalar(ops::div(gaps, rho), 1.0));
    return ops::sigmoid(ops::add(ops::mul(scaled, a), b));
}

Var synaptic_current(const Var& x_local, const Var& gate, const Var& gamma_hat, const Var& theta) {
    Var gated = ops::mul_rows(x_local, gate);
    return ops::mul(ops::sub_bias(gated, theta), ops::softplus(gamma_hat));
}

void EncoderConfig::validate() const {
    if (variates == 0) throw ConfigError("encoder: at least one variate required");
    if (channels == 0) throw ConfigError("encoder: at least one channel required");
    if (kernel % 2 == 0) throw ConfigError("encoder: kernel size must be odd");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ConfigError("encoder: BN momentum must lie in (0,1)");
    neuron.validate();
}

EventBatch EventBatch::stack(std::span<const EventSeries* const> series, neuron::FirstGap first_gap) {
    if (series.empty()) throw DataError("empty batch");
    const std::size_t D = series.front()->variates();
    std::vector<std::size_t> lengths;
    std::size_t total = 0;
    for (const EventSeries* s : series) {
        if (s->events() == 0) throw DataError("encoder: series with no events");
        s->validate();
        if (s->variates() != D) throw DimensionError("batch mixes variate counts");
        lengths.push_back(s->events());
        total += s->events();
    }
    EventBatch out;
    out.segments = Segments::from_lengths(lengths);
    out.masked_values = Tensor({total, D});
    out.mask = Tensor({total, D});
    out.times.reserve(total);
    std::size_t row = 0;
    for (const EventSeries* s : series) {
        out.times.insert(out.times.end(), s->times.begin(), s->times.end());
        for (std::size_t i = 0; i < s->mask.size(); ++i) {
            out.mask[row * D + i] = s->mask[i];
            out.masked_values[row * D + i] = s->mask[i] * s->values[i];
        }
        row += s->events();
    }
    out.gaps = neuron::inter_event_gaps(out.times, out.segments, first_gap);
    return out;
}

SpikeEncoder::SpikeEncoder(const EncoderConfig& cfg, std::mt19937_64& rng)
    : bn(cfg.channels, cfg.bn_momentum),
      rho_hat(parameter(Tensor::scalar(inverse_softplus(1.0 - 1e-3)))),
      gate_a(parameter(Tensor::scalar(1.0))),
      gate_b(parameter(Tensor::scalar(0.0))),
      gamma_hat(parameter(Tensor::scalar(inverse_softplus(1.0)))),
      theta(parameter(Tensor({cfg.channels}, 0.0))),
      neuron(cfg.neuron),
      cfg_(cfg) {
    cfg.validate();
    Tensor k({cfg.variates, cfg.channels, cfg.kernel});
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.kernel));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : k.data()) w = u(rng);
    kernels = parameter(std::move(k));
}

Var SpikeEncoder::encode(const EventBatch& batch, NormMode norm, neuron::SpikeMode mode) {
    if (batch.mask.dim(1) != cfg_.variates)
        throw DimensionError("encoder built for " + std::to_string(cfg_.variates) +
                             " variates, got " + std::to_string(batch.mask.dim(1)));
    Var local = ops::depthwise_conv1d(constant(batch.masked_values), kernels, batch.segments);
    local = bn.forward(local, norm);
    Var gate = interval_gate(batch.gaps, rho_hat, gate_a, gate_b);
    Var current = synaptic_current(local, gate, gamma_hat, theta);
    return neuron.spikes(current, batch.gaps, mode, batch.segments);
}

Var SpikeEncoder::encode(const EventSeries& series, NormMode norm, neuron::SpikeMode mode) {
    const EventSeries* one[] = {&series};
    return encode(EventBatch::stack(one, cfg_.first_gap), norm, mode);
}

double SpikeEncoder::rho() const { return sed::softplus(rho_hat.item()) + 1e-3; }
double SpikeEncoder::gamma() const { return sed::softplus(gamma_hat.item()); }

std::vector<Var> SpikeEncoder::parameters() const {
    return {kernels, bn.gamma, bn.beta, rho_hat, gate_a, gate_b, gamma_hat, theta, neuron.eta};
}

} // namespace sed
