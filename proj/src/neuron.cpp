#include "sedformer/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sedformer/error.hpp"

namespace sed::neuron {

void LifConfig::validate() const {
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ConfigError("LIF leak alpha must lie in [0,1)");
    if (!(v_th > 0.0)) throw ConfigError("LIF threshold must be positive");
    if (!(alpha_ste > 0.0)) throw ConfigError("surrogate slope must be positive");
}

double EaLifConfig::tau() const { return sed::softplus(eta) + 1.0; }

EaLifConfig EaLifConfig::with_tau(double tau, double v_th, double alpha_ste) {
    if (!(tau > 1.0)) throw ConfigError("EA-LIF time constant must exceed 1 (tau = softplus(eta) + 1)");
    return EaLifConfig{inverse_softplus(tau - 1.0), v_th, alpha_ste};
}

void EaLifConfig::validate() const {
    if (!std::isfinite(eta)) throw ConfigError("EA-LIF eta must be finite");
    if (!(v_th > 0.0)) throw ConfigError("EA-LIF threshold must be positive");
    if (!(alpha_ste > 0.0)) throw ConfigError("surrogate slope must be positive");
}

double surrogate_grad(double u, double alpha_ste) {
    const double s = sed::sigmoid(alpha_ste * u);
    return alpha_ste * s * (1.0 - s);
}

namespace {

StepResult integrate(const NeuronState& state, const Tensor& x, double leak, double v_th) {
    if (state.v.shape() != x.shape())
        throw DimensionError("neuron state " + shape_string(state.v.shape()) +
                             " does not match input " + shape_string(x.shape()));
    StepResult r{Tensor(x.shape()), Tensor(x.shape()), Tensor(x.shape())};
    for (std::size_t i = 0; i < x.size(); ++i) {
        r.m[i] = leak * state.v[i] + (1.0 - leak) * x[i];
        r.s[i] = heaviside(r.m[i] - v_th);
        r.v[i] = r.m[i] - v_th * r.s[i];
    }
    return r;
}

void check_gap(double dt) {
    if (!(dt >= 0.0) || !std::isfinite(dt))
        throw DataError("inter-event gap must be finite and non-negative, got " + std::to_string(dt));
}

double tau_of(double eta) { return sed::softplus(eta) + 1.0; }

Segments resolve_steps(const Segments& s, std::size_t steps) {
    if (s.offsets.empty()) return Segments::single(steps);
    if (s.total() != steps) throw DimensionError("segments do not cover the event axis");
    return s;
}

} // namespace

StepResult lif_step(const NeuronState& state, const Tensor& x, const LifConfig& cfg) {
    cfg.validate();
    return integrate(state, x, cfg.alpha, cfg.v_th);
}

double ealif_leak(double dt, double eta) {
    check_gap(dt);
    return std::exp(-dt / tau_of(eta));
}

double ealif_leak_grad(double dt, double eta) {
    const double tau = tau_of(eta);
    return std::exp(-dt / tau) * dt / (tau * tau) * sed::sigmoid(eta);
}

StepResult ealif_step(const NeuronState& state, const Tensor& current, double dt,
                      const EaLifConfig& cfg) {
    cfg.validate();
    return integrate(state, current, ealif_leak(dt, cfg.eta), cfg.v_th);
}

std::vector<double> inter_event_gaps(std::span<const double> times, const Segments& segments,
                                     FirstGap first) {
    const auto seg = resolve_steps(segments, times.size());
    std::vector<double> gaps(times.size(), 0.0);
    for (std::size_t s = 0; s < seg.count(); ++s) {
        for (std::size_t k = seg.begin(s) + 1; k < seg.end(s); ++k) {
            gaps[k] = times[k] - times[k - 1];
            if (gaps[k] < 0.0) throw DataError("event times must be non-decreasing");
        }
        if (first == FirstGap::median && seg.length(s) > 1) {
            std::vector<double> rest(gaps.begin() + static_cast<std::ptrdiff_t>(seg.begin(s) + 1),
                                     gaps.begin() + static_cast<std::ptrdiff_t>(seg.end(s)));
            std::nth_element(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(rest.size() / 2), rest.end());
            gaps[seg.begin(s)] = rest[rest.size() / 2];
        }
    }
    return gaps;
}

Var surrogate_heaviside(const Var& u, double alpha_ste, SpikeMode mode) {
    if (!(alpha_ste > 0.0)) throw ConfigError("surrogate slope must be positive");
    const Tensor& uv = u.value();
    Tensor out(uv.shape());
    for (std::size_t i = 0; i < uv.size(); ++i)
        out[i] = mode == SpikeMode::hard ? heaviside(uv[i]) : sed::sigmoid(alpha_ste * uv[i]);
    return make_op("surrogate_heaviside", std::move(out), {u}, [alpha_ste](Node& self) {
        Node& nu = *self.parents[0];
        Tensor& gu = nu.grad_buffer();
        for (std::size_t i = 0; i < gu.size(); ++i)
            gu[i] += self.grad[i] * surrogate_grad(nu.value[i], alpha_ste);
    });
}

Var ealif_spike_scan(const Var& current, std::span<const double> dt, const Var& eta, double v_th,
                     double alpha_ste, SpikeMode mode, const Segments& segments) {
    const Tensor& iv = current.value();
    const std::size_t steps = iv.rows();
    if (dt.size() != steps)
        throw DataError("EA-LIF scan: " + std::to_string(dt.size()) + " gaps for " +
                        std::to_string(steps) + " events");
    if (eta.size() != 1) throw DimensionError("EA-LIF eta must be a single value");
    if (!(v_th > 0.0) || !(alpha_ste > 0.0)) throw ConfigError("EA-LIF threshold and slope must be positive");
    const std::size_t n = steps == 0 ? 0 : iv.size() / steps;
    const auto seg = resolve_steps(segments, steps);
    const double eta_v = eta.value()[0];

    std::vector<double> beta(steps);
    for (std::size_t k = 0; k < steps; ++k) beta[k] = ealif_leak(dt[k], eta_v);

    Tensor spikes(iv.shape());
    Tensor membrane(iv.shape());  // pre-spike m
    Tensor prev_v(iv.shape());    // v[k-1] entering step k
    std::vector<double> v(n);
    for (std::size_t s = 0; s < seg.count(); ++s) {
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t k = seg.begin(s); k < seg.end(s); ++k)
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t i = k * n + j;
                prev_v[i] = v[j];
                const double m = beta[k] * v[j] + (1.0 - beta[k]) * iv[i];
                const double sp = mode == SpikeMode::hard ? heaviside(m - v_th)
                                                          : sed::sigmoid(alpha_ste * (m - v_th));
                membrane[i] = m;
                spikes[i] = sp;
                v[j] = m - v_th * sp;
            }
    }

    std::vector<double> gaps(dt.begin(), dt.end());
    return make_op(
        "ealif_spike_scan", std::move(spikes), {current, eta},
        [seg, n, beta = std::move(beta), gaps = std::move(gaps), membrane = std::move(membrane),
         prev_v = std::move(prev_v), v_th, alpha_ste, eta_v](Node& self) {
            Node& ni = *self.parents[0];
            Node& ne = *self.parents[1];
            Tensor* gi = ni.requires_grad ? &ni.grad_buffer() : nullptr;
            double g_eta = 0.0;
            std::vector<double> gv(n);
            for (std::size_t s = 0; s < seg.count(); ++s) {
                std::fill(gv.begin(), gv.end(), 0.0);
                for (std::size_t k = seg.end(s); k-- > seg.begin(s);) {
                    const double dbeta = ealif_leak_grad(gaps[k], eta_v);
                    double g_beta = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t i = k * n + j;
                        const double h = surrogate_grad(membrane[i] - v_th, alpha_ste);
                        const double gm = self.grad[i] * h + gv[j] * (1.0 - v_th * h);
                        if (gi) (*gi)[i] += gm * (1.0 - beta[k]);
                        g_beta += gm * (prev_v[i] - ni.value[i]);
                        gv[j] = gm * beta[k];
                    }
                    g_eta += g_beta * dbeta;
                }
            }
            if (ne.requires_grad) ne.grad_buffer()[0] += g_eta;
        });
}

Var ealif_filter(const Var& x, std::span<const double> dt, const Var& eta, Squash squash,
                 const Segments& segments) {
    const Tensor& xv = x.value();
    const std::size_t steps = dt.size();
    if (steps == 0 || xv.size() % steps != 0)
        throw DataError("EA-LIF filter: sequence of " + std::to_string(xv.size()) +
                        " values does not split into " + std::to_string(steps) + " events");
    if (eta.size() != 1) throw DimensionError("EA-LIF eta must be a single value");
    const std::size_t n = xv.size() / steps;
    const auto seg = resolve_steps(segments, steps);
    const double eta_v = eta.value()[0];

    std::vector<double> beta(steps);
    for (std::size_t k = 0; k < steps; ++k) beta[k] = ealif_leak(dt[k], eta_v);

    Tensor membrane(xv.shape());
    std::vector<double> m(n);
    for (std::size_t s = 0; s < seg.count(); ++s) {
        std::fill(m.begin(), m.end(), 0.0);
        for (std::size_t k = seg.begin(s); k < seg.end(s); ++k)
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t i = k * n + j;
                m[j] = beta[k] * m[j] + (1.0 - beta[k]) * xv[i];
                membrane[i] = m[j];
            }
    }

    std::vector<double> gaps(dt.begin(), dt.end());
    Var leaky = make_op(
        "ealif_filter", membrane, {x, eta},
        [seg, n, beta = std::move(beta), gaps = std::move(gaps), eta_v](Node& self) {
            Node& nx = *self.parents[0];
            Node& ne = *self.parents[1];
            Tensor* gx = nx.requires_grad ? &nx.grad_buffer() : nullptr;
            double g_eta = 0.0;
            std::vector<double> carry(n);
            for (std::size_t s = 0; s < seg.count(); ++s) {
                std::fill(carry.begin(), carry.end(), 0.0);
                for (std::size_t k = seg.end(s); k-- > seg.begin(s);) {
                    double g_beta = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t i = k * n + j;
                        const double gm = self.grad[i] + carry[j];
                        const double m_prev = k == seg.begin(s) ? 0.0 : self.value[i - n];
                        if (gx) (*gx)[i] += gm * (1.0 - beta[k]);
                        g_beta += gm * (m_prev - nx.value[i]);
                        carry[j] = gm * beta[k];
                    }
                    g_eta += g_beta * ealif_leak_grad(gaps[k], eta_v);
                }
            }
            if (ne.requires_grad) ne.grad_buffer()[0] += g_eta;
        });
    return squash == Squash::with_softplus ? ops::softplus(leaky) : leaky;
}

EaLifNeuron::EaLifNeuron(const EaLifConfig& cfg)
    : eta(parameter(Tensor::scalar(cfg.eta))), v_th(cfg.v_th), alpha_ste(cfg.alpha_ste) {
    cfg.validate();
}

double EaLifNeuron::tau() const { return tau_of(eta.value()[0]); }

EaLifConfig EaLifNeuron::config() const { return EaLifConfig{eta.value()[0], v_th, alpha_ste}; }

Var EaLifNeuron::spikes(const Var& current, std::span<const double> dt, SpikeMode mode,
                        const Segments& segments) const {
    return ealif_spike_scan(current, dt, eta, v_th, alpha_ste, mode, segments);
}

Var EaLifNeuron::filter(const Var& x, std::span<const double> dt, Squash squash,
                        const Segments& segments) const {
    return ealif_filter(x, dt, eta, squash, segments);
}

} // namespace sed::neuron
