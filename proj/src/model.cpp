#include "sedformer/model.hpp"

#include <cmath>
#include <map>
#include <string>

#include "sedformer/error.hpp"
#include "sedformer/log.hpp"

namespace sed {

void ModelConfig::validate() const {
    if (variates == 0) throw ConfigError("model: variates must be positive");
    if (channels == 0) throw ConfigError("model: channels must be positive");
    if (kernel % 2 == 0) throw ConfigError("model: kernel size must be odd");
    if (stride == 0) throw ConfigError("model: stride must be positive");
    if (dim < 2 || heads == 0 || dim % heads != 0)
        throw ConfigError("model: dim must be at least 2 and divisible by heads");
    if (blocks == 0) throw ConfigError("model: at least one block required");
    if (!(tau > 1.0)) throw ConfigError("model: tau must exceed 1");
    if (!(v_th > 0.0) || !(alpha_ste > 0.0)) throw ConfigError("model: v_th and alpha_ste must be positive");
    if (!(span > 0.0)) throw ConfigError("model: span must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0)) throw ConfigError("model: BN momentum must lie in (0,1)");
}

Decoder::Decoder(std::size_t dim, std::mt19937_64& rng)
    : w1(linear_weight(2 * dim, 2 * dim, rng)),
      b1(parameter(Tensor({2 * dim}, 0.0))),
      w2(linear_weight(2 * dim, 2 * dim, rng)),
      b2(parameter(Tensor({2 * dim}, 0.0))),
      w3(linear_weight(2 * dim, 1, rng)),
      b3(parameter(Tensor({1}, 0.0))) {}

Var Decoder::forward(const Var& summary, const Var& query_time) const {
    Var x = ops::concat_cols({summary, query_time});
    Var h = ops::relu(ops::add_bias(ops::matmul(x, w1), b1));
    h = ops::relu(ops::add_bias(ops::matmul(h, w2), b2));
    return ops::add_bias(ops::matmul(h, w3), b3);
}

namespace {

EncoderConfig encoder_config(const ModelConfig& cfg) {
    cfg.validate();
    EncoderConfig e;
    e.variates = cfg.variates;
    e.channels = cfg.channels;
    e.kernel = cfg.kernel;
    e.neuron = neuron::EaLifConfig::with_tau(cfg.tau, cfg.v_th, cfg.alpha_ste);
    e.first_gap = cfg.first_gap;
    e.bn_momentum = cfg.bn_momentum;
    return e;
}

BlockConfig block_config(const ModelConfig& cfg) {
    BlockConfig b;
    b.dim = cfg.dim;
    b.heads = cfg.heads;
    b.filter = neuron::EaLifConfig::with_tau(cfg.tau, cfg.v_th, cfg.alpha_ste);
    b.bn_momentum = cfg.bn_momentum;
    return b;
}

} // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t seed)
    : rng_(seed),
      encoder(encoder_config(cfg), rng_),
      projection(linear_weight(cfg.channels, cfg.dim, rng_)),
      time_embedding(cfg.dim, cfg.span, rng_),
      decoder(cfg.dim, rng_),
      cfg_(cfg) {
    if (!cfg.shared_time_embedding) query_embedding.emplace(cfg.dim, cfg.span, rng_);
    const auto bc = block_config(cfg);
    for (std::size_t l = 0; l < cfg.blocks; ++l) blocks.emplace_back(bc, rng_);
}

ForwardResult Model::forward(std::span<const ForecastWindow> batch, NormMode norm, neuron::SpikeMode mode) {
    if (batch.empty()) throw DataError("forward on an empty batch");
    std::vector<const EventSeries*> hist;
    for (const auto& w : batch) {
        if (w.history.variates() != cfg_.variates)
            throw DimensionError("model expects " + std::to_string(cfg_.variates) + " variates, window has " +
                                 std::to_string(w.history.variates()));
        hist.push_back(&w.history);
    }
    const auto events = EventBatch::stack(hist, cfg_.first_gap);

    ForwardResult out;
    out.events = events.times.size();
    for (double m : events.mask.data()) out.observations += m != 0.0;
    out.spikes = encoder.encode(events, norm, mode);
    out.pooled = downsample(out.spikes, events.mask, events.times, cfg_.stride, events.segments, false);
    out.dropped = dropped_events(events.segments, cfg_.stride);
    if (out.dropped > 0 && !warned_remainder_) {
        warn("pooling with stride " + std::to_string(cfg_.stride) + " drops " + std::to_string(out.dropped) +
             " trailing event(s) in this batch; further batches are not reported");
        warned_remainder_ = true;
    }

    Var tokens = embed_tokens(out.pooled.spikes, out.pooled.times, projection, time_embedding);
    for (auto& block : blocks) tokens = block.forward(tokens, out.pooled.gaps, out.pooled.segments, norm);
    Var summary = masked_time_aggregation(tokens, out.pooled.mask, out.pooled.segments);

    std::vector<std::size_t> rows;
    std::vector<double> qtimes;
    for (std::size_t b = 0; b < batch.size(); ++b)
        for (const auto& q : batch[b].queries) {
            if (q.variate >= cfg_.variates) throw DataError("query variate out of range");
            rows.push_back(b * cfg_.variates + q.variate);
            qtimes.push_back(q.t);
            out.truths.push_back(q.truth);
            out.window_of.push_back(b);
            out.variate_of.push_back(q.variate);
        }
    if (rows.empty()) throw DataError("batch has no queries");
    const TimeEmbedding& qte = query_embedding ? *query_embedding : time_embedding;
    out.predictions = decoder.forward(ops::gather_rows(summary, std::move(rows)), qte.forward(qtimes));
    return out;
}

std::vector<std::pair<std::string, Var>> Model::named_parameters() const {
    std::vector<std::pair<std::string, Var>> p{
        {"encoder.kernels", encoder.kernels},     {"encoder.bn.gamma", encoder.bn.gamma},
        {"encoder.bn.beta", encoder.bn.beta},     {"encoder.rho_hat", encoder.rho_hat},
        {"encoder.gate_a", encoder.gate_a},       {"encoder.gate_b", encoder.gate_b},
        {"encoder.gamma_hat", encoder.gamma_hat}, {"encoder.theta", encoder.theta},
        {"encoder.eta", encoder.neuron.eta},      {"embed.projection", projection},
        {"embed.te.w", time_embedding.w},         {"embed.te.omega", time_embedding.omega},
        {"embed.te.phi", time_embedding.phi},
    };
    if (query_embedding) {
        p.emplace_back("decoder.te.w", query_embedding->w);
        p.emplace_back("decoder.te.omega", query_embedding->omega);
        p.emplace_back("decoder.te.phi", query_embedding->phi);
    }
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const auto& b = blocks[l];
        const std::string pre = "block" + std::to_string(l) + ".";
        const auto& a = b.attention;
        for (auto& [n, v] : std::vector<std::pair<std::string, Var>>{
                 {"attn.w_q", a.w_q},          {"attn.w_k", a.w_k},          {"attn.w_v", a.w_v},
                 {"attn.w_o", a.w_o},          {"attn.bn_q.gamma", a.bn_q.gamma}, {"attn.bn_q.beta", a.bn_q.beta},
                 {"attn.bn_k.gamma", a.bn_k.gamma}, {"attn.bn_k.beta", a.bn_k.beta},
                 {"attn.bn_v.gamma", a.bn_v.gamma}, {"attn.bn_v.beta", a.bn_v.beta},
                 {"attn.eta_q", a.filter_q.eta}, {"attn.eta_k", a.filter_k.eta}, {"attn.eta_v", a.filter_v.eta},
                 {"norm_attn.gamma", b.norm_attn.gamma}, {"norm_attn.beta", b.norm_attn.beta},
                 {"norm_ffn.gamma", b.norm_ffn.gamma},   {"norm_ffn.beta", b.norm_ffn.beta},
                 {"ffn.w1", b.w1}, {"ffn.b1", b.b1}, {"ffn.w2", b.w2}, {"ffn.b2", b.b2}})
            p.emplace_back(pre + n, v);
    }
    for (auto& [n, v] : std::vector<std::pair<std::string, Var>>{{"decoder.w1", decoder.w1}, {"decoder.b1", decoder.b1},
                                                                 {"decoder.w2", decoder.w2}, {"decoder.b2", decoder.b2},
                                                                 {"decoder.w3", decoder.w3}, {"decoder.b3", decoder.b3}})
        p.emplace_back(n, v);
    return p;
}

std::vector<Var> Model::parameters() const {
    std::vector<Var> out;
    for (auto& [n, v] : named_parameters()) out.push_back(v);
    return out;
}

std::vector<std::pair<std::string, BatchNorm*>> Model::batch_norms() {
    std::vector<std::pair<std::string, BatchNorm*>> out{{"encoder.bn", &encoder.bn}};
    for (std::size_t l = 0; l < blocks.size(); ++l) {
        const std::string pre = "block" + std::to_string(l) + ".";
        auto& b = blocks[l];
        out.emplace_back(pre + "attn.bn_q", &b.attention.bn_q);
        out.emplace_back(pre + "attn.bn_k", &b.attention.bn_k);
        out.emplace_back(pre + "attn.bn_v", &b.attention.bn_v);
        out.emplace_back(pre + "norm_attn", &b.norm_attn);
        out.emplace_back(pre + "norm_ffn", &b.norm_ffn);
    }
    return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::state() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& [n, v] : named_parameters()) out.emplace_back(n, &v.mutable_value());
    for (auto& [n, bn] : batch_norms()) {
        out.emplace_back(n + ".running_mean", &bn->running_mean);
        out.emplace_back(n + ".running_var", &bn->running_var);
    }
    return out;
}

void Model::zero_grad() {
    for (auto& v : parameters()) v.zero_grad();
}

Var mse_loss(const Var& predictions, std::span<const double> truths, std::span<const std::size_t> window_of,
             std::span<const std::size_t> variate_of, std::size_t variates) {
    const std::size_t n = truths.size();
    if (predictions.size() != n || window_of.size() != n || variate_of.size() != n)
        throw DimensionError("mse_loss: predictions, truths and query labels disagree in length");
    if (n == 0) throw DataError("mse_loss: no queries");
    std::map<std::size_t, std::vector<std::size_t>> counts;  // window -> per-variate query counts
    for (std::size_t i = 0; i < n; ++i) {
        if (variate_of[i] >= variates) throw DataError("mse_loss: variate index out of range");
        auto& c = counts[window_of[i]];
        if (c.empty()) c.assign(variates, 0);
        ++c[variate_of[i]];
    }
    std::size_t missing = 0;
    std::map<std::size_t, std::size_t> present;
    for (auto& [w, c] : counts) {
        std::size_t p = 0;
        for (auto q : c) p += q > 0;
        missing += variates - p;
        present[w] = p;
    }
    if (missing > 0)
        warn("mse_loss: " + std::to_string(missing) + " (window, variate) pair(s) without queries excluded");
    Tensor weight({n, 1}), truth({n, 1});
    const double windows = static_cast<double>(counts.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double q = static_cast<double>(counts[window_of[i]][variate_of[i]]);
        weight[i] = 1.0 / (windows * static_cast<double>(present[window_of[i]]) * q);
        truth[i] = truths[i];
    }
    Var err = ops::sub(ops::reshape(predictions, {n, 1}), constant(std::move(truth)));
    return ops::sum(ops::mul(ops::square(err), constant(std::move(weight))));
}

Metrics metrics(std::span<const double> predictions, std::span<const double> truths) {
    if (predictions.size() != truths.size()) throw DimensionError("metrics: length mismatch");
    if (truths.empty()) throw DataError("metrics: no queries");
    Metrics m;
    m.count = truths.size();
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const double e = predictions[i] - truths[i];
        m.mse += e * e;
        m.mae += std::abs(e);
    }
    m.mse /= static_cast<double>(m.count);
    m.mae /= static_cast<double>(m.count);
    return m;
}

} // namespace sed
