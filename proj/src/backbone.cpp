#include "sedformer/backbone.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sedformer/error.hpp"
#include "sedformer/log.hpp"

namespace sed {

Var linear_weight(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor w({fan_in, fan_out});
    for (double& x : w.data()) x = u(rng);
    return parameter(std::move(w));
}

TimeEmbedding::TimeEmbedding(std::size_t dim, double span, std::mt19937_64& rng)
    : dim_(dim), span_(span) {
    if (dim < 2) throw ConfigError("time embedding needs dimension >= 2");
    if (!(span > 0.0)) throw ConfigError("time embedding span must be positive");
    std::uniform_real_distribution<double> uw(-1.0, 1.0);
    std::uniform_real_distribution<double> uf(0.0, 12.0 * std::numbers::pi);
    std::uniform_real_distribution<double> up(0.0, 2.0 * std::numbers::pi);
    w = parameter(Tensor({1, 1}, uw(rng)));
    Tensor om({1, dim - 1}), ph({1, dim - 1});
    for (double& x : om.data()) x = uf(rng);
    for (double& x : ph.data()) x = up(rng);
    omega = parameter(std::move(om));
    phi = parameter(std::move(ph));
}

Var TimeEmbedding::forward(std::span<const double> t) const {
    if (t.empty()) throw DataError("time embedding of no timestamps");
    Tensor col({t.size(), 1});
    for (std::size_t i = 0; i < t.size(); ++i) col[i] = t[i] / span_;
    Var tc = constant(std::move(col));
    Var linear = ops::matmul(tc, w);
    Var periodic = ops::sin(ops::add_bias(ops::matmul(tc, omega), phi));
    return ops::concat_cols({linear, periodic});
}

Tensor TimeEmbedding::at(double t) const {
    const double one[] = {t};
    return forward(one).value().reshaped({dim_});
}

Var embed_tokens(const Var& pooled_spikes, std::span<const double> times, const Var& projection,
                 const TimeEmbedding& te) {
    const Tensor& s = pooled_spikes.value();
    if (s.rank() != 3 || s.dim(0) != times.size())
        throw DimensionError("embed_tokens: spikes " + shape_string(s.shape()) + " for " +
                             std::to_string(times.size()) + " timestamps");
    const std::size_t steps = s.dim(0), D = s.dim(1), C = s.dim(2);
    if (projection.value().rank() != 2 || projection.value().dim(0) != C ||
        projection.value().dim(1) != te.dim())
        throw DimensionError("embed_tokens: projection must be [C x dim]");
    Var flat = ops::reshape(pooled_spikes, {steps * D, C});
    std::vector<std::size_t> index(steps * D);
    for (std::size_t r = 0; r < index.size(); ++r) index[r] = r / D;
    return ops::add(ops::matmul(flat, projection), ops::gather_rows(te.forward(times), std::move(index)));
}

Segments token_rows(const Segments& steps, std::size_t variates) {
    Segments out;
    for (std::size_t o : steps.offsets) out.offsets.push_back(o * variates);
    return out;
}

Var linear_attention(const Var& phi_q, const Var& phi_k, const Var& v, std::size_t heads,
                     const Segments& rows, double eps) {
    const std::size_t n = phi_q.value().rows();
    const std::size_t d = phi_q.value().cols();
    if (phi_k.shape() != phi_q.shape() || v.shape() != phi_q.shape())
        throw DimensionError("linear_attention: query, key and value shapes differ");
    if (heads == 0 || d % heads != 0) throw ConfigError("linear_attention: dim not divisible by heads");
    const auto seg = rows.offsets.empty() ? Segments::single(n) : rows;
    if (seg.total() != n) throw DimensionError("linear_attention: segments do not cover the rows");
    const std::size_t dh = d / heads;
    std::vector<Var> head_out;
    for (std::size_t h = 0; h < heads; ++h) {
        Var q = ops::slice_cols(phi_q, h * dh, dh);
        Var k = ops::slice_cols(phi_k, h * dh, dh);
        Var val = ops::slice_cols(v, h * dh, dh);
        std::vector<Var> parts;
        for (std::size_t b = 0; b < seg.count(); ++b) {
            if (seg.length(b) == 0) continue;
            Var qb = ops::slice_rows(q, seg.begin(b), seg.length(b));
            Var kb = ops::slice_rows(k, seg.begin(b), seg.length(b));
            Var vb = ops::slice_rows(val, seg.begin(b), seg.length(b));
            Var kv = ops::matmul(ops::transpose(kb), vb);
            Var ksum = ops::sum_rows(kb);
            Var num = ops::matmul(qb, kv);
            Var den = ops::add_scalar(ops::matmul(qb, ops::transpose(ksum)), eps);
            parts.push_back(ops::div_rows(num, den));
        }
        head_out.push_back(parts.size() == 1 ? parts.front() : ops::concat_rows(parts));
    }
    return heads == 1 ? head_out.front() : ops::concat_cols(head_out);
}

SedAttention::SedAttention(std::size_t dim, std::size_t heads, const neuron::EaLifConfig& filter,
                           double bn_momentum, std::mt19937_64& rng)
    : w_q(linear_weight(dim, dim, rng)),
      w_k(linear_weight(dim, dim, rng)),
      w_v(linear_weight(dim, dim, rng)),
      w_o(linear_weight(dim, dim, rng)),
      bn_q(dim, bn_momentum),
      bn_k(dim, bn_momentum),
      bn_v(dim, bn_momentum),
      filter_q(filter),
      filter_k(filter),
      filter_v(filter),
      dim_(dim),
      heads_(heads) {
    if (heads == 0 || dim % heads != 0)
        throw ConfigError("attention: dim " + std::to_string(dim) + " not divisible by " +
                          std::to_string(heads) + " heads");
}

AttentionFeatures SedAttention::features(const Var& x, std::span<const double> dt,
                                         const Segments& steps, NormMode norm) {
    if (x.value().rank() != 2 || x.value().dim(1) != dim_)
        throw DimensionError("attention input must be [rows x " + std::to_string(dim_) + "]");
    Var q = bn_q.forward(ops::matmul(x, w_q), norm);
    Var k = bn_k.forward(ops::matmul(x, w_k), norm);
    Var v = bn_v.forward(ops::matmul(x, w_v), norm);
    return {filter_q.filter(q, dt, neuron::Squash::with_softplus, steps),
            filter_k.filter(k, dt, neuron::Squash::with_softplus, steps),
            filter_v.filter(v, dt, neuron::Squash::without, steps)};
}

Var SedAttention::forward(const Var& x, std::span<const double> dt, const Segments& steps,
                          NormMode norm) {
    auto f = features(x, dt, steps, norm);
    const std::size_t variates = steps.total() == 0 ? 0 : x.value().rows() / steps.total();
    Var y = linear_attention(f.phi_q, f.phi_k, f.v_tilde, heads_, token_rows(steps, variates), eps);
    return ops::matmul(y, w_o);
}

std::vector<Var> SedAttention::parameters() const {
    return {w_q, w_k, w_v, w_o, bn_q.gamma, bn_q.beta, bn_k.gamma, bn_k.beta, bn_v.gamma, bn_v.beta,
            filter_q.eta, filter_k.eta, filter_v.eta};
}

void BlockConfig::validate() const {
    if (dim == 0 || heads == 0 || dim % heads != 0)
        throw ConfigError("block: dim must be a positive multiple of heads");
    filter.validate();
}

Block::Block(const BlockConfig& cfg, std::mt19937_64& rng)
    : attention((cfg.validate(), cfg.dim), cfg.heads, cfg.filter, cfg.bn_momentum, rng),
      norm_attn(cfg.dim, cfg.bn_momentum),
      norm_ffn(cfg.dim, cfg.bn_momentum),
      w1(linear_weight(cfg.dim, 2 * cfg.dim, rng)),
      b1(parameter(Tensor({2 * cfg.dim}, 0.0))),
      w2(linear_weight(2 * cfg.dim, cfg.dim, rng)),
      b2(parameter(Tensor({cfg.dim}, 0.0))) {}

Var Block::forward(const Var& x, std::span<const double> dt, const Segments& steps, NormMode norm) {
    Var mid = ops::add(x, attention.forward(norm_attn.forward(x, norm), dt, steps, norm));
    Var h = ops::relu(ops::add_bias(ops::matmul(norm_ffn.forward(mid, norm), w1), b1));
    return ops::add(mid, ops::add_bias(ops::matmul(h, w2), b2));
}

std::vector<Var> Block::parameters() const {
    auto p = attention.parameters();
    for (const Var& v : {norm_attn.gamma, norm_attn.beta, norm_ffn.gamma, norm_ffn.beta, w1, b1, w2, b2})
        p.push_back(v);
    return p;
}

Var masked_time_aggregation(const Var& tokens, const Tensor& pooled_mask, const Segments& steps) {
    const std::size_t rows = tokens.value().rows();
    if (pooled_mask.size() != rows)
        throw DimensionError("MTA: mask has " + std::to_string(pooled_mask.size()) + " entries for " +
                             std::to_string(rows) + " token rows");
    const auto seg = steps.offsets.empty() ? Segments::single(pooled_mask.rows()) : steps;
    const std::size_t D = pooled_mask.cols();
    std::vector<double> weight(rows, 0.0);
    std::vector<std::size_t> group(rows, 0);
    for (std::size_t b = 0; b < seg.count(); ++b)
        for (std::size_t d = 0; d < D; ++d) {
            double total = 0.0;
            for (std::size_t u = seg.begin(b); u < seg.end(b); ++u) total += pooled_mask[u * D + d];
            if (total == 0.0)
                warn("MTA: variate " + std::to_string(d) + " of window " + std::to_string(b) +
                     " has no observed pooled step; summary set to zero");
            for (std::size_t u = seg.begin(b); u < seg.end(b); ++u) {
                weight[u * D + d] = total > 0.0 ? pooled_mask[u * D + d] / total : 0.0;
                group[u * D + d] = b * D + d;
            }
        }
    return ops::weighted_row_sum(tokens, std::move(weight), std::move(group), seg.count() * D);
}

} // namespace sed
