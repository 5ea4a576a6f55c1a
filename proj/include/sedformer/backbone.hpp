#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "sedformer/autodiff.hpp"
#include "sedformer/batch_norm.hpp"
#include "sedformer/neuron.hpp"

namespace sed {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weight of shape [fan_in x fan_out].
Var linear_weight(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// TE(t) = [w t / span, sin(omega_i t / span + phi_i)], i = 1..dim-1.
class TimeEmbedding {
public:
    TimeEmbedding(std::size_t dim, double span, std::mt19937_64& rng);

    // One row per timestamp: [n x dim].
    Var forward(std::span<const double> t) const;
    Tensor at(double t) const;

    std::size_t dim() const { return dim_; }
    double span() const { return span_; }
    std::vector<Var> parameters() const { return {w, omega, phi}; }

    Var w;      // [1 x 1]
    Var omega;  // [1 x dim-1]
    Var phi;    // [1 x dim-1]

private:
    std::size_t dim_;
    double span_;
};

// Tokens x[u,d] = S'[u,d,:] E + TE(t'_u), returned as [K'·D x dim] with row
// u·D + d.
Var embed_tokens(const Var& pooled_spikes, std::span<const double> times, const Var& projection,
                 const TimeEmbedding& te);

// Row blocks of a token matrix: the rows of step segment b are
// [offsets[b]·D, offsets[b+1]·D).
Segments token_rows(const Segments& steps, std::size_t variates);

// Kernelized linear attention per head and per row segment:
// y = (phi_q KV) / (phi_q · k_sum + eps) with KV = phi_kᵀ v and k_sum the
// column sums of phi_k. Heads are contiguous column blocks. Returns the
// concatenated heads.
Var linear_attention(const Var& phi_q, const Var& phi_k, const Var& v, std::size_t heads,
                     const Segments& rows, double eps = 1e-6);

struct AttentionFeatures {
    Var phi_q;
    Var phi_k;
    Var v_tilde;
};

class SedAttention {
public:
    SedAttention(std::size_t dim, std::size_t heads, const neuron::EaLifConfig& filter,
                 double bn_momentum, std::mt19937_64& rng);

    // x: [K'·D x dim]; dt: one gap per pooled step; steps: pooled segments.
    AttentionFeatures features(const Var& x, std::span<const double> dt, const Segments& steps,
                               NormMode norm);
    Var forward(const Var& x, std::span<const double> dt, const Segments& steps, NormMode norm);

    std::size_t heads() const { return heads_; }
    std::vector<Var> parameters() const;

    Var w_q, w_k, w_v, w_o;
    BatchNorm bn_q, bn_k, bn_v;
    neuron::EaLifNeuron filter_q, filter_k, filter_v;
    double eps = 1e-6;

private:
    std::size_t dim_;
    std::size_t heads_;
};

struct BlockConfig {
    std::size_t dim = 32;
    std::size_t heads = 4;
    neuron::EaLifConfig filter = neuron::EaLifConfig::with_tau(2.0);
    double bn_momentum = 0.1;

    void validate() const;
};

// X~ = X + SED-A(BN(X)); X' = X~ + FFN(BN(X~)), FFN dim -> 2 dim -> relu -> dim.
class Block {
public:
    Block(const BlockConfig& cfg, std::mt19937_64& rng);

    Var forward(const Var& x, std::span<const double> dt, const Segments& steps, NormMode norm);
    std::vector<Var> parameters() const;

    SedAttention attention;
    BatchNorm norm_attn, norm_ffn;
    Var w1, b1, w2, b2;
};

// z[b,d] = mean of token rows (u,d) of segment b with M'[u,d] = 1. Rows
// [b·D + d] of the result; all-unobserved variates get zeros and a warning.
Var masked_time_aggregation(const Var& tokens, const Tensor& pooled_mask, const Segments& steps);

} // namespace sed
