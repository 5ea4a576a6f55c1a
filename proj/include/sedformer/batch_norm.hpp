#pragma once

#include <cstddef>

#include "sedformer/autodiff.hpp"

namespace sed {

enum class NormMode { train, eval };

// Per-channel batch normalization; the channel axis is the trailing one and
// statistics pool every other axis (batch x events x tokens).
class BatchNorm {
public:
    explicit BatchNorm(std::size_t channels, double momentum = 0.1, double epsilon = 1e-5);

    Var forward(const Var& x, NormMode mode);

    std::size_t channels() const { return channels_; }
    double momentum() const { return momentum_; }
    double epsilon() const { return epsilon_; }

    Var gamma;
    Var beta;
    Tensor running_mean;
    Tensor running_var;

private:
    std::size_t channels_;
    double momentum_;
    double epsilon_;
};

} // namespace sed
