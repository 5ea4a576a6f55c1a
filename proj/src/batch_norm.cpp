#include "sedformer/batch_norm.hpp"

#include <cmath>
#include <string>

#include "sedformer/error.hpp"

namespace sed {

BatchNorm::BatchNorm(std::size_t channels, double momentum, double epsilon)
    : gamma(parameter(Tensor({channels}, 1.0))),
      beta(parameter(Tensor({channels}, 0.0))),
      running_mean({channels}, 0.0),
      running_var({channels}, 1.0),
      channels_(channels),
      momentum_(momentum),
      epsilon_(epsilon) {
    if (!(momentum > 0.0 && momentum < 1.0)) throw ConfigError("batch norm momentum must lie in (0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("batch norm epsilon must be positive");
}

Var BatchNorm::forward(const Var& x, NormMode mode) {
    const Tensor& xv = x.value();
    const std::size_t C = channels_;
    if (xv.rank() == 0 || xv.shape().back() != C)
        throw DimensionError("batch_norm: trailing dim of " + shape_string(xv.shape()) +
                             " is not " + std::to_string(C));
    const std::size_t N = xv.size() / C;
    const Tensor& g = gamma.value();
    const Tensor& b = beta.value();

    if (mode == NormMode::eval) {
        Tensor out(xv.shape());
        std::vector<double> inv(C);
        for (std::size_t c = 0; c < C; ++c) inv[c] = 1.0 / std::sqrt(running_var[c] + epsilon_);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t k = i * C + c;
                out[k] = g[c] * (xv[k] - running_mean[c]) * inv[c] + b[c];
            }
        return make_op("batch_norm_eval", std::move(out), {x, gamma, beta}, [inv, C, N, rm = running_mean](Node& self) {
            Node& nx = *self.parents[0];
            Node& ng = *self.parents[1];
            Node& nb = *self.parents[2];
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t k = i * C + c;
                    const double gk = self.grad[k];
                    if (nx.requires_grad) nx.grad_buffer()[k] += gk * ng.value[c] * inv[c];
                    if (ng.requires_grad)
                        ng.grad_buffer()[c] += gk * (nx.value[k] - rm[c]) * inv[c];
                    if (nb.requires_grad) nb.grad_buffer()[c] += gk;
                }
        });
    }

    if (N < 2) throw UsageError("batch_norm in train mode needs at least 2 positions per channel");
    std::vector<double> mu(C, 0.0), var(C, 0.0);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t c = 0; c < C; ++c) mu[c] += xv[i * C + c];
    for (auto& m : mu) m /= static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t c = 0; c < C; ++c) {
            const double dlt = xv[i * C + c] - mu[c];
            var[c] += dlt * dlt;
        }
    for (auto& v : var) v /= static_cast<double>(N);

    Tensor xhat(xv.shape()), out(xv.shape());
    std::vector<double> inv(C);
    for (std::size_t c = 0; c < C; ++c) inv[c] = 1.0 / std::sqrt(var[c] + epsilon_);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t k = i * C + c;
            xhat[k] = (xv[k] - mu[c]) * inv[c];
            out[k] = g[c] * xhat[k] + b[c];
        }
    const double unbias = static_cast<double>(N) / static_cast<double>(N - 1);
    for (std::size_t c = 0; c < C; ++c) {
        running_mean[c] = (1.0 - momentum_) * running_mean[c] + momentum_ * mu[c];
        running_var[c] = (1.0 - momentum_) * running_var[c] + momentum_ * var[c] * unbias;
    }

    return make_op("batch_norm", std::move(out), {x, gamma, beta},
                   [xhat = std::move(xhat), inv = std::move(inv), C, N](Node& self) {
                       Node& nx = *self.parents[0];
                       Node& ng = *self.parents[1];
                       Node& nb = *self.parents[2];
                       std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
                       for (std::size_t i = 0; i < N; ++i)
                           for (std::size_t c = 0; c < C; ++c) {
                               const std::size_t k = i * C + c;
                               sum_g[c] += self.grad[k];
                               sum_gx[c] += self.grad[k] * xhat[k];
                           }
                       if (ng.requires_grad)
                           for (std::size_t c = 0; c < C; ++c) ng.grad_buffer()[c] += sum_gx[c];
                       if (nb.requires_grad)
                           for (std::size_t c = 0; c < C; ++c) nb.grad_buffer()[c] += sum_g[c];
                       if (nx.requires_grad) {
                           Tensor& gx = nx.grad_buffer();
                           const double n = static_cast<double>(N);
                           for (std::size_t i = 0; i < N; ++i)
                               for (std::size_t c = 0; c < C; ++c) {
                                   const std::size_t k = i * C + c;
                                   gx[k] += ng.value[c] * inv[c] / n *
                                            (n * self.grad[k] - sum_g[c] - xhat[k] * sum_gx[c]);
                               }
                       }
                   });
}

} // namespace sed
