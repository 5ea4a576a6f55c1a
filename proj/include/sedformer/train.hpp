#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sedformer/model.hpp"

namespace sed {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::optional<double> grad_clip;  // global L2 norm

    void validate() const;
    bool operator==(const AdamConfig&) const = default;
};

class Adam {
public:
    Adam(std::vector<Var> params, const AdamConfig& cfg);

    // Applies one update from the accumulated grads; parameters without a
    // grad are treated as having a zero grad.
    void step();
    std::size_t steps() const { return t_; }

private:
    std::vector<Var> params_;
    std::vector<Tensor> m_, v_;
    AdamConfig cfg_;
    std::size_t t_ = 0;
};

double grad_norm(std::span<const Var> params);

struct TrainConfig {
    AdamConfig adam;
    std::size_t batch_size = 16;
    std::size_t epochs = 30;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_mse = 0.0;
    double val_mae = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_mse = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Minibatch Adam on the per-window loss. When `val` is non-empty the model
// ends in the state with the lowest validation flat MSE; otherwise in its
// final state. NumericError from a step is rethrown with epoch and batch.
TrainResult train(Model& model, std::span<const ForecastWindow> train_set,
                  std::span<const ForecastWindow> val, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

// Eval-mode predictions in query order.
std::vector<double> predict(Model& model, std::span<const ForecastWindow> windows,
                            std::size_t batch_size = 16);
std::vector<double> truths_of(std::span<const ForecastWindow> windows);

// Text checkpoint: a version line, then for each tensor its name, rank,
// dimensions and values.
void save_checkpoint(const std::filesystem::path& path, Model& model);
void load_checkpoint(const std::filesystem::path& path, Model& model);

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);

} // namespace sed
