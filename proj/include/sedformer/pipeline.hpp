#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sedformer/config.hpp"

namespace sed {

// Windows in the original scale plus the standardizer fit on training history.
struct Dataset {
    std::size_t variates = 0;
    double rate = 0.0;
    std::uint64_t seed = 0;
    std::string source;
    Standardizer standardizer;
    std::vector<ForecastWindow> train, val, test;

    std::vector<ForecastWindow> scaled(std::span<const ForecastWindow> ws) const { return standardizer.apply(ws); }
};

// Clean, sparsify, window, split, fit the standardizer.
Dataset prepare_dataset(const DataConfig& cfg);

// Directory layout: train.csv, val.csv, test.csv and meta.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds, const RunConfig& resolved);
Dataset read_dataset(const std::filesystem::path& dir);

struct TrainedModel {
    Model model;
    TrainResult result;
};

// Trains on the standardized train split, selecting on the standardized val split.
TrainedModel fit_model(const Dataset& ds, ModelConfig model, const TrainConfig& train,
                       const EpochCallback& on_epoch = {});

struct EvalRow {
    std::string model;
    std::string split;
    Metrics metrics;
};

// Flat MSE/MAE in standardized units for the model and the naive baselines.
std::vector<EvalRow> evaluate(Model& model, const Dataset& ds);

void write_metrics_csv(const std::filesystem::path& path, double rate, std::span<const EvalRow> rows,
                       bool with_model_column);

// A sweep cell varies one grid parameter around the base model config.
struct SweepCell {
    std::string param;
    double value = 0.0;      // requested grid value
    double effective = 0.0;  // value actually used
    std::uint64_t seed = 0;
    Metrics val, test;
    std::size_t best_epoch = 0;
};

// Runs every grid value of `grids` for every seed; cells equal to an earlier
// configuration reuse its result.
std::vector<SweepCell> run_sweep(const Dataset& ds, const ModelConfig& base, const TrainConfig& train,
                                 const SweepConfig& grids, const std::function<void(const SweepCell&)>& on_cell = {});

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepCell> cells);

} // namespace sed
