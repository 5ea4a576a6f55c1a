#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sedformer/data.hpp"
#include "sedformer/energy.hpp"
#include "sedformer/model.hpp"
#include "sedformer/train.hpp"
#include "sedformer/viz.hpp"

namespace sed {

struct DataConfig {
    std::string source = "synthetic";  // synthetic or corpus
    std::string corpus;                // CSV path when source is corpus
    std::size_t limit = 0;             // corpus rows kept, 0 = all
    double rate = 0.5;
    std::uint64_t seed = 0;
    CleanConfig clean;
    WindowConfig windows;
    SyntheticConfig synthetic;

    void validate() const;
    bool operator==(const DataConfig&) const = default;
};

// Each grid is swept one at a time around the base model config.
struct SweepConfig {
    std::vector<double> tau = {1.0, 2.0, 3.0, 4.0};
    std::vector<std::size_t> stride = {2, 4, 8, 16};
    std::vector<std::size_t> blocks = {1, 2, 3, 4};
    std::vector<std::size_t> dim = {16, 32, 64, 128};
    std::vector<std::uint64_t> seeds = {0};

    void validate() const;
    bool operator==(const SweepConfig&) const = default;
};

struct RunConfig {
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    VizConfig viz;
    EnergyModel energy;
    SweepConfig sweep;

    void validate() const;
    bool operator==(const RunConfig&) const = default;

    nlohmann::json to_json() const;
    // Keys present in `j` override the current values; unknown keys are errors.
    void merge(const nlohmann::json& j);

    static RunConfig load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

} // namespace sed
