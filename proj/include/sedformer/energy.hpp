#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sedformer/model.hpp"

namespace sed {

struct OpCounts {
    std::string layer;
    bool spiking = false;
    std::uint64_t n_mac = 0;
    std::uint64_t n_add = 0;
    std::uint64_t n_rd = 0;
    std::uint64_t n_wr = 0;
    std::uint64_t sop = 0;
    double firing_rate = 0.0;  // spiking layers only
};

// Per-operation energies in pJ. e_mac and e_add are the 45 nm figures; the
// other four are configured values.
struct EnergyModel {
    double e_mac = 4.6;
    double e_add = 0.9;
    double e_acc = 0.9;
    double e_cmp = 0.1;
    double e_rd = 5.0;
    double e_wr = 5.0;

    void validate() const;
    bool operator==(const EnergyModel&) const = default;
};

// Dense layer over t_eff steps: d_in d_out t_eff MACs, d_out (d_in - 1) t_eff
// adds, d_in d_out weight reads plus d_in t_eff activation reads, d_out t_eff writes.
OpCounts count_ann_layer(std::string layer, std::uint64_t d_in, std::uint64_t d_out, std::uint64_t t_eff);

// Spike-driven layer: sop = round(rate * slots * d_out); params are weight
// fetches charged at e_rd.
OpCounts count_snn_layer(std::string layer, double rate, std::uint64_t slots, std::uint64_t d_out,
                         std::uint64_t params = 0);

double layer_energy(const OpCounts& c, const EnergyModel& m);

struct EnergyReport {
    std::vector<OpCounts> layers;
    std::vector<double> layer_pj;
    double total_pj = 0.0;
    std::vector<OpCounts> reference;
    std::vector<double> reference_pj;
    double reference_total_pj = 0.0;
    EnergyModel model;

    double ratio() const { return total_pj > 0.0 ? reference_total_pj / total_pj : 0.0; }
    std::string json() const;
    std::string table() const;
};

EnergyReport energy_estimate(std::span<const OpCounts> layers, const EnergyModel& model,
                             std::span<const OpCounts> reference = {});

struct ModelOps {
    std::vector<OpCounts> layers;     // the event-driven model as run
    std::vector<OpCounts> reference;  // same layer graph, dense activations on the daily grid
    std::size_t events = 0;
    std::size_t grid_steps = 0;
    double firing_rate = 0.0;  // encoder spikes / spike slots
};

// Runs one eval-mode forward pass over `windows` and counts operations per
// layer. The encoder spike train feeds the token projection, which is the
// spike-driven layer; every other layer counts as dense over its actual
// number of steps. The reference counts the same graph on `history` grid days
// per window with the projection as a dense layer.
ModelOps count_model_ops(Model& model, std::span<const ForecastWindow> windows, std::size_t history = 90);

} // namespace sed
