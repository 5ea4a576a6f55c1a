#include "sedformer/energy.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "sedformer/error.hpp"

namespace sed {

void EnergyModel::validate() const {
    for (double e : {e_mac, e_add, e_acc, e_cmp, e_rd, e_wr})
        if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("energy costs must be finite and non-negative");
}

OpCounts count_ann_layer(std::string layer, std::uint64_t d_in, std::uint64_t d_out, std::uint64_t t_eff) {
    if (d_in == 0 || d_out == 0) throw ConfigError("layer " + layer + ": dimensions must be positive");
    OpCounts c;
    c.layer = std::move(layer);
    c.n_mac = d_in * d_out * t_eff;
    c.n_add = d_out * (d_in - 1) * t_eff;
    c.n_rd = t_eff == 0 ? 0 : d_in * d_out + d_in * t_eff;
    c.n_wr = d_out * t_eff;
    return c;
}

OpCounts count_snn_layer(std::string layer, double rate, std::uint64_t slots, std::uint64_t d_out,
                         std::uint64_t params) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("layer " + layer + ": firing rate must lie in [0,1]");
    OpCounts c;
    c.layer = std::move(layer);
    c.spiking = true;
    c.firing_rate = rate;
    c.sop = static_cast<std::uint64_t>(std::llround(rate * static_cast<double>(slots) * static_cast<double>(d_out)));
    c.n_rd = slots == 0 ? 0 : params;
    return c;
}

namespace {

// Costs are quantized to attojoules and summed as extended-precision
// integers, so decimal pJ figures multiply out exactly.
long double attojoules(double pj) { return std::round(static_cast<long double>(pj) * 1e6L); }

} // namespace

double layer_energy(const OpCounts& c, const EnergyModel& m) {
    auto n = [](std::uint64_t v) { return static_cast<long double>(v); };
    long double aj = 0.0L;
    if (c.spiking) {
        aj = n(c.sop) * (attojoules(m.e_acc) + attojoules(m.e_cmp) + attojoules(m.e_rd) + attojoules(m.e_wr)) +
             n(c.n_rd) * attojoules(m.e_rd);
    } else {
        aj = n(c.n_mac) * attojoules(m.e_mac) + n(c.n_add) * attojoules(m.e_add) + n(c.n_rd) * attojoules(m.e_rd) +
             n(c.n_wr) * attojoules(m.e_wr);
    }
    return static_cast<double>(aj / 1e6L);
}

EnergyReport energy_estimate(std::span<const OpCounts> layers, const EnergyModel& model,
                             std::span<const OpCounts> reference) {
    model.validate();
    EnergyReport r;
    r.model = model;
    r.layers.assign(layers.begin(), layers.end());
    r.reference.assign(reference.begin(), reference.end());
    for (const auto& c : r.layers) {
        r.layer_pj.push_back(layer_energy(c, model));
        r.total_pj += r.layer_pj.back();
    }
    for (const auto& c : r.reference) {
        r.reference_pj.push_back(layer_energy(c, model));
        r.reference_total_pj += r.reference_pj.back();
    }
    return r;
}

namespace {

nlohmann::json layers_json(const std::vector<OpCounts>& layers, const std::vector<double>& pj) {
    auto arr = nlohmann::json::array();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& c = layers[i];
        nlohmann::json j = {{"layer", c.layer}, {"spiking", c.spiking}, {"n_mac", c.n_mac}, {"n_add", c.n_add},
                            {"n_rd", c.n_rd},   {"n_wr", c.n_wr},       {"sop", c.sop},     {"pj", pj[i]}};
        if (c.spiking) j["firing_rate"] = c.firing_rate;
        arr.push_back(j);
    }
    return arr;
}

void table_rows(std::ostringstream& o, const std::vector<OpCounts>& layers, const std::vector<double>& pj) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& c = layers[i];
        o << std::left << std::setw(22) << c.layer << std::right << std::setw(6) << (c.spiking ? "snn" : "ann")
          << std::setw(14) << c.n_mac << std::setw(14) << c.n_add << std::setw(12) << c.n_rd << std::setw(12)
          << c.n_wr << std::setw(12) << c.sop << std::setw(16) << std::fixed << std::setprecision(1) << pj[i] << '\n';
    }
}

} // namespace

std::string EnergyReport::json() const {
    nlohmann::json j;
    j["energy_pj"] = {{"e_mac", model.e_mac}, {"e_add", model.e_add}, {"e_acc", model.e_acc},
                      {"e_cmp", model.e_cmp}, {"e_rd", model.e_rd},   {"e_wr", model.e_wr}};
    j["energy_note"] = "e_mac and e_add are 45 nm figures; e_acc, e_cmp, e_rd, e_wr are configurable assumptions";
    j["layers"] = layers_json(layers, layer_pj);
    j["total_pj"] = total_pj;
    j["reference"] = layers_json(reference, reference_pj);
    j["reference_total_pj"] = reference_total_pj;
    j["reference_over_model"] = ratio();
    return j.dump(2) + "\n";
}

std::string EnergyReport::table() const {
    std::ostringstream o;
    auto header = [&](const char* title) {
        o << title << '\n'
          << std::left << std::setw(22) << "layer" << std::right << std::setw(6) << "kind" << std::setw(14) << "mac"
          << std::setw(14) << "add" << std::setw(12) << "rd" << std::setw(12) << "wr" << std::setw(12) << "sop"
          << std::setw(16) << "pJ" << '\n';
    };
    header("model");
    table_rows(o, layers, layer_pj);
    o << "total " << std::fixed << std::setprecision(1) << total_pj << " pJ\n\n";
    if (!reference.empty()) {
        header("dense grid reference");
        table_rows(o, reference, reference_pj);
        o << "total " << std::fixed << std::setprecision(1) << reference_total_pj << " pJ\n";
        o << "reference / model " << std::setprecision(2) << ratio() << "x\n";
    }
    o << "(e_acc, e_cmp, e_rd, e_wr are configurable assumptions)\n";
    return o.str();
}

ModelOps count_model_ops(Model& model, std::span<const ForecastWindow> windows, std::size_t history) {
    if (windows.empty()) throw DataError("energy accounting needs at least one window");
    const auto& cfg = model.config();
    const auto r = model.forward(windows, NormMode::eval);

    const std::uint64_t D = cfg.variates, C = cfg.channels, d = cfg.dim, k = cfg.kernel;
    const std::uint64_t dh = d / cfg.heads;
    const std::uint64_t K = r.events;
    const std::uint64_t Kp = r.pooled.mask.rows();
    const std::uint64_t Q = r.truths.size();
    const std::uint64_t W = windows.size();
    const std::uint64_t K_ref = W * history;
    const std::uint64_t Kp_ref = W * (history / cfg.stride);

    const Tensor pooled = r.pooled.spikes.value();
    double fired = 0.0;
    for (double v : pooled.data()) fired += v;
    const std::uint64_t slots = Kp * D * C;
    const double rate = slots == 0 ? 0.0 : fired / static_cast<double>(slots);

    auto graph = [&](std::uint64_t steps, std::uint64_t pooled_steps, bool spiking) {
        std::vector<OpCounts> g;
        g.push_back(count_ann_layer("encoder.conv", k, C, steps * D));
        g.push_back(count_ann_layer("encoder.neuron", 1, C, steps * D));
        if (spiking) g.push_back(count_snn_layer("projection", rate, pooled_steps * D * C, d, C * d));
        else g.push_back(count_ann_layer("projection", C, d, pooled_steps * D));
        g.push_back(count_ann_layer("time_embedding", 1, d, pooled_steps));
        const std::uint64_t T = pooled_steps * D;
        for (std::size_t b = 0; b < cfg.blocks; ++b) {
            const std::string p = "block" + std::to_string(b) + ".";
            g.push_back(count_ann_layer(p + "qkv", d, 3 * d, T));
            g.push_back(count_ann_layer(p + "filters", 1, 3 * d, T));
            g.push_back(count_ann_layer(p + "attention", dh, 2 * d, T));
            g.push_back(count_ann_layer(p + "out", d, d, T));
            g.push_back(count_ann_layer(p + "ffn1", d, 2 * d, T));
            g.push_back(count_ann_layer(p + "ffn2", 2 * d, d, T));
        }
        g.push_back(count_ann_layer("aggregation", 1, d, T));
        g.push_back(count_ann_layer("decoder.time", 1, d, Q));
        g.push_back(count_ann_layer("decoder.fc1", 2 * d, 2 * d, Q));
        g.push_back(count_ann_layer("decoder.fc2", 2 * d, 2 * d, Q));
        g.push_back(count_ann_layer("decoder.fc3", 2 * d, 1, Q));
        return g;
    };

    ModelOps ops;
    ops.layers = graph(K, Kp, true);
    ops.reference = graph(K_ref, Kp_ref, false);
    ops.events = K;
    ops.grid_steps = K_ref;
    ops.firing_rate = rate;
    return ops;
}

} // namespace sed
