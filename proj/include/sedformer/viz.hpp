#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sed {

struct VizConfig {
    double horizon = 100.0;   // time axis is [0, horizon]
    double split = 60.0;      // sparse phase [0, split], dense phase (split, horizon]
    std::size_t sparse = 8;
    std::size_t dense = 40;
    std::size_t grid = 100;
    double noise = 0.02;
    std::uint64_t seed = 7;

    double delta_threshold = 0.1;
    std::vector<double> kernel = {0.25, 0.5, 0.25};
    double conv_threshold = 1.0;

    double tau = 1.0;
    double gamma = 4.0;
    double theta = 0.6;
    double v_th = 1.0;

    void validate() const;
    bool operator==(const VizConfig&) const = default;
};

// 0.5 sin(2 pi t / 40) plus unit-height Gaussian bumps at 70 (width 3) and 85 (width 2).
double viz_baseline(double t);

struct VizSeries {
    std::vector<double> times, values;            // irregular, sorted
    std::vector<double> grid_times, grid_values;  // t_k = k * horizon / (grid - 1)
};

VizSeries synth_viz_series(const VizConfig& cfg);

// s_k = 1(|x_k - x_{k-1}| >= theta); the first sample never fires.
std::vector<std::uint8_t> delta_spikes(std::span<const double> x, double theta);

// y = kernel * x (same length, zero padded), s_k = 1((y_k - mean y) / std y >= tau_c).
std::vector<std::uint8_t> conv_spikes(std::span<const double> x, std::span<const double> kernel, double tau_c);

// Scalar event-aligned LIF on irregular stamps: beta_k = exp(-(t_k - t_{k-1}) / tau),
// m_k = beta_k v_{k-1} + (1 - beta_k) gamma (x_k - theta); the first gap is zero.
std::vector<std::uint8_t> sedse_spikes(std::span<const double> t, std::span<const double> x, double tau,
                                       double gamma, double theta, double v_th);

struct SpikeTrains {
    std::vector<std::uint8_t> delta, conv, sedse;
};

SpikeTrains baseline_encoders(const VizSeries& s, const VizConfig& cfg);

// Long rows: time,encoder,spike over every slot of every encoder.
void write_raster_csv(const std::filesystem::path& path, const VizSeries& s, const SpikeTrains& trains);
// Samples: kind,t,x with kind irregular or grid.
void write_series_csv(const std::filesystem::path& path, const VizSeries& s);
std::string raster_svg(const VizSeries& s, const SpikeTrains& trains, const VizConfig& cfg);

} // namespace sed
