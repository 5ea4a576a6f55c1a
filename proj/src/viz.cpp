#include "sedformer/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "sedformer/error.hpp"

namespace sed {

void VizConfig::validate() const {
    if (sparse == 0 || dense == 0) throw ConfigError("viz: sample counts must be positive");
    if (grid < 2) throw ConfigError("viz: grid needs at least two points");
    if (!(split > 0.0 && split < horizon)) throw ConfigError("viz: split must lie inside (0, horizon)");
    if (!(noise >= 0.0)) throw ConfigError("viz: noise must be non-negative");
    if (!(tau > 0.0)) throw ConfigError("viz: tau must be positive");
    if (kernel.empty() || kernel.size() % 2 == 0) throw ConfigError("viz: kernel length must be odd");
}

double viz_baseline(double t) {
    auto bump = [](double t, double c, double w) { return std::exp(-0.5 * (t - c) * (t - c) / (w * w)); };
    return 0.5 * std::sin(2.0 * std::numbers::pi * t / 40.0) + bump(t, 70.0, 3.0) + bump(t, 85.0, 2.0);
}

VizSeries synth_viz_series(const VizConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> sparse(0.0, cfg.split);
    std::uniform_real_distribution<double> dense(std::nextafter(cfg.split, cfg.horizon), cfg.horizon);
    std::normal_distribution<double> eps(0.0, 1.0);
    VizSeries s;
    for (std::size_t i = 0; i < cfg.sparse; ++i) s.times.push_back(sparse(rng));
    for (std::size_t i = 0; i < cfg.dense; ++i) s.times.push_back(dense(rng));
    std::sort(s.times.begin(), s.times.end());
    for (double t : s.times) s.values.push_back(viz_baseline(t) + cfg.noise * eps(rng));
    for (std::size_t k = 0; k < cfg.grid; ++k) {
        const double t = static_cast<double>(k) * cfg.horizon / static_cast<double>(cfg.grid - 1);
        s.grid_times.push_back(t);
        s.grid_values.push_back(viz_baseline(t) + cfg.noise * eps(rng));
    }
    return s;
}

std::vector<std::uint8_t> delta_spikes(std::span<const double> x, double theta) {
    std::vector<std::uint8_t> s(x.size(), 0);
    for (std::size_t k = 1; k < x.size(); ++k) s[k] = std::abs(x[k] - x[k - 1]) >= theta ? 1 : 0;
    return s;
}

std::vector<std::uint8_t> conv_spikes(std::span<const double> x, std::span<const double> kernel, double tau_c) {
    const std::size_t n = x.size(), r = kernel.size() / 2;
    std::vector<double> y(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < kernel.size(); ++j) {
            const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(k + j) - static_cast<std::ptrdiff_t>(r);
            if (src >= 0 && src < static_cast<std::ptrdiff_t>(n)) y[k] += kernel[j] * x[static_cast<std::size_t>(src)];
        }
    double mean = 0.0, var = 0.0;
    for (double v : y) mean += v / static_cast<double>(n);
    for (double v : y) var += (v - mean) * (v - mean) / static_cast<double>(n);
    std::vector<std::uint8_t> s(n, 0);
    if (var <= 0.0) return s;
    const double sd = std::sqrt(var);
    for (std::size_t k = 0; k < n; ++k) s[k] = (y[k] - mean) / sd >= tau_c ? 1 : 0;
    return s;
}

std::vector<std::uint8_t> sedse_spikes(std::span<const double> t, std::span<const double> x, double tau,
                                       double gamma, double theta, double v_th) {
    if (t.size() != x.size()) throw DataError("sedse_spikes: times and values differ in length");
    std::vector<std::uint8_t> s(t.size(), 0);
    double v = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double beta = k == 0 ? 1.0 : std::exp(-(t[k] - t[k - 1]) / tau);
        const double m = beta * v + (1.0 - beta) * gamma * (x[k] - theta);
        s[k] = m >= v_th ? 1 : 0;
        v = m - v_th * s[k];
    }
    return s;
}

SpikeTrains baseline_encoders(const VizSeries& s, const VizConfig& cfg) {
    return {delta_spikes(s.grid_values, cfg.delta_threshold), conv_spikes(s.grid_values, cfg.kernel, cfg.conv_threshold),
            sedse_spikes(s.times, s.values, cfg.tau, cfg.gamma, cfg.theta, cfg.v_th)};
}

void write_raster_csv(const std::filesystem::path& path, const VizSeries& s, const SpikeTrains& trains) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "time,encoder,spike\n" << std::setprecision(17);
    for (std::size_t k = 0; k < s.grid_times.size(); ++k) out << s.grid_times[k] << ",delta," << int(trains.delta[k]) << '\n';
    for (std::size_t k = 0; k < s.grid_times.size(); ++k) out << s.grid_times[k] << ",conv," << int(trains.conv[k]) << '\n';
    for (std::size_t k = 0; k < s.times.size(); ++k) out << s.times[k] << ",sedse," << int(trains.sedse[k]) << '\n';
}

void write_series_csv(const std::filesystem::path& path, const VizSeries& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "kind,t,x\n" << std::setprecision(17);
    for (std::size_t k = 0; k < s.times.size(); ++k) out << "irregular," << s.times[k] << ',' << s.values[k] << '\n';
    for (std::size_t k = 0; k < s.grid_times.size(); ++k)
        out << "grid," << s.grid_times[k] << ',' << s.grid_values[k] << '\n';
}

std::string raster_svg(const VizSeries& s, const SpikeTrains& trains, const VizConfig& cfg) {
    constexpr double width = 800, left = 90, right = 20, row_h = 90, top = 20;
    const double plot_w = width - left - right;
    const double height = top + 3 * row_h + 40;
    auto x_of = [&](double t) { return left + plot_w * t / cfg.horizon; };

    double lo = s.grid_values.front(), hi = lo;
    for (double v : s.grid_values) lo = std::min(lo, v), hi = std::max(hi, v);
    for (double v : s.values) lo = std::min(lo, v), hi = std::max(hi, v);
    if (hi - lo < 1e-12) hi = lo + 1.0;

    std::ostringstream o;
    o << std::fixed << std::setprecision(2);
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    struct Row {
        const char* label;
        const std::vector<double>* times;
        const std::vector<double>* values;
        const std::vector<std::uint8_t>* spikes;
    };
    const Row rows[] = {{"Delta", &s.grid_times, &s.grid_values, &trains.delta},
                        {"Conv", &s.grid_times, &s.grid_values, &trains.conv},
                        {"SED-SE", &s.times, &s.values, &trains.sedse}};
    for (std::size_t r = 0; r < 3; ++r) {
        const double y0 = top + static_cast<double>(r) * row_h, y1 = y0 + row_h - 10;
        auto y_of = [&](double v) { return y1 - (y1 - y0) * (v - lo) / (hi - lo); };
        o << "<g class=\"row\" id=\"" << rows[r].label << "\">\n";
        o << "<text x=\"10\" y=\"" << (y0 + y1) / 2 << "\" font-family=\"sans-serif\" font-size=\"13\">"
          << rows[r].label << "</text>\n";
        o << "<rect x=\"" << left << "\" y=\"" << y0 << "\" width=\"" << plot_w << "\" height=\"" << y1 - y0
          << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
        o << "<polyline fill=\"none\" stroke=\"#999\" stroke-width=\"1\" points=\"";
        for (std::size_t k = 0; k < rows[r].times->size(); ++k)
            o << (k ? " " : "") << x_of((*rows[r].times)[k]) << ',' << y_of((*rows[r].values)[k]);
        o << "\"/>\n";
        for (std::size_t k = 0; k < rows[r].times->size(); ++k) {
            if (!(*rows[r].spikes)[k]) continue;
            const double x = x_of((*rows[r].times)[k]);
            o << "<line class=\"spike\" x1=\"" << x << "\" y1=\"" << y0 << "\" x2=\"" << x << "\" y2=\"" << y1
              << "\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n";
        }
        o << "</g>\n";
    }
    const double axis_y = top + 3 * row_h;
    o << "<line x1=\"" << left << "\" y1=\"" << axis_y << "\" x2=\"" << left + plot_w << "\" y2=\"" << axis_y
      << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double t = cfg.horizon * k / 5.0;
        o << "<text x=\"" << x_of(t) << "\" y=\"" << axis_y + 16 << "\" font-family=\"sans-serif\" font-size=\"11\" "
          << "text-anchor=\"middle\">" << std::setprecision(0) << t << std::setprecision(2) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

} // namespace sed
