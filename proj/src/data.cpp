#include "sedformer/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "sedformer/error.hpp"
#include "sedformer/log.hpp"

namespace sed {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

bool is_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u})
        if (s[i] < '0' || s[i] > '9') return false;
    return true;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && *b == ' ') ++b;
    while (e > b && e[-1] == ' ') --e;
    if (b < e && *b == '+') ++b;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e && std::isfinite(out);
}

std::vector<std::size_t> known_indices(std::span<const double> x) {
    std::vector<std::size_t> k;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isnan(x[i])) k.push_back(i);
    return k;
}

double lagrange3(double t, const double (&ts)[3], const double (&ys)[3]) {
    double out = 0.0;
    for (int i = 0; i < 3; ++i) {
        double l = 1.0;
        for (int j = 0; j < 3; ++j)
            if (j != i) l *= (t - ts[j]) / (ts[i] - ts[j]);
        out += l * ys[i];
    }
    return out;
}

void nearest_fill(std::vector<double>& y, const std::vector<std::size_t>& known) {
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!std::isnan(y[i])) continue;
        const auto it = std::lower_bound(known.begin(), known.end(), i);
        std::size_t best;
        if (it == known.end()) best = known.back();
        else if (it == known.begin()) best = *it;
        else best = (i - *(it - 1) <= *it - i) ? *(it - 1) : *it;
        y[i] = y[best];
    }
}

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
    const double hi = v[n / 2];
    if (n % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
    return 0.5 * (lo + hi);
}

} // namespace

std::size_t RawSeries::gaps() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }));
}

std::vector<RawSeries> load_csv(const std::filesystem::path& path, std::size_t limit) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
    const auto header = split_csv_line(line);
    const bool labelled = !header.empty() && !is_date(header.front());
    const std::size_t first = labelled ? 1 : 0;
    if (header.size() <= first) throw ParseError(path.string() + ": header has no date columns");
    const std::size_t days = header.size() - first;

    std::vector<RawSeries> out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        if (limit > 0 && out.size() == limit) break;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw ParseError(path.string() + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                             " cells, header has " + std::to_string(header.size()));
        RawSeries s;
        s.name = labelled ? cells.front() : "series" + std::to_string(out.size());
        s.values.resize(days);
        for (std::size_t c = 0; c < days; ++c) {
            const std::string& cell = cells[first + c];
            if (cell.empty()) {
                s.values[c] = kNaN;
            } else if (!parse_double(cell, s.values[c])) {
                throw ParseError(path.string() + ": malformed number '" + cell + "' at row " + std::to_string(row) +
                                 ", column " + std::to_string(first + c + 1));
            }
        }
        out.push_back(std::move(s));
    }
    if (limit > 0 && out.size() < limit)
        throw DataError(path.string() + ": requested " + std::to_string(limit) + " series, file has " +
                        std::to_string(out.size()));
    return out;
}

std::vector<double> lagrange_fill(std::span<const double> x, std::size_t gap_cap, LongGaps long_gaps) {
    std::vector<double> y(x.begin(), x.end());
    const auto known = known_indices(x);
    if (known.size() == y.size()) return y;
    if (known.empty()) throw DataError("lagrange_fill: series has no known values");
    if (known.size() < 3) {
        warn("lagrange_fill: fewer than 3 known points, using nearest-value fill");
        nearest_fill(y, known);
        return y;
    }
    std::size_t i = 0;
    while (i < y.size()) {
        if (!std::isnan(x[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < y.size() && std::isnan(x[j])) ++j;  // gap is [i, j)
        if (i == 0) {
            std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(j), x[j]);
        } else if (j == y.size()) {
            std::fill(y.begin() + static_cast<std::ptrdiff_t>(i), y.end(), x[i - 1]);
        } else if (j - i <= gap_cap) {
            const auto right = std::lower_bound(known.begin(), known.end(), j);
            const auto left_count = static_cast<std::size_t>(right - known.begin());
            std::size_t pick[3];
            if (left_count >= 2) {
                pick[0] = *(right - 2);
                pick[1] = *(right - 1);
                pick[2] = *right;
            } else {
                pick[0] = *(right - 1);
                pick[1] = *right;
                pick[2] = *(right + 1);
            }
            const double ts[3] = {double(pick[0]), double(pick[1]), double(pick[2])};
            const double ys[3] = {x[pick[0]], x[pick[1]], x[pick[2]]};
            for (std::size_t k = i; k < j; ++k) y[k] = lagrange3(static_cast<double>(k), ts, ys);
        } else if (long_gaps == LongGaps::bridge) {
            const double a = x[i - 1], b = x[j];
            const double span = static_cast<double>(j - i + 1);
            for (std::size_t k = i; k < j; ++k) y[k] = a + (b - a) * static_cast<double>(k - i + 1) / span;
        }
        i = j;
    }
    return y;
}

std::vector<double> mad_smooth(std::span<const double> x, double tau_out, std::size_t w) {
    if (w < 3 || w % 2 == 0) throw ConfigError("mad_smooth: window must be odd and at least 3");
    if (!(tau_out > 0.0)) throw ConfigError("mad_smooth: outlier threshold must be positive");
    std::vector<double> y(x.begin(), x.end());
    std::vector<double> vals;
    for (double v : x)
        if (!std::isnan(v)) vals.push_back(v);
    if (vals.empty()) return y;
    const double mu = median_of(vals);
    for (double& v : vals) v = std::abs(v - mu);
    const double sigma = median_of(vals);
    const std::size_t r = w / 2;
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (std::isnan(x[t])) continue;
        const double dev = std::abs(x[t] - mu);
        const bool outlier = sigma > 0.0 ? dev / sigma > tau_out : dev > 0.0;
        if (!outlier) continue;
        std::vector<double> local;
        for (std::size_t k = t >= r ? t - r : 0; k <= std::min(x.size() - 1, t + r); ++k)
            if (!std::isnan(x[k])) local.push_back(x[k]);
        y[t] = median_of(local);
    }
    return y;
}

std::vector<double> spline_fill(std::span<const double> x) {
    std::vector<double> y(x.begin(), x.end());
    const auto known = known_indices(x);
    if (known.size() == y.size()) return y;
    if (known.empty()) throw DataError("spline_fill: series has no known values");
    if (known.size() < 4) {
        const auto bridged = lagrange_fill(x, 0, LongGaps::bridge);
        return bridged;
    }
    // natural cubic spline: second derivatives M with M_0 = M_n = 0
    const std::size_t n = known.size();
    std::vector<double> h(n - 1), M(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) h[i] = static_cast<double>(known[i + 1] - known[i]);
    std::vector<double> diag(n, 1.0), upper(n, 0.0), lower(n, 0.0), rhs(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        lower[i] = h[i - 1];
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        upper[i] = h[i];
        rhs[i] = 6.0 * ((x[known[i + 1]] - x[known[i]]) / h[i] - (x[known[i]] - x[known[i - 1]]) / h[i - 1]);
    }
    for (std::size_t i = 1; i < n; ++i) {
        const double f = lower[i] / diag[i - 1];
        diag[i] -= f * upper[i - 1];
        rhs[i] -= f * rhs[i - 1];
    }
    M[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) M[i] = (rhs[i] - upper[i] * M[i + 1]) / diag[i];

    for (std::size_t t = 0; t < y.size(); ++t) {
        if (!std::isnan(y[t])) continue;
        if (t < known.front()) {
            y[t] = x[known.front()];
            continue;
        }
        if (t > known.back()) {
            y[t] = x[known.back()];
            continue;
        }
        const auto hi = static_cast<std::size_t>(std::upper_bound(known.begin(), known.end(), t) - known.begin());
        const std::size_t i = hi - 1;
        const double a = static_cast<double>(known[hi]) - static_cast<double>(t);
        const double b = static_cast<double>(t) - static_cast<double>(known[i]);
        const double hh = h[i];
        y[t] = M[i] * a * a * a / (6 * hh) + M[hi] * b * b * b / (6 * hh) +
               (x[known[i]] / hh - M[i] * hh / 6) * a + (x[known[hi]] / hh - M[hi] * hh / 6) * b;
    }
    return y;
}

void CleanConfig::validate() const {
    if (window < 3 || window % 2 == 0) throw ConfigError("clean: window must be odd and at least 3");
    if (gap_cap < 1) throw ConfigError("clean: gap cap must be at least 1");
    if (!(outlier > 0.0)) throw ConfigError("clean: outlier threshold must be positive");
}

std::vector<double> clean_series(std::span<const double> x, const CleanConfig& cfg) {
    cfg.validate();
    auto y = lagrange_fill(x, cfg.gap_cap, LongGaps::keep);
    y = mad_smooth(y, cfg.outlier, cfg.window);
    return spline_fill(y);
}

std::vector<std::uint8_t> mcar_mask(std::size_t length, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("sparsifying rate must lie in [0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::uint8_t> keep(length);
    for (auto& k : keep) k = u(rng) >= rate ? 1 : 0;
    return keep;
}

void WindowConfig::validate() const {
    if (history == 0 || horizon == 0 || stride == 0)
        throw ConfigError("windows: history, horizon and stride must be positive");
}

std::vector<ForecastWindow> make_windows(std::span<const GridSeries> series, const WindowConfig& cfg) {
    cfg.validate();
    std::vector<ForecastWindow> out;
    std::size_t dropped = 0;
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& g = series[s];
        const std::size_t D = g.variates(), T = g.length();
        if (T < cfg.history + cfg.horizon) {
            warn("series " + std::to_string(s) + " has " + std::to_string(T) + " days, shorter than one window; skipped");
            continue;
        }
        for (std::size_t start = 0; start + cfg.history + cfg.horizon <= T; start += cfg.stride) {
            ForecastWindow w;
            w.series = s;
            w.start = start;
            std::vector<std::size_t> days;
            for (std::size_t t = start; t < start + cfg.history; ++t)
                for (std::size_t d = 0; d < D; ++d)
                    if (g.keep[d][t]) {
                        days.push_back(t);
                        break;
                    }
            if (days.empty()) {
                ++dropped;
                continue;
            }
            w.history.times.resize(days.size());
            w.history.values = Tensor({days.size(), D});
            w.history.mask = Tensor({days.size(), D});
            for (std::size_t k = 0; k < days.size(); ++k) {
                w.history.times[k] = static_cast<double>(days[k] - start);
                for (std::size_t d = 0; d < D; ++d)
                    if (g.keep[d][days[k]]) {
                        w.history.mask.at(k, d) = 1.0;
                        w.history.values.at(k, d) = g.clean[d][days[k]];
                    }
            }
            for (std::size_t d = 0; d < D; ++d)
                for (std::size_t t = start + cfg.history; t < start + cfg.history + cfg.horizon; ++t)
                    w.queries.push_back({d, static_cast<double>(t - start), g.clean[d][t]});
            out.push_back(std::move(w));
        }
    }
    if (dropped > 0) warn(std::to_string(dropped) + " window(s) without observed history events dropped");
    return out;
}

Splits split_windows(std::vector<ForecastWindow> windows) {
    std::map<std::size_t, std::vector<ForecastWindow>> by_series;
    for (auto& w : windows) by_series[w.series].push_back(std::move(w));
    Splits out;
    for (auto& [s, ws] : by_series) {
        std::stable_sort(ws.begin(), ws.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
        const auto n = static_cast<double>(ws.size());
        const auto n_train = static_cast<std::size_t>(std::lround(0.7 * n));
        const auto n_val = std::min(ws.size() - n_train, static_cast<std::size_t>(std::lround(0.1 * n)));
        for (std::size_t i = 0; i < ws.size(); ++i) {
            auto& dst = i < n_train ? out.train : i < n_train + n_val ? out.val : out.test;
            dst.push_back(std::move(ws[i]));
        }
    }
    return out;
}

Standardizer Standardizer::fit(std::span<const ForecastWindow> train, std::size_t variates) {
    Standardizer s;
    s.mean.assign(variates, 0.0);
    s.scale.assign(variates, 1.0);
    std::vector<double> sum(variates, 0.0), sq(variates, 0.0), n(variates, 0.0);
    for (const auto& w : train)
        for (std::size_t k = 0; k < w.history.events(); ++k)
            for (std::size_t d = 0; d < variates; ++d)
                if (w.history.mask.at(k, d) == 1.0) {
                    const double v = w.history.values.at(k, d);
                    sum[d] += v;
                    sq[d] += v * v;
                    n[d] += 1.0;
                }
    for (std::size_t d = 0; d < variates; ++d) {
        if (n[d] == 0.0) {
            warn("standardizer: variate " + std::to_string(d) + " has no training observations");
            continue;
        }
        s.mean[d] = sum[d] / n[d];
        const double var = std::max(0.0, sq[d] / n[d] - s.mean[d] * s.mean[d]);
        s.scale[d] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    return s;
}

ForecastWindow Standardizer::apply(const ForecastWindow& w) const {
    ForecastWindow out = w;
    const std::size_t D = mean.size();
    for (std::size_t k = 0; k < out.history.events(); ++k)
        for (std::size_t d = 0; d < D; ++d)
            if (out.history.mask.at(k, d) == 1.0)
                out.history.values.at(k, d) = (out.history.values.at(k, d) - mean[d]) / scale[d];
    for (auto& q : out.queries) q.truth = (q.truth - mean[q.variate]) / scale[q.variate];
    return out;
}

std::vector<ForecastWindow> Standardizer::apply(std::span<const ForecastWindow> ws) const {
    std::vector<ForecastWindow> out;
    out.reserve(ws.size());
    for (const auto& w : ws) out.push_back(apply(w));
    return out;
}

double Standardizer::invert(std::size_t variate, double value) const { return value * scale[variate] + mean[variate]; }

std::vector<double> persistence_forecast(std::span<const ForecastWindow> windows) {
    std::vector<double> out;
    for (const auto& w : windows) {
        const std::size_t D = w.history.variates();
        std::vector<double> last(D, 0.0);
        for (std::size_t k = 0; k < w.history.events(); ++k)
            for (std::size_t d = 0; d < D; ++d)
                if (w.history.mask.at(k, d) == 1.0) last[d] = w.history.values.at(k, d);
        for (const auto& q : w.queries) out.push_back(last[q.variate]);
    }
    return out;
}

std::vector<double> mean_forecast(std::span<const ForecastWindow> windows) {
    std::vector<double> out;
    for (const auto& w : windows) {
        const std::size_t D = w.history.variates();
        std::vector<double> sum(D, 0.0), n(D, 0.0);
        for (std::size_t k = 0; k < w.history.events(); ++k)
            for (std::size_t d = 0; d < D; ++d)
                if (w.history.mask.at(k, d) == 1.0) {
                    sum[d] += w.history.values.at(k, d);
                    n[d] += 1.0;
                }
        for (const auto& q : w.queries) out.push_back(n[q.variate] > 0.0 ? sum[q.variate] / n[q.variate] : 0.0);
    }
    return out;
}

std::vector<std::vector<std::vector<double>>> synthetic_suite(const SyntheticConfig& cfg) {
    if (cfg.series == 0 || cfg.variates == 0 || cfg.length == 0) throw ConfigError("synthetic suite: empty shape");
    if (!(cfg.period > 0.0)) throw ConfigError("synthetic suite: period must be positive");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> amp(0.6, 1.4), phase(0.0, 2.0 * std::numbers::pi), level(-1.0, 1.0), slope(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<std::vector<std::vector<double>>> out(cfg.series);
    for (auto& s : out) {
        s.resize(cfg.variates);
        for (auto& v : s) {
            const double a = amp(rng), p = phase(rng), l = level(rng), b = slope(rng);
            v.resize(cfg.length);
            for (std::size_t t = 0; t < cfg.length; ++t) {
                const double td = static_cast<double>(t);
                v[t] = l + b * td / static_cast<double>(cfg.length) + a * std::sin(2.0 * std::numbers::pi * td / cfg.period + p) +
                       cfg.noise * noise(rng);
            }
        }
    }
    return out;
}

GridSeries prepare_corpus(std::span<const RawSeries> rows, const CleanConfig& clean, double rate, std::uint64_t seed) {
    if (rows.empty()) throw DataError("corpus has no series");
    GridSeries g;
    const std::size_t T = rows.front().values.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].values.size() != T) throw DataError("corpus rows differ in length");
        g.clean.push_back(clean_series(rows[i].values, clean));
        g.keep.push_back(mcar_mask(T, rate, seed ^ static_cast<std::uint64_t>(i)));
    }
    return g;
}

std::vector<GridSeries> prepare_synthetic(const SyntheticConfig& cfg, double rate, std::uint64_t seed) {
    const auto suite = synthetic_suite(cfg);
    std::vector<GridSeries> out;
    std::uint64_t index = 0;
    for (const auto& s : suite) {
        GridSeries g;
        for (const auto& v : s) {
            g.clean.push_back(v);
            g.keep.push_back(mcar_mask(v.size(), rate, seed ^ index++));
        }
        out.push_back(std::move(g));
    }
    return out;
}

void write_split_csv(const std::filesystem::path& path, std::span<const ForecastWindow> windows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "window,series,start,kind,t,d,x\n" << std::setprecision(17);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        const std::size_t D = w.history.variates();
        for (std::size_t k = 0; k < w.history.events(); ++k)
            for (std::size_t d = 0; d < D; ++d)
                if (w.history.mask.at(k, d) == 1.0)
                    out << i << ',' << w.series << ',' << w.start << ",obs," << w.history.times[k] << ',' << d << ','
                        << w.history.values.at(k, d) << '\n';
        for (const auto& q : w.queries)
            out << i << ',' << w.series << ',' << w.start << ",query," << q.t << ',' << q.variate << ',' << q.truth
                << '\n';
    }
    if (!out) throw Error("failed writing " + path.string());
}

std::vector<ForecastWindow> read_split_csv(const std::filesystem::path& path, std::size_t variates) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "window,series,start,kind,t,d,x") throw ParseError(path.string() + ": unexpected header");
    struct Pending {
        ForecastWindow w;
        std::vector<std::vector<RawEvent>> obs;
    };
    std::map<std::size_t, Pending> windows;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        double id, series, start, t, d, x;
        if (c.size() != 7 || !parse_double(c[0], id) || !parse_double(c[1], series) || !parse_double(c[2], start) ||
            !parse_double(c[4], t) || !parse_double(c[5], d) || !parse_double(c[6], x) || d < 0 ||
            static_cast<std::size_t>(d) >= variates)
            throw ParseError(path.string() + ": malformed row " + std::to_string(row));
        auto& p = windows[static_cast<std::size_t>(id)];
        if (p.obs.empty()) {
            p.obs.resize(variates);
            p.w.series = static_cast<std::size_t>(series);
            p.w.start = static_cast<std::size_t>(start);
        }
        const auto dv = static_cast<std::size_t>(d);
        if (c[3] == "obs") p.obs[dv].push_back({t, x});
        else if (c[3] == "query") p.w.queries.push_back({dv, t, x});
        else throw ParseError(path.string() + ": unknown kind '" + c[3] + "' at row " + std::to_string(row));
    }
    std::vector<ForecastWindow> out;
    for (auto& [id, p] : windows) {
        {
            WarningCapture mute;  // empty variates are normal after sparsification
            p.w.history = align_events(p.obs);
        }
        out.push_back(std::move(p.w));
    }
    return out;
}

} // namespace sed
