#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sedformer/window.hpp"

namespace sed {

// One corpus row on the daily grid; NaN marks a missing cell.
struct RawSeries {
    std::string name;
    std::vector<double> values;

    std::size_t gaps() const;
};

// Rows are series, columns are dates. An optional leading label column is
// recognised when the first header cell is not a YYYY-MM-DD date. `limit`
// keeps the first rows in file order; 0 keeps all.
std::vector<RawSeries> load_csv(const std::filesystem::path& path, std::size_t limit = 0);

enum class LongGaps { bridge, keep };

// Interior gaps of length <= gap_cap get the quadratic through the three
// nearest known points (two left and one right when possible). Longer gaps
// are bridged linearly or left as NaN. Leading and trailing gaps take the
// nearest known value. With fewer than three known points everything falls
// back to nearest-value fill.
std::vector<double> lagrange_fill(std::span<const double> x, std::size_t gap_cap,
                                  LongGaps long_gaps = LongGaps::bridge);

// Points with |x - median| / MAD > tau_out are replaced by the median of the
// size-w window around them. MAD is the median absolute deviation without a
// consistency factor; when it is zero every point off the median counts as
// an outlier. NaNs are skipped and kept.
std::vector<double> mad_smooth(std::span<const double> x, double tau_out, std::size_t w);

// Natural cubic spline through the known points, evaluated at NaN
// positions; linear bridge when fewer than four known points exist.
std::vector<double> spline_fill(std::span<const double> x);

struct CleanConfig {
    std::size_t window = 5;
    std::size_t gap_cap = 3;
    double outlier = 6.0;

    void validate() const;
    bool operator==(const CleanConfig&) const = default;
};

// Short-gap Lagrange fill, MAD smoothing, spline over the long gaps.
std::vector<double> clean_series(std::span<const double> x, const CleanConfig& cfg);

// keep[t] = 1 with probability 1 - r, i.i.d. and independent of values. One
// uniform stream per call, kept iff u >= r, so masks of one seed are nested
// across rates.
std::vector<std::uint8_t> mcar_mask(std::size_t length, double rate, std::uint64_t seed);

// A multivariate series on the daily grid: clean reference values and the
// observation mask, both [variate][day].
struct GridSeries {
    std::vector<std::vector<double>> clean;
    std::vector<std::vector<std::uint8_t>> keep;

    std::size_t variates() const { return clean.size(); }
    std::size_t length() const { return clean.empty() ? 0 : clean.front().size(); }
};

struct WindowConfig {
    std::size_t history = 90;
    std::size_t horizon = 30;
    std::size_t stride = 30;

    void validate() const;
    bool operator==(const WindowConfig&) const = default;
};

// Rolling windows over every series. History events are the kept days of
// the history span; queries are all horizon days of every variate with the
// clean values as truth. Times are relative to the window start.
std::vector<ForecastWindow> make_windows(std::span<const GridSeries> series, const WindowConfig& cfg);

struct Splits {
    std::vector<ForecastWindow> train, val, test;
};

// Per series, in time order: the first 70% of windows train, the next 10%
// validate, the rest test (counts rounded to nearest).
Splits split_windows(std::vector<ForecastWindow> windows);

// Per-variate standardization fit on observed training history entries.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(std::span<const ForecastWindow> train, std::size_t variates);
    ForecastWindow apply(const ForecastWindow& w) const;
    std::vector<ForecastWindow> apply(std::span<const ForecastWindow> ws) const;
    double invert(std::size_t variate, double value) const;
};

// Naive forecasts in query order: last observed history value and mean of
// observed history values of the queried variate (0 when none).
std::vector<double> persistence_forecast(std::span<const ForecastWindow> windows);
std::vector<double> mean_forecast(std::span<const ForecastWindow> windows);

struct SyntheticConfig {
    std::size_t series = 8;
    std::size_t variates = 4;
    std::size_t length = 360;
    double period = 30.0;
    double noise = 0.05;
    std::uint64_t seed = 0;

    bool operator==(const SyntheticConfig&) const = default;
};

// Sinusoid + linear trend per variate on the daily grid (no mask).
std::vector<std::vector<std::vector<double>>> synthetic_suite(const SyntheticConfig& cfg);

// Cleans each corpus row and draws per-series masks with seed ^ index. The
// whole corpus forms one multivariate series.
GridSeries prepare_corpus(std::span<const RawSeries> rows, const CleanConfig& clean, double rate,
                          std::uint64_t seed);
std::vector<GridSeries> prepare_synthetic(const SyntheticConfig& cfg, double rate, std::uint64_t seed);

// Dataset directory: train.csv, val.csv, test.csv with columns
// window,series,start,kind,t,d,x (kind is obs or query). meta.json is written by
// the caller.
void write_split_csv(const std::filesystem::path& path, std::span<const ForecastWindow> windows);
std::vector<ForecastWindow> read_split_csv(const std::filesystem::path& path, std::size_t variates);

} // namespace sed
