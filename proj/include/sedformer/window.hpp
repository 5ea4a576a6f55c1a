#pragma once

#include <cstddef>
#include <vector>

#include "sedformer/encoder.hpp"

namespace sed {

struct Query {
    std::size_t variate = 0;
    double t = 0.0;
    double truth = 0.0;
};

// One forecasting instance: an event-aligned history and the future
// timestamps to predict. Times are relative to the window start.
struct ForecastWindow {
    std::size_t series = 0;
    std::size_t start = 0;  // first history day in the source series
    EventSeries history;
    std::vector<Query> queries;
};

} // namespace sed
