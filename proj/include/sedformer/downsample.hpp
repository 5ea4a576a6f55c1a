#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sedformer/autodiff.hpp"

namespace sed {

// Spikes, mask and times after windowed max pooling with stride s.
struct PooledSeries {
    Var spikes;                 // [sum K' x D x C]
    Tensor mask;                // [sum K' x D]
    std::vector<double> times;  // sum K'
    std::vector<double> gaps;   // T'[u] - T'[u-1], 0 at each segment start
    Segments segments;
    std::size_t stride = 1;
};

// Pooled length of each segment; throws ConfigError when s is 0 or exceeds a
// segment.
std::vector<std::size_t> pooled_lengths(const Segments& segments, std::size_t stride);

// Window max over s consecutive events; remainder events are dropped with a
// warning.
Var pool_spikes(const Var& spikes, std::size_t stride, const Segments& segments = {});
Tensor pool_mask(const Tensor& mask, std::size_t stride, const Segments& segments = {});
// T'[u] is the last event time of window u.
std::vector<double> pool_times(std::span<const double> times, std::size_t stride,
                               const Segments& segments = {});

// Pools all three streams. The remainder warning is skipped when `report` is
// false; the caller can read the count from dropped_events().
PooledSeries downsample(const Var& spikes, const Tensor& mask, std::span<const double> times,
                        std::size_t stride, const Segments& segments, bool report = true);

std::size_t dropped_events(const Segments& segments, std::size_t stride);

} // namespace sed
