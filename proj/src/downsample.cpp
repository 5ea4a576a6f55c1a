#include "sedformer/downsample.hpp"

#include <algorithm>
#include <string>

#include "sedformer/error.hpp"
#include "sedformer/log.hpp"

namespace sed {

namespace {

Segments resolve(const Segments& s, std::size_t rows) {
    if (s.offsets.empty()) return Segments::single(rows);
    if (s.total() != rows) throw DimensionError("segments do not cover the event axis");
    return s;
}

} // namespace

std::vector<std::size_t> pooled_lengths(const Segments& segments, std::size_t stride) {
    if (stride == 0) throw ConfigError("pooling stride must be positive");
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < segments.count(); ++s) {
        if (stride > segments.length(s))
            throw ConfigError("pooling stride " + std::to_string(stride) + " exceeds sequence length " +
                              std::to_string(segments.length(s)));
        out.push_back(segments.length(s) / stride);
    }
    return out;
}

Var pool_spikes(const Var& spikes, std::size_t stride, const Segments& segments) {
    const auto seg = resolve(segments, spikes.value().rows());
    pooled_lengths(seg, stride);
    const std::size_t dropped = dropped_events(seg, stride);
    if (dropped > 0)
        warn("pooling with stride " + std::to_string(stride) + " drops " + std::to_string(dropped) +
             " trailing event(s)");
    return ops::window_max(spikes, stride, seg);
}

Tensor pool_mask(const Tensor& mask, std::size_t stride, const Segments& segments) {
    const auto seg = resolve(segments, mask.rows());
    const auto lengths = pooled_lengths(seg, stride);
    const std::size_t D = mask.cols();
    std::size_t total = 0;
    for (auto n : lengths) total += n;
    Shape shape = mask.shape();
    shape[0] = total;
    Tensor out(shape, 0.0);
    std::size_t u_out = 0;
    for (std::size_t s = 0; s < seg.count(); ++s)
        for (std::size_t u = 0; u < lengths[s]; ++u, ++u_out)
            for (std::size_t j = 0; j < stride; ++j) {
                const std::size_t k = seg.begin(s) + u * stride + j;
                for (std::size_t d = 0; d < D; ++d)
                    out[u_out * D + d] = std::max(out[u_out * D + d], mask[k * D + d]);
            }
    return out;
}

std::vector<double> pool_times(std::span<const double> times, std::size_t stride,
                               const Segments& segments) {
    const auto seg = resolve(segments, times.size());
    const auto lengths = pooled_lengths(seg, stride);
    std::vector<double> out;
    for (std::size_t s = 0; s < seg.count(); ++s) {
        for (std::size_t k = seg.begin(s) + 1; k < seg.end(s); ++k)
            if (times[k] < times[k - 1]) throw DataError("pool_times: timestamps must be nondecreasing");
        for (std::size_t u = 0; u < lengths[s]; ++u) out.push_back(times[seg.begin(s) + (u + 1) * stride - 1]);
    }
    return out;
}

std::size_t dropped_events(const Segments& segments, std::size_t stride) {
    std::size_t dropped = 0;
    for (std::size_t s = 0; s < segments.count(); ++s) dropped += segments.length(s) % stride;
    return dropped;
}

PooledSeries downsample(const Var& spikes, const Tensor& mask, std::span<const double> times,
                        std::size_t stride, const Segments& segments, bool report) {
    PooledSeries out;
    out.stride = stride;
    out.spikes = report ? pool_spikes(spikes, stride, segments)
                        : ops::window_max(spikes, stride, resolve(segments, times.size()));
    out.mask = pool_mask(mask, stride, segments);
    out.times = pool_times(times, stride, segments);
    out.segments = Segments::from_lengths(pooled_lengths(resolve(segments, times.size()), stride));
    out.gaps.assign(out.times.size(), 0.0);
    for (std::size_t s = 0; s < out.segments.count(); ++s)
        for (std::size_t u = out.segments.begin(s) + 1; u < out.segments.end(s); ++u)
            out.gaps[u] = out.times[u] - out.times[u - 1];
    return out;
}

} // namespace sed
