#include "cplab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cplab/errors.hpp"
#include "cplab/signal.hpp"
#include "cplab/train.hpp"

namespace cplab {

namespace {

// Survival function of the Kolmogorov distribution, 100-term series. Below
// lambda ~ 0.04 the alternating terms stop decaying within 100 terms; the
// true survival there is 1 to double precision, so clamp instead.
double kolmogorov_sf(double lambda) {
    if (lambda < 0.04) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * static_cast<double>(k) * k * lambda * lambda);
        sum += (k % 2 == 1) ? term : -term;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

KsTest two_sample_ks(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw InvalidInputError("ks test: empty sample");
    for (const double v : a)
        if (!std::isfinite(v)) throw InvalidInputError("ks test: non-finite sample value");
    for (const double v : b)
        if (!std::isfinite(v)) throw InvalidInputError("ks test: non-finite sample value");

    std::vector<double> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());

    const double na = static_cast<double>(sa.size());
    const double nb = static_cast<double>(sb.size());
    size_t i = 0, j = 0;
    double d = 0.0;
    // Walk both samples jointly; after each distinct value the ECDF gap is a
    // candidate supremum. Once one sample is exhausted the gap only shrinks.
    while (i < sa.size() && j < sb.size()) {
        const double x = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] <= x) ++i;
        while (j < sb.size() && sb[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }

    KsTest out;
    out.statistic = d;
    const double ne = na * nb / (na + nb);
    out.p_value = kolmogorov_sf(std::sqrt(ne) * d);
    return out;
}

namespace {

// grid x grid mean pixel traces over the crop, cell row-major. This is the
// untrained "measurement algorithm": average everything inside a cell.
std::vector<Signal> grid_traces(const VideoClip& crop, int64_t grid) {
    std::vector<Signal> traces(static_cast<size_t>(grid * grid));
    for (auto& t : traces) {
        t.fps = crop.fps;
        t.values.assign(static_cast<size_t>(crop.t), 0.0);
    }
    for (int64_t f = 0; f < crop.t; ++f)
        for (int64_t gy = 0; gy < grid; ++gy) {
            const int64_t y0 = gy * crop.h / grid, y1 = (gy + 1) * crop.h / grid;
            for (int64_t gx = 0; gx < grid; ++gx) {
                const int64_t x0 = gx * crop.w / grid, x1 = (gx + 1) * crop.w / grid;
                double sum = 0.0;
                for (int64_t y = y0; y < y1; ++y)
                    for (int64_t x = x0; x < x1; ++x)
                        for (int64_t c = 0; c < 3; ++c)
                            sum += static_cast<double>(crop.at8(f, y, x, c));
                traces[static_cast<size_t>(gy * grid + gx)].values[static_cast<size_t>(f)] =
                    sum / (255.0 * static_cast<double>((y1 - y0) * (x1 - x0) * 3));
            }
        }
    return traces;
}

double pair_mse(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

}  // namespace

StatsResult run_stats_validation(const std::vector<LabeledRecord>& records,
                                 const StatsOptions& opt) {
    if (records.size() < 8)
        throw ConfigError("stats validation needs at least 8 videos, got " +
                          std::to_string(records.size()));
    if (opt.grid < 1) throw ConfigError("stats grid must be >= 1");
    if (opt.windows < 2) throw ConfigError("stats validation needs at least 2 windows per trace");
    if (opt.crop_size < 16 || opt.crop_size < opt.grid)
        throw ConfigError("stats crop size too small for the grid");

    // One normalized HR-band PSD per (cell, window) slot per video.
    std::vector<std::vector<std::vector<double>>> psds(records.size());
    for (size_t r = 0; r < records.size(); ++r) {
        const VideoClip crop = cropped_record_video(records[r], opt.crop_size);
        const auto traces = grid_traces(crop, opt.grid);
        const int64_t wlen = crop.t / opt.windows;
        if (wlen < 2)
            throw ConfigError("record " + records[r].id + " too short for " +
                              std::to_string(opt.windows) + " windows");
        const PsdPipeline pipe(wlen, crop.fps, kHrBand, true, true);
        psds[r].reserve(traces.size() * static_cast<size_t>(opt.windows));
        for (const auto& t : traces)
            for (int64_t w = 0; w < opt.windows; ++w)
                psds[r].push_back(pipe.forward(t.values.data() + w * wlen, nullptr));
    }
    const size_t slots = psds[0].size();
    const size_t bins = psds[0][0].size();
    for (const auto& rec : psds) {
        if (rec.size() != slots)
            throw ConsistencyError("stats validation needs uniformly shaped videos");
        for (const auto& p : rec)
            if (p.size() != bins)
                throw ConsistencyError("stats validation needs uniformly shaped videos");
    }

    StatsResult out;
    for (const auto& rec : psds)
        for (size_t i = 0; i < slots; ++i)
            for (size_t j = i + 1; j < slots; ++j)
                out.intra_mse.push_back(pair_mse(rec[i], rec[j]));
    for (size_t a = 0; a < psds.size(); ++a)
        for (size_t b = a + 1; b < psds.size(); ++b)
            for (size_t i = 0; i < slots; ++i)
                for (size_t j = 0; j < slots; ++j)
                    if (i != j) out.cross_mse.push_back(pair_mse(psds[a][i], psds[b][j]));

    const KsTest ks = two_sample_ks(out.intra_mse, out.cross_mse);
    out.ks_statistic = ks.statistic;
    out.p_value = ks.p_value;
    return out;
}

}  // namespace cplab
