#include "cplab/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "cplab/errors.hpp"

namespace cplab {

SamplerConfig sampler_config_from(const Config& cfg, const std::string& prefix) {
    SamplerConfig out;
    out.k = cfg.get_int(prefix + "k", out.k);
    out.delta_t_s = cfg.get_double(prefix + "delta_t_s", out.delta_t_s);
    out.seed = static_cast<uint64_t>(
        cfg.get_int(prefix + "seed", static_cast<int64_t>(out.seed)));
    if (out.k < 1) throw ConfigError("sampler: k must be at least 1");
    if (!(out.delta_t_s > 0.0)) throw ConfigError("sampler: delta_t_s must be positive");
    return out;
}

namespace {

// Start drawn in seconds, landed on the frame grid without ever leaving
// [0, T - delta_t] or running past the end of the window source.
int64_t draw_start(Rng& rng, double free_s, double fps, int64_t max_start_frames) {
    const double u = rng.uniform(0.0, free_s);
    int64_t start = std::llround(u * fps);
    const auto cap = static_cast<int64_t>(std::floor(free_s * fps + 1e-9));
    return std::clamp<int64_t>(start, 0, std::min(max_start_frames, cap));
}

}  // namespace

std::vector<SignalSample> sample_st(const StRppgBlock& block, const SamplerConfig& cfg,
                                    Rng& rng) {
    if (block.t < 2 || block.s < 1 || !(block.fps > 0.0) ||
        static_cast<int64_t>(block.values.size()) != block.t * block.s * block.s)
        throw ShapeError("sample_st: malformed block");
    if (cfg.k < 1) throw ConfigError("sample_st: k must be at least 1");
    if (!(cfg.delta_t_s > 0.0)) throw ConfigError("sample_st: delta_t_s must be positive");
    const double duration = static_cast<double>(block.t) / block.fps;
    if (cfg.delta_t_s >= duration - 1e-12)
        throw ConfigError("sample_st: delta_t_s must be shorter than the clip");
    const int64_t len = std::llround(cfg.delta_t_s * block.fps);
    if (len < 2) throw ConfigError("sample_st: window holds fewer than 2 frames");

    const double free_s = duration - cfg.delta_t_s;
    std::vector<SignalSample> out;
    out.reserve(block.s * block.s * cfg.k);
    for (int64_t i = 0; i < block.s; ++i)
        for (int64_t j = 0; j < block.s; ++j)
            for (int64_t k = 0; k < cfg.k; ++k) {
                const int64_t start = draw_start(rng, free_s, block.fps, block.t - len);
                SignalSample s;
                s.trace.fps = block.fps;
                s.trace.values.resize(len);
                for (int64_t t = 0; t < len; ++t)
                    s.trace.values[t] = block.at(start + t, i, j);
                s.origin.kind = SampleKind::rppg;
                s.origin.t_s = static_cast<double>(start) / block.fps;
                s.origin.h = i;
                s.origin.w = j;
                out.push_back(std::move(s));
            }
    return out;
}

std::vector<SignalSample> sample_st(const StRppgBlock& block, const SamplerConfig& cfg) {
    Rng rng(cfg.seed);
    return sample_st(block, cfg, rng);
}

std::vector<SignalSample> sample_gt(const Signal& gt, int64_t n, double delta_t_s, Rng& rng) {
    validate_signal(gt);
    if (n < 1) throw ConfigError("sample_gt: need at least one window");
    if (!(delta_t_s > 0.0)) throw ConfigError("sample_gt: delta_t_s must be positive");
    if (gt.duration_s() < delta_t_s - 1e-9)
        throw ConfigError("sample_gt: signal shorter than delta_t_s");
    const int64_t len = std::min<int64_t>(std::llround(delta_t_s * gt.fps), gt.size());
    if (len < 2) throw ConfigError("sample_gt: window holds fewer than 2 frames");

    const double free_s = std::max(0.0, gt.duration_s() - delta_t_s);
    std::vector<SignalSample> out;
    out.reserve(n);
    for (int64_t i = 0; i < n; ++i) {
        const int64_t start = draw_start(rng, free_s, gt.fps, gt.size() - len);
        SignalSample s;
        s.trace.fps = gt.fps;
        s.trace.values.assign(gt.values.begin() + start, gt.values.begin() + start + len);
        s.origin.kind = SampleKind::gt;
        s.origin.t_s = static_cast<double>(start) / gt.fps;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace cplab
