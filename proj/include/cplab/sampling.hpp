#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cplab/config.hpp"
#include "cplab/model.hpp"
#include "cplab/rng.hpp"
#include "cplab/signal.hpp"

namespace cplab {

struct SamplerConfig {
    int64_t k = 4;          // windows per spatial cell
    double delta_t_s = 5.0; // window length
    uint64_t seed = 1;
};

// Mirror of the config-file keys under "sampler." (sampler.k, ...).
SamplerConfig sampler_config_from(const Config& cfg, const std::string& prefix = "sampler.");

enum class SampleKind { rppg, gt };

struct SampleOrigin {
    std::string video_id;
    SampleKind kind = SampleKind::rppg;
    double t_s = 0.0;        // window start within the clip, seconds
    int64_t h = -1, w = -1;  // spatial cell for rppg samples; -1 for gt
};

struct SignalSample {
    Signal trace;
    SampleOrigin origin;
};

// K windows of length delta_t from every spatial cell of the block, start
// times drawn uniformly from [0, T - delta_t]. S*S*K samples total, cell
// row-major, K consecutive draws per cell.
std::vector<SignalSample> sample_st(const StRppgBlock& block, const SamplerConfig& cfg,
                                    Rng& rng);
// Convenience: seeds a fresh stream from cfg.seed.
std::vector<SignalSample> sample_st(const StRppgBlock& block, const SamplerConfig& cfg);

// n windows of the ground-truth signal, uniform random starts. delta_t may
// equal the full duration (single possible window); longer is an error.
std::vector<SignalSample> sample_gt(const Signal& gt, int64_t n, double delta_t_s, Rng& rng);

}  // namespace cplab
