#pragma once

#include "cplab/config.hpp"
#include "cplab/dataset.hpp"

namespace cplab {

struct SynthConfig {
    int64_t n_videos = 8;
    double duration_s = 35.0;  // video length; gt gets gt_margin_s extra on each side
    double fps = 10.0;
    int64_t height = 72, width = 72;
    double hr_min_bpm = 55.0, hr_max_bpm = 115.0;  // records get evenly spaced HRs
    std::vector<double> harmonics = {1.0, 0.35};   // relative amplitudes at f0, 2 f0, ...
    double hrv_mod_bpm = 1.5;                      // instantaneous HR wobble depth
    double hrv_mod_freq_hz = 0.25;
    double modulation_amp = 0.02;  // pulse amplitude as a fraction of pixel range
    double pixel_noise_std = 0.005;
    double drift_amp = 0.02;  // multiplicative illumination drift
    double drift_freq_hz = 0.07;
    double gt_margin_s = 2.0;
    bool patch_enabled = false;
    int64_t patch_size = 8;
    int64_t patch_x = -1, patch_y = -1;  // -1: just outside the ellipse, top-left
    double patch_freq_min_hz = 0.8, patch_freq_max_hz = 3.5;
    double patch_amp = 0.02;
    uint64_t seed = 1;
};

// Mirror of the config-file keys under "corpus." (corpus.n_videos, ...).
SynthConfig synth_config_from(const Config& cfg, const std::string& prefix = "corpus.");

// Phase-integrated quasi-periodic pulse wave: sum of harmonics of the
// instantaneous frequency given by the profile, standardized to unit
// variance. The profile must stay within [40, 250] bpm and move no faster
// than 3 bpm/s.
Signal generate_ppg(double duration_s, double fps, const HrProfile& profile,
                    const std::vector<double>& harmonics, Rng& rng);

// One synthetic record: elliptical skin region whose mean color follows the
// centered window of ppg, plus illumination drift, per-pixel noise and the
// optional flashing corner patch. gt keeps the full (margin-bearing) ppg.
LabeledRecord render_video(const Signal& ppg, const HrProfile& profile, const SynthConfig& cfg,
                           Rng& rng);

// Full corpus: evenly spaced HRs over the configured range, one independent
// rng stream per record, ids record_000, record_001, ...
std::vector<LabeledRecord> generate_corpus(const SynthConfig& cfg);

}  // namespace cplab
