#include "cplab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cplab/errors.hpp"

namespace cplab {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Pulse color weights: green carries most of the plethysmographic signal.
constexpr double kPulseWeight[3] = {0.4, 1.0, 0.6};
constexpr double kSkinTone[3] = {0.72, 0.55, 0.47};
constexpr double kBackground[3] = {0.28, 0.30, 0.34};
constexpr double kPatchGray = 0.5;

void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.n_videos < 1) throw ConfigError("synth: n_videos must be >= 1");
    if (!(cfg.fps > 0.0)) throw ConfigError("synth: fps must be positive");
    if (cfg.duration_s < 4.0) throw ConfigError("synth: duration_s must be >= 4 s");
    if (cfg.height < 16 || cfg.width < 16) throw ConfigError("synth: frames must be >= 16x16");
    if (!(cfg.hr_min_bpm >= 40.0 && cfg.hr_max_bpm <= 250.0 && cfg.hr_min_bpm <= cfg.hr_max_bpm))
        throw ConfigError("synth: HR range must lie within [40, 250] bpm");
    if (cfg.harmonics.empty()) throw ConfigError("synth: need at least one harmonic");
    if (cfg.gt_margin_s < 0.0) throw ConfigError("synth: gt_margin_s must be nonnegative");
    if (cfg.patch_enabled) {
        if (cfg.patch_size < 2) throw ConfigError("synth: patch_size must be >= 2");
        if (!(cfg.patch_freq_min_hz <= cfg.patch_freq_max_hz))
            throw ConfigError("synth: empty patch frequency range");
    }
}

Ellipse skin_ellipse(const SynthConfig& cfg) {
    Ellipse e;
    e.cx = static_cast<double>(cfg.width) / 2.0;
    e.cy = static_cast<double>(cfg.height) / 2.0;
    e.rx = 0.31 * static_cast<double>(cfg.width);
    e.ry = 0.36 * static_cast<double>(cfg.height);
    return e;
}

}  // namespace

SynthConfig synth_config_from(const Config& cfg, const std::string& prefix) {
    SynthConfig out;
    const auto key = [&](const char* name) { return prefix + name; };
    out.n_videos = cfg.get_int(key("n_videos"), out.n_videos);
    out.duration_s = cfg.get_double(key("duration_s"), out.duration_s);
    out.fps = cfg.get_double(key("fps"), out.fps);
    out.height = cfg.get_int(key("height"), out.height);
    out.width = cfg.get_int(key("width"), out.width);
    out.hr_min_bpm = cfg.get_double(key("hr_min_bpm"), out.hr_min_bpm);
    out.hr_max_bpm = cfg.get_double(key("hr_max_bpm"), out.hr_max_bpm);
    out.harmonics = cfg.get_double_list(key("harmonics"), out.harmonics);
    out.hrv_mod_bpm = cfg.get_double(key("hrv_mod_bpm"), out.hrv_mod_bpm);
    out.hrv_mod_freq_hz = cfg.get_double(key("hrv_mod_freq_hz"), out.hrv_mod_freq_hz);
    out.modulation_amp = cfg.get_double(key("modulation_amp"), out.modulation_amp);
    out.pixel_noise_std = cfg.get_double(key("pixel_noise_std"), out.pixel_noise_std);
    out.drift_amp = cfg.get_double(key("drift_amp"), out.drift_amp);
    out.drift_freq_hz = cfg.get_double(key("drift_freq_hz"), out.drift_freq_hz);
    out.gt_margin_s = cfg.get_double(key("gt_margin_s"), out.gt_margin_s);
    out.patch_enabled = cfg.get_bool(key("patch_enabled"), out.patch_enabled);
    out.patch_size = cfg.get_int(key("patch_size"), out.patch_size);
    out.patch_x = cfg.get_int(key("patch_x"), out.patch_x);
    out.patch_y = cfg.get_int(key("patch_y"), out.patch_y);
    out.patch_freq_min_hz = cfg.get_double(key("patch_freq_min_hz"), out.patch_freq_min_hz);
    out.patch_freq_max_hz = cfg.get_double(key("patch_freq_max_hz"), out.patch_freq_max_hz);
    out.patch_amp = cfg.get_double(key("patch_amp"), out.patch_amp);
    out.seed = static_cast<uint64_t>(cfg.get_int(key("seed"), static_cast<int64_t>(out.seed)));
    return out;
}

Signal generate_ppg(double duration_s, double fps, const HrProfile& profile,
                    const std::vector<double>& harmonics, Rng& rng) {
    if (!(duration_s > 0.0) || !(fps > 0.0))
        throw InvalidInputError("generate_ppg: duration and fps must be positive");
    if (harmonics.empty()) throw InvalidInputError("generate_ppg: need at least one harmonic");
    const auto n = static_cast<int64_t>(std::llround(duration_s * fps));
    if (n < 2) throw InvalidInputError("generate_ppg: too few samples");

    // Validate the profile on the sampling grid.
    double prev = profile.at(0.0);
    for (int64_t i = 0; i < n; ++i) {
        const double hr = profile.at(static_cast<double>(i) / fps);
        if (!(hr >= 40.0 && hr <= 250.0))
            throw InvalidProfileError("generate_ppg: HR profile leaves [40, 250] bpm");
        if (std::abs(hr - prev) * fps > 3.0 + 1e-9)
            throw InvalidProfileError("generate_ppg: HR profile moves faster than 3 bpm/s");
        prev = hr;
    }

    const double theta0 = rng.uniform();  // beat phase offset in cycles
    Signal s;
    s.fps = fps;
    s.values.resize(n);
    double phase = theta0;
    for (int64_t i = 0; i < n; ++i) {
        double v = 0.0;
        for (size_t m = 0; m < harmonics.size(); ++m)
            v += harmonics[m] * std::cos(kTau * static_cast<double>(m + 1) * phase);
        s.values[i] = v;
        phase += profile.at(static_cast<double>(i) / fps) / 60.0 / fps;
    }

    // Standardize to unit variance (and zero mean, which the pulse shape
    // does not have on its own).
    double mean = 0.0;
    for (double v : s.values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double& v : s.values) {
        v -= mean;
        var += v * v;
    }
    var /= static_cast<double>(n);
    if (var <= 0.0) throw InvalidProfileError("generate_ppg: degenerate waveform");
    const double inv = 1.0 / std::sqrt(var);
    for (double& v : s.values) v *= inv;
    return s;
}

LabeledRecord render_video(const Signal& ppg, const HrProfile& profile, const SynthConfig& cfg,
                           Rng& rng) {
    validate_synth_config(cfg);
    validate_signal(ppg);
    const auto frames = static_cast<int64_t>(std::llround(cfg.duration_s * cfg.fps));
    if (ppg.size() < frames)
        throw InvalidInputError("render_video: ppg shorter than the video");
    if (std::abs(ppg.fps - cfg.fps) > 1e-9 * cfg.fps)
        throw ConsistencyError("render_video: ppg fps differs from video fps");
    const int64_t margin = (ppg.size() - frames) / 2;

    const Ellipse skin = skin_ellipse(cfg);

    // Phases drawn up front so the layout below never shifts the stream.
    const double drift_phase = rng.uniform(0.0, kTau);

    std::optional<PatchInfo> patch;
    double patch_phase = 0.0;
    if (cfg.patch_enabled) {
        PatchInfo p;
        p.w = p.h = cfg.patch_size;
        // Default placement: a small inset from the top-left frame corner.
        // That sits inside the face-crop box (which starts at ~7% of the
        // frame for this ellipse) but clear of the ellipse itself.
        p.x = cfg.patch_x >= 0 ? cfg.patch_x
                               : static_cast<int64_t>(std::llround(0.08 * cfg.width));
        p.y = cfg.patch_y >= 0 ? cfg.patch_y
                               : static_cast<int64_t>(std::llround(0.08 * cfg.height));
        if (p.x < 0 || p.y < 0 || p.x + p.w > cfg.width || p.y + p.h > cfg.height)
            throw ConfigError("render_video: noise patch leaves the frame");
        for (int64_t y = p.y; y < p.y + p.h; ++y)
            for (int64_t x = p.x; x < p.x + p.w; ++x)
                if (skin.contains(static_cast<double>(x), static_cast<double>(y)))
                    throw ConfigError("render_video: noise patch overlaps the skin region");
        // Flicker frequency distinct from the PPG fundamental (and not on
        // top of its first harmonic either).
        const double f_hr = profile.mean_bpm() / 60.0;
        double f = 0.0;
        bool ok = false;
        for (int tries = 0; tries < 200 && !ok; ++tries) {
            f = rng.uniform(cfg.patch_freq_min_hz, cfg.patch_freq_max_hz);
            ok = std::abs(f - f_hr) >= 0.25 && std::abs(f - 2.0 * f_hr) >= 0.25;
        }
        if (!ok)
            throw ConfigError(
                "render_video: patch frequency range leaves no room away from the PPG HR");
        p.freq_hz = f;
        patch_phase = rng.uniform(0.0, kTau);
        patch = p;
    }

    LabeledRecord rec;
    rec.video.t = frames;
    rec.video.h = cfg.height;
    rec.video.w = cfg.width;
    rec.video.fps = cfg.fps;
    rec.video.data.resize(frames * cfg.height * cfg.width * 3);

    for (int64_t f = 0; f < frames; ++f) {
        const double t = static_cast<double>(f) / cfg.fps;
        const double pulse = ppg.values[margin + f];
        const double drift =
            1.0 + cfg.drift_amp * std::sin(kTau * cfg.drift_freq_hz * t + drift_phase);
        const double flicker =
            patch ? kPatchGray + cfg.patch_amp * std::sin(kTau * patch->freq_hz * t + patch_phase)
                  : 0.0;
        for (int64_t y = 0; y < cfg.height; ++y) {
            for (int64_t x = 0; x < cfg.width; ++x) {
                const bool on_skin =
                    skin.contains(static_cast<double>(x), static_cast<double>(y));
                const bool on_patch = patch && x >= patch->x && x < patch->x + patch->w &&
                                      y >= patch->y && y < patch->y + patch->h;
                for (int64_t c = 0; c < 3; ++c) {
                    double v;
                    if (on_patch) {
                        v = flicker * drift;
                    } else if (on_skin) {
                        v = (kSkinTone[c] + cfg.modulation_amp * kPulseWeight[c] * pulse) *
                            drift;
                    } else {
                        v = kBackground[c] * drift;
                    }
                    v += cfg.pixel_noise_std * rng.normal();
                    rec.video.at8(f, y, x, c) = static_cast<uint8_t>(
                        std::clamp(std::llround(v * 255.0), 0LL, 255LL));
                }
            }
        }
    }

    rec.gt = ppg;
    rec.phi = true;
    rec.desync_offset_s = 0.0;
    TruthMeta truth;
    truth.hr_profile = profile;
    truth.skin = skin;
    truth.patch = patch;
    rec.truth = std::move(truth);
    return rec;
}

std::vector<LabeledRecord> generate_corpus(const SynthConfig& cfg) {
    validate_synth_config(cfg);
    const Rng root(cfg.seed);
    std::vector<LabeledRecord> records;
    records.reserve(cfg.n_videos);
    for (int64_t i = 0; i < cfg.n_videos; ++i) {
        Rng rng = root.fork(static_cast<uint64_t>(i));
        const double base =
            cfg.n_videos == 1
                ? (cfg.hr_min_bpm + cfg.hr_max_bpm) / 2.0
                : cfg.hr_min_bpm + (cfg.hr_max_bpm - cfg.hr_min_bpm) * static_cast<double>(i) /
                                       static_cast<double>(cfg.n_videos - 1);

        // Sample the wobbling instantaneous HR into a piecewise-linear table.
        HrProfile profile;
        const double total = cfg.duration_s + 2.0 * cfg.gt_margin_s;
        const double mod_phase = rng.uniform(0.0, kTau);
        const int64_t steps = std::max<int64_t>(2, static_cast<int64_t>(total * 2.0) + 1);
        for (int64_t k = 0; k < steps; ++k) {
            const double t = total * static_cast<double>(k) / static_cast<double>(steps - 1);
            profile.times_s.push_back(t);
            profile.bpm.push_back(base + cfg.hrv_mod_bpm *
                                             std::sin(kTau * cfg.hrv_mod_freq_hz * t + mod_phase));
        }

        const Signal ppg = generate_ppg(total, cfg.fps, profile, cfg.harmonics, rng);
        LabeledRecord rec = render_video(ppg, profile, cfg, rng);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "record_%03d", static_cast<int>(i));
        rec.id = buf;
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace cplab
