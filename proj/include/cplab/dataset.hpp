#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cplab/rng.hpp"
#include "cplab/signal.hpp"
#include "cplab/video.hpp"

namespace cplab {

// Piecewise-linear instantaneous heart rate. A single point means constant.
struct HrProfile {
    std::vector<double> times_s;
    std::vector<double> bpm;

    double at(double t) const;
    double mean_bpm() const;
};

struct Ellipse {
    double cx = 0.0, cy = 0.0, rx = 0.0, ry = 0.0;

    bool contains(double x, double y) const {
        const double u = (x - cx) / rx, v = (y - cy) / ry;
        return u * u + v * v <= 1.0;
    }
};

struct PatchInfo {
    int64_t x = 0, y = 0, w = 0, h = 0;  // pixel rect in the source frame
    double freq_hz = 0.0;
};

// Ground-truth bookkeeping that only synthetic data can carry.
struct TruthMeta {
    HrProfile hr_profile;
    std::optional<Ellipse> skin;
    std::optional<PatchInfo> patch;
};

struct LabeledRecord {
    std::string id;
    VideoClip video;
    std::optional<Signal> gt;  // centered on the video: equal margins on both sides
    bool phi = false;          // phi = 1 iff gt is present
    double desync_offset_s = 0.0;
    std::optional<TruthMeta> truth;
};

// Synthetic records carry landmarks implicitly: eight points on the skin
// ellipse, static across frames.
LandmarkSequence landmarks_from_ellipse(const Ellipse& e, int64_t frames);

// The GT window aligned with video time [t0, t0 + n/fps): the gt signal is
// longer than the video by a symmetric margin (possibly zero), so index 0 of
// the video maps to the margin offset inside gt.
Signal aligned_gt_window(const LabeledRecord& rec, double t0_s, int64_t samples);

// Keep exactly round(ratio * n) labeled records (rng-chosen), strip the rest
// to phi = 0. Expects a fully labeled input corpus.
void mask_labels(std::vector<LabeledRecord>& records, double ratio, Rng& rng);

// Shift the GT window by u ~ Uniform(-d_max, d_max) and cut it to video
// length. The margin must absorb the worst-case shift. d_max = 0 is a no-op.
void apply_desync(LabeledRecord& record, double d_max_s, Rng& rng);

// On-disk layout: <dir>/<record id>/{frames.bin, gt.csv, meta.json}.
// frames.bin = one UTF-8 JSON header line {"T","H","W","C","fps"} followed by
// raw little-endian uint8 pixels. Round trips are bit-exact.
void store_dataset(const std::vector<LabeledRecord>& records, const std::string& dir);
std::vector<LabeledRecord> load_dataset(const std::string& dir);

}  // namespace cplab
