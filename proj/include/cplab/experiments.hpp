#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cplab/stats.hpp"
#include "cplab/synth.hpp"
#include "cplab/train.hpp"

namespace cplab {

enum class ExperimentFamily { label_ratio, desync, noise, stats, ablation, saliency };

ExperimentFamily experiment_family_from(const std::string& name);  // ConfigError on unknown
std::string to_string(ExperimentFamily family);

// One experiment = corpus recipe + training protocol + the family's sweep
// grid. Every run_* function below is a pure function of its spec (and the
// seeds inside it); rerunning a spec reproduces the emitted tables.
struct ExperimentSpec {
    ExperimentFamily family = ExperimentFamily::stats;
    SynthConfig corpus;
    TrainConfig train;
    EvalOptions eval;
    StatsOptions stats;
    int64_t test_videos = 4;  // held out of training, spread across the HR range

    std::vector<double> ratios = {0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> d_max_s = {0.0, 0.25, 0.5, 1.0, 2.0};

    std::vector<int64_t> grid_s = {1, 2, 4, 8};
    std::vector<double> grid_t_s = {5.0, 10.0, 30.0};
    std::vector<double> grid_dt_frac = {0.25, 0.5, 0.75};  // delta_t as a fraction of T
    bool ablation_toggles = true;  // also run the observation/GT-loss toggle cells

    // Progress reporting only; never touches results.
    std::function<void(const std::string&)> progress;
};

// Reads exp.* plus the nested corpus.*, train.*, model.*, sampler.* and
// eval.* groups. full=false swaps the sweep grids for small desk-scale
// defaults; explicit exp.* keys win either way.
ExperimentSpec experiment_spec_from(const Config& cfg, bool full = true);

// Deterministic train/test split: the k test records sit at evenly spread
// interior positions so both splits cover the corpus HR range.
void split_corpus(const std::vector<LabeledRecord>& all, int64_t test_videos,
                  std::vector<LabeledRecord>& train_out, std::vector<LabeledRecord>& test_out);

// One trained model: its training log, the epoch pick, and the test report.
struct TrainedEval {
    std::vector<StepLog> steps;
    std::vector<EpochLog> epochs;
    int64_t selected_epoch = 0;  // index into epochs
    EvalReport report;
};

struct LabelRatioResult {
    std::vector<double> ratios;  // spec order
    std::vector<TrainedEval> runs;
};

struct DesyncResult {
    std::vector<double> d_max_s;  // ascending
    std::vector<TrainedEval> contrast;
    std::vector<TrainedEval> baseline;
};

// Gradient-saliency mass bookkeeping over one test video's crop.
struct SaliencyStats {
    std::string record_id;
    int64_t h = 0, w = 0;
    std::vector<double> map;  // row-major |d pearson / d pixel|, time/channel summed
    double mean_skin = 0.0;
    double skin_fraction = 0.0;               // saliency mass inside the skin mask
    std::optional<double> mean_patch;         // absent without patch geometry in view
    std::optional<double> patch_fraction;
};

struct NoiseArm {
    TrainedEval run;
    std::vector<SaliencyStats> saliency;  // one per test record
};

struct NoiseResult {
    NoiseArm clean, noisy;
};

struct AblationCell {
    std::string name;
    int64_t block_s = 0;  // output grid actually trained, 1 with spatial sampling off
    TrainedEval run;
};

struct AblationResult {
    std::vector<AblationCell> cells;
};

struct WaveformOverlay {
    std::string record_id;
    Signal est;
    std::optional<Signal> gt;  // present when the record carries a label
};

struct SaliencyResult {
    TrainedEval run;
    std::vector<SaliencyStats> maps;
    std::vector<WaveformOverlay> waves;
};

// Sweep label_ratio over spec.ratios (order preserved), training and
// evaluating one model per ratio on a shared corpus and split.
LabelRatioResult run_label_ratio(const ExperimentSpec& spec);

// Sweep d_max over spec.d_max_s (sorted ascending), training the contrastive
// model and the time-domain supervised baseline per point; desynchronization
// touches training labels only, evaluation stays on the clean test split.
// Requires label ratio 1.
DesyncResult run_desync(const ExperimentSpec& spec);

// Unsupervised training on a flashing-patch corpus and its clean twin, with
// per-test-video saliency masses inside the true skin mask and the patch.
NoiseResult run_noise(const ExperimentSpec& spec);

// Grid over (S, T, delta_t) plus toggle cells: no_spatial (S=1), no_temporal
// (one whole-window sample per cell), no_cross_video (drop l_n_rr),
// no_hr_range (full-spectrum PSDs) and the two GT-loss toggles.
AblationResult run_ablation(const ExperimentSpec& spec);

// One training run plus qualitative artifacts: saliency heatmaps and
// rPPG/GT waveform overlays for every test video.
SaliencyResult run_saliency(const ExperimentSpec& spec);

// Corpus generation + run_stats_validation under one spec.
StatsResult run_stats(const ExperimentSpec& spec);

// Skin/patch membership of every crop pixel, mapped through the face-crop
// box geometry. Exposed so the mapping is testable against raw frames.
struct RegionMasks {
    int64_t h = 0, w = 0;
    std::vector<uint8_t> skin, patch;  // row-major 0/1
    bool has_patch = false;            // true when any patch pixel lands in the crop
};
RegionMasks truth_masks(const LabeledRecord& rec, int64_t crop_size);

// Saliency map + mass statistics for one record: the model explains its own
// prediction over the first clip_len_s window of the crop.
SaliencyStats saliency_stats_for(RppgEncoder& model, const LabeledRecord& rec,
                                 int64_t crop_size, double clip_len_s);

// Canonical JSON documents (2-space indent, trailing newline). Non-finite
// numbers are encoded as the strings "nan"/"inf"/"-inf" so reloads stay
// bit-exact.
std::string report_json(const EvalReport& report);
std::string report_json(const LabelRatioResult& result);
std::string report_json(const DesyncResult& result);
std::string report_json(const NoiseResult& result);
std::string report_json(const StatsResult& result);
std::string report_json(const AblationResult& result);
std::string report_json(const SaliencyResult& result);

// Per-window evaluation table.
void write_eval_csv(const std::string& path, const EvalReport& report);

// Write report.json, the family's CSV table and its plots into dir. Every
// file lands via write-temp-then-rename; empty results raise
// InvalidInputError before anything (including dir) is created.
void emit_report(const LabelRatioResult& result, const std::string& dir);
void emit_report(const DesyncResult& result, const std::string& dir);
void emit_report(const NoiseResult& result, const std::string& dir);
void emit_report(const StatsResult& result, const std::string& dir);
void emit_report(const AblationResult& result, const std::string& dir);
void emit_report(const SaliencyResult& result, const std::string& dir);

}  // namespace cplab
