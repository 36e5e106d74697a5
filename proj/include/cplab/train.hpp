#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cplab/config.hpp"
#include "cplab/dataset.hpp"
#include "cplab/model.hpp"
#include "cplab/sampling.hpp"
#include "cplab/signal.hpp"

namespace cplab {

// Training protocol. One optimizer step draws one pair of clips from two
// distinct videos; an epoch is steps_per_epoch such steps (0 = one step per
// training video). Labels are masked down to label_ratio before training and
// desynchronized by up to d_max_s when requested; both transforms touch only
// the working copies inside train(), never the caller's records.
struct TrainConfig {
    int64_t epochs = 30;
    double lr = 1e-5;
    double weight_decay = 1e-4;
    double clip_len_s = 10.0;
    int64_t crop_size = 128;
    int64_t steps_per_epoch = 0;
    double label_ratio = 1.0;
    double d_max_s = 0.0;
    uint64_t seed = 1;
    ModelConfig model;
    SamplerConfig sampler;
    // Ablation switches. All on reproduces the full method; l_p_rr is the
    // anchor term and cannot be disabled.
    bool use_l_n_rr = true;   // cross-video repulsion
    bool use_l_p_gr = true;   // GT attraction (labeled clips only)
    bool use_l_n_gr = true;   // GT repulsion across videos
    bool full_spectrum = false;  // drop the HR band restriction on PSDs
    bool whole_window = false;   // one full-length sample per cell, no random windows
};

// Reads train.* keys plus the nested model.* and sampler.* groups.
TrainConfig train_config_from(const Config& cfg);

// One training clip: a temporal window cut from a record, with the aligned
// GT window attached when the record is labeled.
struct ClipSample {
    int64_t record = 0;  // index into the record vector handed to the sampler
    VideoClip clip;
    double t0_s = 0.0;
    bool phi = false;
    std::optional<Signal> gt;
};

struct PairBatch {
    ClipSample a, b;
};

// Two clips from two distinct rng-chosen records, each a random clip_len_s
// window. Throws ConfigError when fewer than two records exist or a video is
// shorter than the clip.
PairBatch make_pair_batch(const std::vector<LabeledRecord>& records, double clip_len_s,
                          Rng& rng);

struct StepLog {
    int64_t step = 0;  // 1-based, global across epochs
    double l_p_rr = 0, l_n_rr = 0, l_p_gr = 0, l_n_gr = 0, total = 0;
    double ipr = 0;  // mean IPR of the step's two inference outputs
};

struct EpochLog {
    int64_t epoch = 0;  // 1-based
    double mean_ipr = 0;  // over fixed probe windows of every training video
};

struct TrainResult {
    std::vector<StepLog> steps;
    std::vector<EpochLog> epochs;
    std::vector<RppgEncoder> checkpoints;  // epoch-end snapshots, one per epoch
};

// Runs the contrastive training loop. Throws TrainingDivergedError naming the
// step and the offending term if any loss component goes non-finite. on_epoch,
// when set, fires after every epoch (progress reporting only).
using EpochCallback = std::function<void(const EpochLog&)>;
TrainResult train(const TrainConfig& cfg, const std::vector<LabeledRecord>& records,
                  const EpochCallback& on_epoch = {});

// Supervised reference: forward the clip, accumulate parameter gradients of
// 1 - pearson_r(prediction, gt) and return that loss. The caller owns
// zero_grads and the optimizer update. Constant predictions surface
// UndefinedCorrelationError.
double baseline_supervised_step(RppgEncoder& model, const VideoClip& clip, const Signal& gt);

// Same loop shape as train() but driven by baseline_supervised_step on the
// labeled clip of each batch. Log rows carry the supervised loss in `total`.
TrainResult train_baseline(const TrainConfig& cfg, const std::vector<LabeledRecord>& records,
                           const EpochCallback& on_epoch = {});

// Index of the epoch with the lowest mean training IPR, earliest on ties.
int64_t select_epoch(const std::vector<EpochLog>& epochs);
const RppgEncoder& select_model(const TrainResult& result);

// step,l_p_rr,l_n_rr,l_p_gr,l_n_gr,total,ipr
void write_train_log_csv(const std::string& path, const TrainResult& result);

// Decoupled-weight-decay Adam over the encoder's parameter directory.
struct AdamW {
    double lr = 1e-5;
    double weight_decay = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    AdamW(const std::vector<RppgEncoder::ParamView>& params, double lr_in, double wd);
    void step(const std::vector<RppgEncoder::ParamView>& params);

    int64_t t = 0;
    std::vector<std::vector<double>> m, v;
};

// ---- evaluation ----

struct EvalOptions {
    int64_t crop_size = 128;
    double window_s = 30.0;
};

struct WindowResult {
    std::string record_id;
    double t0_s = 0;
    double est_hr_bpm = 0, ref_hr_bpm = 0;
    double snr_db = 0, ipr = 0;
    std::optional<HrvMetrics> est_hrv, ref_hrv;
    std::string error;  // nonempty marks a degenerate window (excluded from aggregates)
};

struct EvalReport {
    std::vector<WindowResult> windows;
    int64_t evaluated = 0;  // windows that produced an HR estimate
    int64_t failed = 0;     // windows flagged with an error
    double mae_bpm = 0, rmse_bpm = 0;
    std::optional<double> pearson_r;  // absent when undefined (constant HRs)
    double mean_snr_db = 0, mean_ipr = 0;
    struct HrvError {
        double stdev = 0, rmse = 0;
        std::optional<double> r;
    };
    std::map<std::string, HrvError> hrv_errors;  // rf_hz, lf_nu, hf_nu, lf_hf_ratio
};

// Predicts the rPPG waveform for one face-cropped window starting at frame
// `start` of `crop`. Injectable so evaluation logic is testable without a
// trained model.
using InferFn = std::function<Signal(const LabeledRecord& rec, const VideoClip& crop,
                                     int64_t start, int64_t frames)>;

// Walks non-overlapping window_s windows of every record, estimates HR per
// window, and aggregates errors against the reference HR (GT spectral peak
// when labeled, truth profile otherwise). Throws InsufficientDataError when
// no record contains a single complete window.
EvalReport evaluate_with(const InferFn& infer, const std::vector<LabeledRecord>& records,
                         const EvalOptions& opt = {});
EvalReport evaluate(const RppgEncoder& model, const std::vector<LabeledRecord>& records,
                    const EvalOptions& opt = {});

// Landmarks backing cropped_record_video: eight points on the truth skin
// ellipse, or the frame corners when no truth is attached.
LandmarkSequence record_landmarks(const LabeledRecord& rec);

// Face crop driven by the truth skin ellipse; records without truth fall back
// to a full-frame crop. Resamples to out_size x out_size.
VideoClip cropped_record_video(const LabeledRecord& rec, int64_t out_size);

}  // namespace cplab
