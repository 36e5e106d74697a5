#include "cplab/train.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>
#include <utility>

#include "cplab/errors.hpp"
#include "cplab/loss.hpp"
#include "cplab/video.hpp"

namespace cplab {

TrainConfig train_config_from(const Config& cfg) {
    TrainConfig tc;
    tc.epochs = cfg.get_int("train.epochs", tc.epochs);
    tc.lr = cfg.get_double("train.lr", tc.lr);
    tc.weight_decay = cfg.get_double("train.weight_decay", tc.weight_decay);
    tc.clip_len_s = cfg.get_double("train.clip_len_s", tc.clip_len_s);
    tc.crop_size = cfg.get_int("train.crop_size", tc.crop_size);
    tc.steps_per_epoch = cfg.get_int("train.steps_per_epoch", tc.steps_per_epoch);
    tc.label_ratio = cfg.get_double("train.label_ratio", tc.label_ratio);
    tc.d_max_s = cfg.get_double("train.d_max_s", tc.d_max_s);
    tc.seed = static_cast<uint64_t>(cfg.get_int("train.seed", static_cast<int64_t>(tc.seed)));
    tc.use_l_n_rr = cfg.get_bool("train.use_l_n_rr", tc.use_l_n_rr);
    tc.use_l_p_gr = cfg.get_bool("train.use_l_p_gr", tc.use_l_p_gr);
    tc.use_l_n_gr = cfg.get_bool("train.use_l_n_gr", tc.use_l_n_gr);
    tc.full_spectrum = cfg.get_bool("train.full_spectrum", tc.full_spectrum);
    tc.whole_window = cfg.get_bool("train.whole_window", tc.whole_window);
    tc.model = model_config_from(cfg);
    tc.sampler = sampler_config_from(cfg);

    if (tc.epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (tc.lr < 0.0 || !std::isfinite(tc.lr)) throw ConfigError("train.lr must be >= 0");
    if (tc.weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
    if (tc.clip_len_s <= 0.0) throw ConfigError("train.clip_len_s must be positive");
    if (tc.crop_size < 16) throw ConfigError("train.crop_size must be >= 16");
    if (tc.steps_per_epoch < 0) throw ConfigError("train.steps_per_epoch must be >= 0");
    if (tc.label_ratio < 0.0 || tc.label_ratio > 1.0)
        throw ConfigError("train.label_ratio must lie in [0, 1]");
    if (tc.d_max_s < 0.0) throw ConfigError("train.d_max_s must be >= 0");
    return tc;
}

LandmarkSequence record_landmarks(const LabeledRecord& rec) {
    if (rec.truth && rec.truth->skin)
        return landmarks_from_ellipse(*rec.truth->skin, rec.video.t);
    // No skin region known: take the whole frame.
    LandmarkSequence full;
    full.frames.assign(static_cast<size_t>(rec.video.t),
                       {{0.0, 0.0},
                        {static_cast<double>(rec.video.w - 1), 0.0},
                        {0.0, static_cast<double>(rec.video.h - 1)},
                        {static_cast<double>(rec.video.w - 1),
                         static_cast<double>(rec.video.h - 1)}});
    return full;
}

VideoClip cropped_record_video(const LabeledRecord& rec, int64_t out_size) {
    return crop_face(rec.video, record_landmarks(rec), out_size);
}

namespace {

ClipSample cut_clip(const std::vector<LabeledRecord>& records, int64_t idx, double clip_len_s,
                    Rng& rng) {
    const LabeledRecord& rec = records[static_cast<size_t>(idx)];
    const double fps = rec.video.fps;
    const auto frames = static_cast<int64_t>(std::llround(clip_len_s * fps));
    if (frames < 2 || frames > rec.video.t)
        throw ConfigError("record " + rec.id + " is shorter than the training clip (" +
                          std::to_string(clip_len_s) + " s)");
    const double free_s = std::max(rec.video.duration_s() - clip_len_s, 0.0);
    auto start = static_cast<int64_t>(std::llround(rng.uniform(0.0, free_s) * fps));
    start = std::clamp<int64_t>(start, 0, rec.video.t - frames);

    ClipSample cs;
    cs.record = idx;
    cs.t0_s = static_cast<double>(start) / fps;
    cs.phi = rec.phi;
    cs.clip = clip_window(rec.video, start, frames);
    if (rec.phi) {
        if (!rec.gt)
            throw MissingLabelError("record " + rec.id + " is labeled but carries no GT signal");
        const auto n = static_cast<int64_t>(std::llround(clip_len_s * rec.gt->fps));
        cs.gt = aligned_gt_window(rec, cs.t0_s, n);
    }
    return cs;
}

}  // namespace

PairBatch make_pair_batch(const std::vector<LabeledRecord>& records, double clip_len_s,
                          Rng& rng) {
    const auto n = static_cast<int64_t>(records.size());
    if (n < 2) throw ConfigError("pair batches need at least two records");
    if (clip_len_s <= 0.0) throw ConfigError("clip length must be positive");

    const int64_t ia = rng.uniform_int(0, n - 1);
    int64_t ib = rng.uniform_int(0, n - 2);
    if (ib >= ia) ++ib;

    PairBatch pb;
    pb.a = cut_clip(records, ia, clip_len_s, rng);
    pb.b = cut_clip(records, ib, clip_len_s, rng);
    return pb;
}

AdamW::AdamW(const std::vector<RppgEncoder::ParamView>& params, double lr_in, double wd)
    : lr(lr_in), weight_decay(wd) {
    m.resize(params.size());
    v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        m[i].assign(static_cast<size_t>(params[i].n), 0.0);
        v[i].assign(static_cast<size_t>(params[i].n), 0.0);
    }
}

void AdamW::step(const std::vector<RppgEncoder::ParamView>& params) {
    if (params.size() != m.size()) throw ShapeError("optimizer state does not match parameters");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (static_cast<size_t>(p.n) != m[i].size())
            throw ShapeError("optimizer state does not match parameters");
        for (int64_t j = 0; j < p.n; ++j) {
            const auto g = static_cast<double>(p.grads[j]);
            auto& mj = m[i][static_cast<size_t>(j)];
            auto& vj = v[i][static_cast<size_t>(j)];
            mj = beta1 * mj + (1.0 - beta1) * g;
            vj = beta2 * vj + (1.0 - beta2) * g * g;
            const double update = (mj / bc1) / (std::sqrt(vj / bc2) + eps) +
                                  weight_decay * static_cast<double>(p.values[j]);
            p.values[j] -= static_cast<float>(lr * update);
        }
    }
}

namespace {

// Everything the backward pass needs about one forward clip.
struct ClipState {
    RppgEncoder::Cache cache;
    StRppgBlock block;
    std::vector<SignalSample> samples;
    std::vector<PsdPipeline::Trace> traces;
    std::vector<Psd> psds;
    double ipr_val = 0.0;
};

std::vector<SignalSample> whole_window_samples(const StRppgBlock& block) {
    std::vector<SignalSample> out;
    out.reserve(static_cast<size_t>(block.s * block.s));
    for (int64_t ch = 0; ch < block.s; ++ch)
        for (int64_t cw = 0; cw < block.s; ++cw) {
            SignalSample s;
            s.trace.fps = block.fps;
            s.trace.values.resize(static_cast<size_t>(block.t));
            for (int64_t ti = 0; ti < block.t; ++ti)
                s.trace.values[static_cast<size_t>(ti)] = block.at(ti, ch, cw);
            s.origin = {"", SampleKind::rppg, 0.0, ch, cw};
            out.push_back(std::move(s));
        }
    return out;
}

Band loss_band(const TrainConfig& cfg) {
    return cfg.full_spectrum ? Band{-1.0, 0.0} : kHrBand;
}

// The ipr log column must not mask divergence behind a validation throw; a
// degenerate inference output logs as NaN and the loss check does the abort.
double ipr_or_nan(const Signal& s) {
    try {
        return ipr(s);
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

void fill_psds(ClipState& st, const Band& band) {
    const auto n = static_cast<int64_t>(st.samples[0].trace.size());
    const PsdPipeline pipe(n, st.samples[0].trace.fps, band, true, true);
    st.traces.resize(st.samples.size());
    st.psds.resize(st.samples.size());
    for (size_t i = 0; i < st.samples.size(); ++i) {
        Psd& p = st.psds[i];
        p.freqs = pipe.freqs();
        p.power = pipe.forward(st.samples[i].trace.values.data(), &st.traces[i]);
    }
}

ClipState run_clip(RppgEncoder& model, const ClipSample& cs, const TrainConfig& cfg, Rng& rng,
                   int64_t step) {
    ClipState st;
    const auto vol = video_to_volume<float>(cs.clip);
    st.block = model.forward(vol, cs.clip.fps, st.cache);

    // Exploding weights either overflow or saturate every activation; both
    // leave a block no PSD can be formed from, so abort with the step named.
    double lo = st.block.values[0], hi = st.block.values[0];
    for (const double v : st.block.values) {
        if (!std::isfinite(v))
            throw TrainingDivergedError("step " + std::to_string(step) +
                                        ": model output is not finite");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo == hi)
        throw TrainingDivergedError("step " + std::to_string(step) +
                                    ": model output collapsed to a constant");

    if (cfg.whole_window)
        st.samples = whole_window_samples(st.block);
    else
        st.samples = sample_st(st.block, cfg.sampler, rng);
    fill_psds(st, loss_band(cfg));
    st.ipr_val = ipr_or_nan(inference_rppg(st.block));
    return st;
}

std::vector<Psd> gt_sample_psds(const Signal& gt, int64_t n, const TrainConfig& cfg, Rng& rng) {
    const double delta = cfg.whole_window ? gt.duration_s() : cfg.sampler.delta_t_s;
    const auto windows = sample_gt(gt, n, delta, rng);
    const auto len = static_cast<int64_t>(windows[0].trace.size());
    const PsdPipeline pipe(len, gt.fps, loss_band(cfg), true, true);
    std::vector<Psd> out(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        out[i].freqs = pipe.freqs();
        out[i].power = pipe.forward(windows[i].trace.values.data(), nullptr);
    }
    return out;
}

const char* diverged_term(const LossBreakdown& b) {
    if (!std::isfinite(b.l_p_rr)) return "l_p_rr";
    if (!std::isfinite(b.l_n_rr)) return "l_n_rr";
    if (!std::isfinite(b.l_p_gr)) return "l_p_gr";
    if (!std::isfinite(b.l_n_gr)) return "l_n_gr";
    if (!std::isfinite(b.total)) return "total";
    return nullptr;
}

// Push d(loss)/d(psd) of every sample back through the PSD pipeline and
// scatter the window gradients into the block the samples were cut from.
void backprop_clip(RppgEncoder& model, ClipState& st, const TrainConfig& cfg,
                   const std::vector<std::vector<double>>& dpsd) {
    const auto n = static_cast<int64_t>(st.samples[0].trace.size());
    const PsdPipeline pipe(n, st.samples[0].trace.fps, loss_band(cfg), true, true);
    std::vector<double> dblock(st.block.values.size(), 0.0);
    for (size_t i = 0; i < st.samples.size(); ++i) {
        const auto dtrace = pipe.backward(st.traces[i], dpsd[i]);
        const SampleOrigin& o = st.samples[i].origin;
        const auto start = static_cast<int64_t>(std::llround(o.t_s * st.block.fps));
        for (int64_t m = 0; m < n; ++m)
            dblock[static_cast<size_t>(((start + m) * st.block.s + o.h) * st.block.s + o.w)] +=
                dtrace[static_cast<size_t>(m)];
    }
    model.backward(dblock, st.cache, true);
}

std::vector<LabeledRecord> working_set(const TrainConfig& cfg,
                                       const std::vector<LabeledRecord>& records, Rng& mask_rng,
                                       Rng& desync_rng) {
    std::vector<LabeledRecord> work;
    work.reserve(records.size());
    for (const auto& rec : records) {
        LabeledRecord w;
        w.id = rec.id;
        w.video = cropped_record_video(rec, cfg.crop_size);
        w.gt = rec.gt;
        w.phi = rec.phi;
        w.desync_offset_s = rec.desync_offset_s;
        w.truth = rec.truth;
        work.push_back(std::move(w));
    }
    mask_labels(work, cfg.label_ratio, mask_rng);
    if (cfg.d_max_s > 0.0)
        for (auto& w : work)
            if (w.phi) apply_desync(w, cfg.d_max_s, desync_rng);
    return work;
}

// Mean IPR over the first clip_len_s window of every training video, a fixed
// probe set so epochs are comparable.
double probe_ipr(const RppgEncoder& model, const std::vector<VideoClip>& probes) {
    double sum = 0.0;
    for (const auto& p : probes) sum += ipr_or_nan(inference_rppg(model.forward(p)));
    return sum / static_cast<double>(probes.size());
}

std::vector<VideoClip> probe_windows(const std::vector<LabeledRecord>& work, double clip_len_s) {
    std::vector<VideoClip> probes;
    probes.reserve(work.size());
    for (const auto& w : work) {
        const auto frames = static_cast<int64_t>(std::llround(clip_len_s * w.video.fps));
        probes.push_back(clip_window(w.video, 0, std::min(frames, w.video.t)));
    }
    return probes;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<LabeledRecord>& records,
                  const EpochCallback& on_epoch) {
    if (records.size() < 2) throw ConfigError("training needs at least two records");
    if (cfg.epochs < 1) throw ConfigError("train.epochs must be >= 1");

    Rng root(cfg.seed);
    Rng mask_rng = root.fork(1);
    Rng desync_rng = root.fork(2);
    Rng batch_rng = root.fork(3);
    Rng sample_rng = root.fork(4);
    // GT windows draw from their own stream so labeled and unlabeled runs
    // under one seed consume identical batch/sampler sequences.
    Rng gt_rng = root.fork(5);

    const auto work = working_set(cfg, records, mask_rng, desync_rng);
    const auto probes = probe_windows(work, cfg.clip_len_s);

    RppgEncoder model(cfg.model);
    AdamW opt(model.params(), cfg.lr, cfg.weight_decay);
    const int64_t steps =
        cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : static_cast<int64_t>(work.size());
    const TermMask mask{true, cfg.use_l_n_rr, cfg.use_l_p_gr, cfg.use_l_n_gr};

    TrainResult out;
    int64_t gstep = 0;
    for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (int64_t s = 0; s < steps; ++s) {
            ++gstep;
            const PairBatch pb = make_pair_batch(work, cfg.clip_len_s, batch_rng);

            model.zero_grads();
            ClipState a = run_clip(model, pb.a, cfg, sample_rng, gstep);
            ClipState b = run_clip(model, pb.b, cfg, sample_rng, gstep);
            const auto n_samples = static_cast<int64_t>(a.psds.size());

            std::vector<Psd> ga, gb;
            if (pb.a.phi) ga = gt_sample_psds(*pb.a.gt, n_samples, cfg, gt_rng);
            if (pb.b.phi) gb = gt_sample_psds(*pb.b.gt, n_samples, cfg, gt_rng);

            const LossGrads lg =
                loss_total_with_grad(a.psds, b.psds, ga, gb, pb.a.phi, pb.b.phi, mask);
            if (const char* term = diverged_term(lg.value))
                throw TrainingDivergedError("step " + std::to_string(gstep) + ": " + term +
                                            " is not finite");

            backprop_clip(model, a, cfg, lg.df);
            backprop_clip(model, b, cfg, lg.dfp);
            opt.step(model.params());

            out.steps.push_back({gstep, lg.value.l_p_rr, lg.value.l_n_rr, lg.value.l_p_gr,
                                 lg.value.l_n_gr, lg.value.total,
                                 0.5 * (a.ipr_val + b.ipr_val)});
        }
        out.epochs.push_back({epoch, probe_ipr(model, probes)});
        out.checkpoints.push_back(model);
        if (on_epoch) on_epoch(out.epochs.back());
    }
    return out;
}

namespace {

double supervised_step_impl(RppgEncoder& model, const VideoClip& clip, const Signal& gt,
                            Signal* est_out) {
    const auto vol = video_to_volume<float>(clip);
    RppgEncoder::Cache cache;
    const StRppgBlock block = model.forward(vol, clip.fps, cache);
    Signal est = inference_rppg(block);
    const PearsonGrad pg = pearson_with_grad(est.values, gt.values);

    // loss = 1 - r; each block cell contributes 1/S^2 of its time step.
    const double cells = static_cast<double>(block.s * block.s);
    std::vector<double> dblock(block.values.size());
    for (int64_t ti = 0; ti < block.t; ++ti)
        for (int64_t c = 0; c < block.s * block.s; ++c)
            dblock[static_cast<size_t>(ti * block.s * block.s + c)] =
                -pg.da[static_cast<size_t>(ti)] / cells;
    model.backward(dblock, cache, true);
    if (est_out) *est_out = std::move(est);
    return 1.0 - pg.r;
}

}  // namespace

double baseline_supervised_step(RppgEncoder& model, const VideoClip& clip, const Signal& gt) {
    return supervised_step_impl(model, clip, gt, nullptr);
}

TrainResult train_baseline(const TrainConfig& cfg, const std::vector<LabeledRecord>& records,
                           const EpochCallback& on_epoch) {
    if (records.size() < 2) throw ConfigError("training needs at least two records");

    Rng root(cfg.seed);
    Rng mask_rng = root.fork(1);
    Rng desync_rng = root.fork(2);
    Rng batch_rng = root.fork(3);

    const auto work = working_set(cfg, records, mask_rng, desync_rng);
    const auto probes = probe_windows(work, cfg.clip_len_s);

    RppgEncoder model(cfg.model);
    AdamW opt(model.params(), cfg.lr, cfg.weight_decay);
    const int64_t steps =
        cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : static_cast<int64_t>(work.size());

    TrainResult out;
    int64_t gstep = 0;
    for (int64_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (int64_t s = 0; s < steps; ++s) {
            ++gstep;
            const PairBatch pb = make_pair_batch(work, cfg.clip_len_s, batch_rng);
            const ClipSample& cs = pb.a.phi ? pb.a : pb.b;
            if (!cs.phi)
                throw MissingLabelError("step " + std::to_string(gstep) +
                                        ": supervised baseline drew two unlabeled records");

            model.zero_grads();
            Signal est;
            const double loss = supervised_step_impl(model, cs.clip, *cs.gt, &est);
            if (!std::isfinite(loss))
                throw TrainingDivergedError("step " + std::to_string(gstep) +
                                            ": supervised loss is not finite");
            opt.step(model.params());
            out.steps.push_back({gstep, 0.0, 0.0, 0.0, 0.0, loss, ipr_or_nan(est)});
        }
        out.epochs.push_back({epoch, probe_ipr(model, probes)});
        out.checkpoints.push_back(model);
        if (on_epoch) on_epoch(out.epochs.back());
    }
    return out;
}

int64_t select_epoch(const std::vector<EpochLog>& epochs) {
    if (epochs.empty()) throw InvalidInputError("model selection over an empty epoch log");
    // Non-finite epoch IPRs mark degenerate models; rank them last.
    const auto key = [&epochs](int64_t i) {
        const double v = epochs[static_cast<size_t>(i)].mean_ipr;
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };
    int64_t best = 0;
    for (int64_t i = 1; i < static_cast<int64_t>(epochs.size()); ++i)
        if (key(i) < key(best)) best = i;
    return best;
}

const RppgEncoder& select_model(const TrainResult& result) {
    if (result.checkpoints.size() != result.epochs.size())
        throw ShapeError("checkpoint list does not match the epoch log");
    return result.checkpoints[static_cast<size_t>(select_epoch(result.epochs))];
}

void write_train_log_csv(const std::string& path, const TrainResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "step,l_p_rr,l_n_rr,l_p_gr,l_n_gr,total,ipr\n";
    out << std::setprecision(17);
    for (const auto& row : result.steps)
        out << row.step << ',' << row.l_p_rr << ',' << row.l_n_rr << ',' << row.l_p_gr << ','
            << row.l_n_gr << ',' << row.total << ',' << row.ipr << '\n';
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace cplab
