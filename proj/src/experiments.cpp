#include "cplab/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <utility>

#include "cplab/errors.hpp"
#include "cplab/plot.hpp"
#include "cplab/video.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cplab {

ExperimentFamily experiment_family_from(const std::string& name) {
    if (name == "label_ratio") return ExperimentFamily::label_ratio;
    if (name == "desync") return ExperimentFamily::desync;
    if (name == "noise") return ExperimentFamily::noise;
    if (name == "stats") return ExperimentFamily::stats;
    if (name == "ablation") return ExperimentFamily::ablation;
    if (name == "saliency") return ExperimentFamily::saliency;
    throw ConfigError("unknown experiment family '" + name + "'");
}

std::string to_string(ExperimentFamily family) {
    switch (family) {
        case ExperimentFamily::label_ratio: return "label_ratio";
        case ExperimentFamily::desync: return "desync";
        case ExperimentFamily::noise: return "noise";
        case ExperimentFamily::stats: return "stats";
        case ExperimentFamily::ablation: return "ablation";
        case ExperimentFamily::saliency: return "saliency";
    }
    throw InvalidInputError("unhandled experiment family");
}

namespace {

std::vector<int64_t> to_ints(const std::vector<double>& vals, const char* key) {
    std::vector<int64_t> out;
    out.reserve(vals.size());
    for (const double v : vals) {
        const auto i = static_cast<int64_t>(std::llround(v));
        if (static_cast<double>(i) != v)
            throw ConfigError(std::string(key) + " must hold integers");
        out.push_back(i);
    }
    return out;
}

void validate_spec(const ExperimentSpec& es) {
    for (const double r : es.ratios)
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("exp.ratios must lie in [0, 1]");
    for (const double d : es.d_max_s)
        if (!(d >= 0.0)) throw ConfigError("exp.d_max_s must be >= 0");
    if (es.ratios.empty()) throw ConfigError("exp.ratios must not be empty");
    if (es.d_max_s.empty()) throw ConfigError("exp.d_max_s must not be empty");
    if (es.test_videos < 1) throw ConfigError("exp.test_videos must be >= 1");
    for (const int64_t s : es.grid_s)
        if (s != 1 && s != 2 && s != 4 && s != 8)
            throw ConfigError("exp.grid_s entries must be one of 1, 2, 4, 8");
    for (const double t : es.grid_t_s)
        if (!(t > 0.0)) throw ConfigError("exp.grid_t_s entries must be positive");
    for (const double f : es.grid_dt_frac)
        if (!(f > 0.0 && f < 1.0)) throw ConfigError("exp.grid_dt_frac entries must lie in (0, 1)");
    if (es.grid_s.empty() || es.grid_t_s.empty() || es.grid_dt_frac.empty())
        throw ConfigError("ablation grids must not be empty");
}

}  // namespace

ExperimentSpec experiment_spec_from(const Config& cfg, bool full) {
    ExperimentSpec es;
    es.family = experiment_family_from(cfg.get_string("exp.family", "stats"));
    es.corpus = synth_config_from(cfg);
    es.train = train_config_from(cfg);
    es.eval.crop_size = cfg.get_int("eval.crop_size", es.train.crop_size);
    es.eval.window_s = cfg.get_double("eval.window_s", es.eval.window_s);
    es.stats.grid = cfg.get_int("exp.stats_grid", es.stats.grid);
    es.stats.windows = cfg.get_int("exp.stats_windows", es.stats.windows);
    es.stats.crop_size = cfg.get_int("exp.stats_crop", es.stats.crop_size);
    es.test_videos = cfg.get_int("exp.test_videos", es.test_videos);

    if (!full) {
        es.ratios = {0.0, 0.5, 1.0};
        es.d_max_s = {0.0, 1.0};
        es.grid_s = {1, 2};
        es.grid_t_s = {5.0, 10.0};
        es.grid_dt_frac = {0.5};
    }
    es.ratios = cfg.get_double_list("exp.ratios", es.ratios);
    es.d_max_s = cfg.get_double_list("exp.d_max_s", es.d_max_s);
    std::vector<double> gs(es.grid_s.begin(), es.grid_s.end());
    es.grid_s = to_ints(cfg.get_double_list("exp.grid_s", gs), "exp.grid_s");
    es.grid_t_s = cfg.get_double_list("exp.grid_t_s", es.grid_t_s);
    es.grid_dt_frac = cfg.get_double_list("exp.grid_dt_frac", es.grid_dt_frac);
    es.ablation_toggles = cfg.get_bool("exp.toggles", es.ablation_toggles);

    validate_spec(es);
    return es;
}

void split_corpus(const std::vector<LabeledRecord>& all, int64_t test_videos,
                  std::vector<LabeledRecord>& train_out, std::vector<LabeledRecord>& test_out) {
    const auto n = static_cast<int64_t>(all.size());
    if (test_videos < 1 || test_videos >= n)
        throw ConfigError("test split must leave at least one record on each side");
    std::vector<bool> is_test(static_cast<size_t>(n), false);
    // Interior stratified picks: test video k sits at the middle of the k-th
    // of test_videos equal corpus stripes, so train keeps the HR extremes.
    for (int64_t k = 0; k < test_videos; ++k)
        is_test[static_cast<size_t>((2 * k + 1) * n / (2 * test_videos))] = true;
    train_out.clear();
    test_out.clear();
    for (int64_t i = 0; i < n; ++i)
        (is_test[static_cast<size_t>(i)] ? test_out : train_out).push_back(all[static_cast<size_t>(i)]);
}

namespace {

void progress(const ExperimentSpec& spec, const std::string& msg) {
    if (spec.progress) spec.progress(msg);
}

EpochCallback epoch_reporter(const ExperimentSpec& spec, const std::string& cell) {
    if (!spec.progress) return {};
    const auto cb = spec.progress;
    return [cb, cell](const EpochLog& e) {
        std::ostringstream os;
        os << cell << ": epoch " << e.epoch << " mean ipr " << std::setprecision(4) << e.mean_ipr;
        cb(os.str());
    };
}

TrainedEval run_cell(const ExperimentSpec& spec, const TrainConfig& tc,
                     const std::vector<LabeledRecord>& train_set,
                     const std::vector<LabeledRecord>& test_set, const std::string& cell,
                     bool supervised_baseline = false, RppgEncoder* keep_model = nullptr) {
    progress(spec, cell + ": training");
    TrainResult tr = supervised_baseline
                         ? train_baseline(tc, train_set, epoch_reporter(spec, cell))
                         : train(tc, train_set, epoch_reporter(spec, cell));
    TrainedEval te;
    te.selected_epoch = select_epoch(tr.epochs);
    const RppgEncoder& model = tr.checkpoints[static_cast<size_t>(te.selected_epoch)];
    progress(spec, cell + ": evaluating epoch " + std::to_string(te.selected_epoch + 1));
    te.report = evaluate(model, test_set, spec.eval);
    te.steps = std::move(tr.steps);
    te.epochs = std::move(tr.epochs);
    if (keep_model) *keep_model = model;
    return te;
}

std::string format_num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

LabelRatioResult run_label_ratio(const ExperimentSpec& spec) {
    validate_spec(spec);
    const auto corpus = generate_corpus(spec.corpus);
    std::vector<LabeledRecord> train_set, test_set;
    split_corpus(corpus, spec.test_videos, train_set, test_set);

    LabelRatioResult out;
    out.ratios = spec.ratios;  // spec order is the output order
    for (const double r : spec.ratios) {
        TrainConfig tc = spec.train;
        tc.label_ratio = r;
        out.runs.push_back(
            run_cell(spec, tc, train_set, test_set, "ratio " + format_num(r)));
    }
    return out;
}

DesyncResult run_desync(const ExperimentSpec& spec) {
    validate_spec(spec);
    if (spec.train.label_ratio != 1.0)
        throw ConfigError("the desync sweep requires label ratio 1");
    const auto corpus = generate_corpus(spec.corpus);
    std::vector<LabeledRecord> train_set, test_set;
    split_corpus(corpus, spec.test_videos, train_set, test_set);

    DesyncResult out;
    out.d_max_s = spec.d_max_s;
    std::sort(out.d_max_s.begin(), out.d_max_s.end());
    for (const double d : out.d_max_s) {
        TrainConfig tc = spec.train;
        tc.d_max_s = d;
        const std::string tag = "d_max " + format_num(d);
        out.contrast.push_back(run_cell(spec, tc, train_set, test_set, tag + " contrast"));
        out.baseline.push_back(
            run_cell(spec, tc, train_set, test_set, tag + " baseline", true));
    }
    return out;
}

RegionMasks truth_masks(const LabeledRecord& rec, int64_t crop_size) {
    if (crop_size < 8) throw ConfigError("crop size too small for region masks");
    const CropBox box = face_crop_box(rec.video, record_landmarks(rec));
    RegionMasks out;
    out.h = out.w = crop_size;
    out.skin.assign(static_cast<size_t>(crop_size * crop_size), 0);
    out.patch.assign(static_cast<size_t>(crop_size * crop_size), 0);

    const double step = box.side / static_cast<double>(crop_size);
    const auto* skin = rec.truth && rec.truth->skin ? &*rec.truth->skin : nullptr;
    const auto* patch = rec.truth && rec.truth->patch ? &*rec.truth->patch : nullptr;
    for (int64_t r = 0; r < crop_size; ++r) {
        const double sy = box.y0 + (static_cast<double>(r) + 0.5) * step - 0.5;
        for (int64_t c = 0; c < crop_size; ++c) {
            const double sx = box.x0 + (static_cast<double>(c) + 0.5) * step - 0.5;
            const auto i = static_cast<size_t>(r * crop_size + c);
            if (skin && skin->contains(sx, sy)) out.skin[i] = 1;
            if (patch && sx >= static_cast<double>(patch->x) - 0.5 &&
                sx < static_cast<double>(patch->x + patch->w) - 0.5 &&
                sy >= static_cast<double>(patch->y) - 0.5 &&
                sy < static_cast<double>(patch->y + patch->h) - 0.5) {
                out.patch[i] = 1;
                out.has_patch = true;
            }
        }
    }
    return out;
}

SaliencyStats saliency_stats_for(RppgEncoder& model, const LabeledRecord& rec,
                                 int64_t crop_size, double clip_len_s) {
    const VideoClip crop = cropped_record_video(rec, crop_size);
    const auto frames = std::min<int64_t>(
        static_cast<int64_t>(std::llround(clip_len_s * crop.fps)), crop.t);
    const VideoClip win = clip_window(crop, 0, frames);
    const Signal est = inference_rppg(model.forward(win));

    SaliencyStats out;
    out.record_id = rec.id;
    out.h = out.w = crop_size;
    out.map = saliency_map(model, win, est);

    const RegionMasks masks = truth_masks(rec, crop_size);
    double total = 0.0, skin_sum = 0.0, patch_sum = 0.0;
    int64_t skin_n = 0, patch_n = 0;
    for (size_t i = 0; i < out.map.size(); ++i) {
        total += out.map[i];
        if (masks.skin[i]) {
            skin_sum += out.map[i];
            ++skin_n;
        }
        if (masks.patch[i]) {
            patch_sum += out.map[i];
            ++patch_n;
        }
    }
    out.mean_skin = skin_n > 0 ? skin_sum / static_cast<double>(skin_n) : 0.0;
    out.skin_fraction = total > 0.0 ? skin_sum / total : 0.0;
    if (masks.has_patch) {
        out.mean_patch = patch_sum / static_cast<double>(patch_n);
        out.patch_fraction = total > 0.0 ? patch_sum / total : 0.0;
    }
    return out;
}

namespace {

NoiseArm run_noise_arm(const ExperimentSpec& spec, const SynthConfig& corpus_cfg,
                       const std::string& tag) {
    const auto corpus = generate_corpus(corpus_cfg);
    std::vector<LabeledRecord> train_set, test_set;
    split_corpus(corpus, spec.test_videos, train_set, test_set);

    TrainConfig tc = spec.train;
    tc.label_ratio = 0.0;  // the robustness question is about the unsupervised method
    NoiseArm arm;
    RppgEncoder model(tc.model);
    arm.run = run_cell(spec, tc, train_set, test_set, tag, false, &model);

    for (const auto& rec : test_set)
        arm.saliency.push_back(
            saliency_stats_for(model, rec, spec.eval.crop_size, spec.train.clip_len_s));
    return arm;
}

}  // namespace

NoiseResult run_noise(const ExperimentSpec& spec) {
    validate_spec(spec);
    NoiseResult out;
    SynthConfig clean_cfg = spec.corpus;
    clean_cfg.patch_enabled = false;
    SynthConfig noisy_cfg = spec.corpus;
    noisy_cfg.patch_enabled = true;
    out.clean = run_noise_arm(spec, clean_cfg, "clean");
    out.noisy = run_noise_arm(spec, noisy_cfg, "noisy");
    return out;
}

AblationResult run_ablation(const ExperimentSpec& spec) {
    validate_spec(spec);
    const auto corpus = generate_corpus(spec.corpus);
    std::vector<LabeledRecord> train_set, test_set;
    split_corpus(corpus, spec.test_videos, train_set, test_set);

    AblationResult out;
    const auto add = [&](const std::string& name, const TrainConfig& tc) {
        AblationCell cell;
        cell.name = name;
        cell.block_s = tc.model.s;
        cell.run = run_cell(spec, tc, train_set, test_set, name);
        out.cells.push_back(std::move(cell));
    };

    for (const int64_t s : spec.grid_s)
        for (const double t : spec.grid_t_s)
            for (const double frac : spec.grid_dt_frac) {
                TrainConfig tc = spec.train;
                tc.model.s = s;
                tc.clip_len_s = t;
                tc.sampler.delta_t_s = frac * t;
                std::ostringstream name;
                name << "s" << s << "_t" << t << "_dt" << frac * t;
                add(name.str(), tc);
            }

    if (spec.ablation_toggles) {
        add("full", spec.train);
        TrainConfig tc = spec.train;
        tc.model.s = 1;
        add("no_spatial", tc);
        tc = spec.train;
        tc.whole_window = true;
        add("no_temporal", tc);
        tc = spec.train;
        tc.use_l_n_rr = false;
        add("no_cross_video", tc);
        tc = spec.train;
        tc.full_spectrum = true;
        add("no_hr_range", tc);
        tc = spec.train;
        tc.use_l_p_gr = false;
        add("no_l_p_gr", tc);
        tc = spec.train;
        tc.use_l_n_gr = false;
        add("no_l_n_gr", tc);
    }
    return out;
}

SaliencyResult run_saliency(const ExperimentSpec& spec) {
    validate_spec(spec);
    const auto corpus = generate_corpus(spec.corpus);
    std::vector<LabeledRecord> train_set, test_set;
    split_corpus(corpus, spec.test_videos, train_set, test_set);

    SaliencyResult out;
    RppgEncoder model(spec.train.model);
    out.run = run_cell(spec, spec.train, train_set, test_set, "saliency", false, &model);

    for (const auto& rec : test_set) {
        out.maps.push_back(
            saliency_stats_for(model, rec, spec.eval.crop_size, spec.train.clip_len_s));

        const VideoClip crop = cropped_record_video(rec, spec.eval.crop_size);
        const auto frames = std::min<int64_t>(
            static_cast<int64_t>(std::llround(spec.train.clip_len_s * crop.fps)), crop.t);
        WaveformOverlay wave;
        wave.record_id = rec.id;
        wave.est = inference_rppg(model.forward(clip_window(crop, 0, frames)));
        if (rec.phi) wave.gt = aligned_gt_window(rec, 0.0, frames);
        out.waves.push_back(std::move(wave));
    }
    return out;
}

StatsResult run_stats(const ExperimentSpec& spec) {
    progress(spec, "stats: generating corpus");
    const auto corpus = generate_corpus(spec.corpus);
    progress(spec, "stats: comparing psd pairs");
    return run_stats_validation(corpus, spec.stats);
}

// ---- reports ----

namespace {

json jnum(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0.0 ? "inf" : "-inf";
}

json jnum_list(const std::vector<double>& vals) {
    json arr = json::array();
    for (const double v : vals) arr.push_back(jnum(v));
    return arr;
}

json jopt(const std::optional<double>& v) { return v ? jnum(*v) : json(nullptr); }

json jhrv(const std::optional<HrvMetrics>& m) {
    if (!m) return nullptr;
    return json{{"lf_nu", jnum(m->lf_nu)},
                {"hf_nu", jnum(m->hf_nu)},
                {"lf_hf_ratio", jnum(m->lf_hf_ratio)},
                {"rf_hz", jnum(m->rf_hz)}};
}

json jreport(const EvalReport& r) {
    json windows = json::array();
    for (const auto& w : r.windows)
        windows.push_back(json{{"record_id", w.record_id},
                               {"t0_s", jnum(w.t0_s)},
                               {"est_hr_bpm", jnum(w.est_hr_bpm)},
                               {"ref_hr_bpm", jnum(w.ref_hr_bpm)},
                               {"snr_db", jnum(w.snr_db)},
                               {"ipr", jnum(w.ipr)},
                               {"est_hrv", jhrv(w.est_hrv)},
                               {"ref_hrv", jhrv(w.ref_hrv)},
                               {"error", w.error}});
    json hrv = json::object();
    for (const auto& [name, e] : r.hrv_errors)
        hrv[name] = json{{"stdev", jnum(e.stdev)}, {"rmse", jnum(e.rmse)}, {"r", jopt(e.r)}};
    return json{{"evaluated", r.evaluated},
                {"failed", r.failed},
                {"mae_bpm", jnum(r.mae_bpm)},
                {"rmse_bpm", jnum(r.rmse_bpm)},
                {"pearson_r", jopt(r.pearson_r)},
                {"mean_snr_db", jnum(r.mean_snr_db)},
                {"mean_ipr", jnum(r.mean_ipr)},
                {"hrv_errors", hrv},
                {"windows", windows}};
}

json jtrained(const TrainedEval& t) {
    json steps = json::array();
    for (const auto& s : t.steps)
        steps.push_back(json{{"step", s.step},
                             {"l_p_rr", jnum(s.l_p_rr)},
                             {"l_n_rr", jnum(s.l_n_rr)},
                             {"l_p_gr", jnum(s.l_p_gr)},
                             {"l_n_gr", jnum(s.l_n_gr)},
                             {"total", jnum(s.total)},
                             {"ipr", jnum(s.ipr)}});
    json epochs = json::array();
    for (const auto& e : t.epochs)
        epochs.push_back(json{{"epoch", e.epoch}, {"mean_ipr", jnum(e.mean_ipr)}});
    return json{{"steps", steps},
                {"epochs", epochs},
                {"selected_epoch", t.selected_epoch},
                {"report", jreport(t.report)}};
}

json jsaliency(const SaliencyStats& s) {
    return json{{"record_id", s.record_id},
                {"h", s.h},
                {"w", s.w},
                {"mean_skin", jnum(s.mean_skin)},
                {"skin_fraction", jnum(s.skin_fraction)},
                {"mean_patch", jopt(s.mean_patch)},
                {"patch_fraction", jopt(s.patch_fraction)},
                {"map", jnum_list(s.map)}};
}

json jsignal(const Signal& s) {
    return json{{"fps", jnum(s.fps)}, {"values", jnum_list(s.values)}};
}

std::string render(const json& doc) { return doc.dump(2) + "\n"; }

}  // namespace

std::string report_json(const EvalReport& report) { return render(jreport(report)); }

std::string report_json(const LabelRatioResult& result) {
    json runs = json::array();
    for (const auto& r : result.runs) runs.push_back(jtrained(r));
    return render(json{{"family", "label_ratio"},
                       {"ratios", jnum_list(result.ratios)},
                       {"runs", runs}});
}

std::string report_json(const DesyncResult& result) {
    json contrast = json::array(), baseline = json::array();
    for (const auto& r : result.contrast) contrast.push_back(jtrained(r));
    for (const auto& r : result.baseline) baseline.push_back(jtrained(r));
    return render(json{{"family", "desync"},
                       {"d_max_s", jnum_list(result.d_max_s)},
                       {"contrast", contrast},
                       {"baseline", baseline}});
}

std::string report_json(const NoiseResult& result) {
    const auto arm = [](const NoiseArm& a) {
        json sal = json::array();
        for (const auto& s : a.saliency) sal.push_back(jsaliency(s));
        return json{{"run", jtrained(a.run)}, {"saliency", sal}};
    };
    return render(
        json{{"family", "noise"}, {"clean", arm(result.clean)}, {"noisy", arm(result.noisy)}});
}

std::string report_json(const StatsResult& result) {
    return render(json{{"family", "stats"},
                       {"intra_mse", jnum_list(result.intra_mse)},
                       {"cross_mse", jnum_list(result.cross_mse)},
                       {"ks_statistic", jnum(result.ks_statistic)},
                       {"p_value", jnum(result.p_value)}});
}

std::string report_json(const AblationResult& result) {
    json cells = json::array();
    for (const auto& c : result.cells)
        cells.push_back(
            json{{"name", c.name}, {"block_s", c.block_s}, {"run", jtrained(c.run)}});
    return render(json{{"family", "ablation"}, {"cells", cells}});
}

std::string report_json(const SaliencyResult& result) {
    json maps = json::array(), waves = json::array();
    for (const auto& m : result.maps) maps.push_back(jsaliency(m));
    for (const auto& w : result.waves)
        waves.push_back(json{{"record_id", w.record_id},
                             {"est", jsignal(w.est)},
                             {"gt", w.gt ? jsignal(*w.gt) : json(nullptr)}});
    return render(json{{"family", "saliency"},
                       {"run", jtrained(result.run)},
                       {"maps", maps},
                       {"waves", waves}});
}

// ---- emission ----

namespace {

void atomic_write(const std::string& path, const void* data, size_t size) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw IoError("failed writing " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("cannot move " + tmp + " into place: " + ec.message());
    }
}

void atomic_write(const std::string& path, const std::string& text) {
    atomic_write(path, text.data(), text.size());
}

void atomic_write_png(const std::string& path, const Image& img) {
    const auto bytes = encode_png(img);
    atomic_write(path, bytes.data(), bytes.size());
}

void make_report_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    if (!fs::is_directory(dir)) throw IoError("report path " + dir + " is not a directory");
}

std::string csv_cell(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string csv_cell(const std::optional<double>& v) { return v ? csv_cell(*v) : ""; }

// One aggregate row per evaluated model.
void report_row(std::ostream& os, const TrainedEval& t) {
    const auto& r = t.report;
    os << t.selected_epoch << ',' << r.evaluated << ',' << r.failed << ','
       << csv_cell(r.mae_bpm) << ',' << csv_cell(r.rmse_bpm) << ',' << csv_cell(r.pearson_r)
       << ',' << csv_cell(r.mean_snr_db) << ',' << csv_cell(r.mean_ipr);
}

constexpr const char* kReportColumns =
    "selected_epoch,evaluated,failed,mae_bpm,rmse_bpm,pearson_r,mean_snr_db,mean_ipr";

Series ipr_series(const TrainedEval& t, const std::string& label) {
    Series s;
    s.label = label;
    for (const auto& e : t.epochs) {
        s.xs.push_back(static_cast<double>(e.epoch));
        s.ys.push_back(e.mean_ipr);
    }
    return s;
}

Series sweep_series(const std::vector<double>& xs, const std::vector<TrainedEval>& runs,
                    double EvalReport::*field, const std::string& label) {
    Series s;
    s.label = label;
    s.xs = xs;
    for (const auto& r : runs) s.ys.push_back(r.report.*field);
    return s;
}

void emit_saliency_pngs(const std::vector<SaliencyStats>& maps, const std::string& dir,
                        const std::string& prefix) {
    for (const auto& m : maps)
        atomic_write_png(dir + "/" + prefix + m.record_id + ".png",
                         heatmap_image(m.map, m.h, m.w, 256 / std::max<int64_t>(m.w, 1) + 1));
}

}  // namespace

void write_eval_csv(const std::string& path, const EvalReport& report) {
    std::ostringstream os;
    os << "record_id,t0_s,est_hr_bpm,ref_hr_bpm,snr_db,ipr,error\n" << std::setprecision(17);
    for (const auto& w : report.windows)
        os << w.record_id << ',' << w.t0_s << ',' << w.est_hr_bpm << ',' << w.ref_hr_bpm << ','
           << w.snr_db << ',' << w.ipr << ',' << w.error << '\n';
    atomic_write(path, os.str());
}

void emit_report(const LabelRatioResult& result, const std::string& dir) {
    if (result.runs.empty()) throw InvalidInputError("emit_report: empty label-ratio results");
    if (result.runs.size() != result.ratios.size())
        throw ShapeError("emit_report: one run per ratio required");
    make_report_dir(dir);
    atomic_write(dir + "/report.json", report_json(result));

    std::ostringstream os;
    os << "ratio," << kReportColumns << '\n';
    for (size_t i = 0; i < result.runs.size(); ++i) {
        os << csv_cell(result.ratios[i]) << ',';
        report_row(os, result.runs[i]);
        os << '\n';
    }
    atomic_write(dir + "/label_ratio.csv", os.str());

    atomic_write_png(dir + "/rmse_vs_ratio.png",
                     line_chart("hr rmse vs label ratio", "label ratio", "rmse (bpm)",
                                {sweep_series(result.ratios, result.runs, &EvalReport::rmse_bpm,
                                              "contrast-phys+")}));
    atomic_write_png(dir + "/snr_vs_ratio.png",
                     line_chart("snr vs label ratio", "label ratio", "snr (db)",
                                {sweep_series(result.ratios, result.runs,
                                              &EvalReport::mean_snr_db, "contrast-phys+")}));
    std::vector<Series> curves;
    for (size_t i = 0; i < result.runs.size(); ++i)
        curves.push_back(ipr_series(result.runs[i], "ratio " + format_num(result.ratios[i])));
    atomic_write_png(dir + "/ipr_curves.png",
                     line_chart("training ipr by epoch", "epoch", "mean ipr", curves));
}

void emit_report(const DesyncResult& result, const std::string& dir) {
    if (result.contrast.empty()) throw InvalidInputError("emit_report: empty desync results");
    if (result.contrast.size() != result.d_max_s.size() ||
        result.baseline.size() != result.d_max_s.size())
        throw ShapeError("emit_report: desync methods must cover every d_max");
    make_report_dir(dir);
    atomic_write(dir + "/report.json", report_json(result));

    std::ostringstream os;
    os << "d_max_s,method," << kReportColumns << '\n';
    for (size_t i = 0; i < result.d_max_s.size(); ++i) {
        os << csv_cell(result.d_max_s[i]) << ",contrast,";
        report_row(os, result.contrast[i]);
        os << '\n' << csv_cell(result.d_max_s[i]) << ",baseline,";
        report_row(os, result.baseline[i]);
        os << '\n';
    }
    atomic_write(dir + "/desync.csv", os.str());

    atomic_write_png(
        dir + "/rmse_vs_dmax.png",
        line_chart("hr rmse vs gt desynchronization", "d_max (s)", "rmse (bpm)",
                   {sweep_series(result.d_max_s, result.contrast, &EvalReport::rmse_bpm,
                                 "contrast-phys+"),
                    sweep_series(result.d_max_s, result.baseline, &EvalReport::rmse_bpm,
                                 "supervised baseline")}));
    atomic_write_png(
        dir + "/snr_vs_dmax.png",
        line_chart("snr vs gt desynchronization", "d_max (s)", "snr (db)",
                   {sweep_series(result.d_max_s, result.contrast, &EvalReport::mean_snr_db,
                                 "contrast-phys+"),
                    sweep_series(result.d_max_s, result.baseline, &EvalReport::mean_snr_db,
                                 "supervised baseline")}));
}

void emit_report(const NoiseResult& result, const std::string& dir) {
    if (result.clean.run.steps.empty() || result.noisy.run.steps.empty())
        throw InvalidInputError("emit_report: empty noise results");
    make_report_dir(dir);
    atomic_write(dir + "/report.json", report_json(result));

    std::ostringstream os;
    os << "arm," << kReportColumns << ",mean_skin,mean_patch,skin_fraction,patch_fraction\n";
    const auto arm_rows = [&](const char* name, const NoiseArm& arm) {
        for (const auto& s : arm.saliency) {
            os << name << ',';
            report_row(os, arm.run);
            os << ',' << csv_cell(s.mean_skin) << ',' << csv_cell(s.mean_patch) << ','
               << csv_cell(s.skin_fraction) << ',' << csv_cell(s.patch_fraction) << '\n';
        }
    };
    arm_rows("clean", result.clean);
    arm_rows("noisy", result.noisy);
    atomic_write(dir + "/noise.csv", os.str());

    emit_saliency_pngs(result.clean.saliency, dir, "saliency_clean_");
    emit_saliency_pngs(result.noisy.saliency, dir, "saliency_noisy_");
}

void emit_report(const StatsResult& result, const std::string& dir) {
    if (result.intra_mse.empty() || result.cross_mse.empty())
        throw InvalidInputError("emit_report: empty stats results");
    make_report_dir(dir);
    atomic_write(dir + "/report.json", report_json(result));

    std::ostringstream os;
    os << "group,psd_pair_mse\n" << std::setprecision(17);
    for (const double v : result.intra_mse) os << "intra," << v << '\n';
    for (const double v : result.cross_mse) os << "cross," << v << '\n';
    atomic_write(dir + "/psd_pair_mse.csv", os.str());

    atomic_write_png(dir + "/psd_pair_mse.png",
                     boxplot_chart("psd pair mse by group", "psd pair mse",
                                   {"intra-video", "cross-video"},
                                   {result.intra_mse, result.cross_mse}));
}

void emit_report(const AblationResult& result, const std::string& dir) {
    if (result.cells.empty()) throw InvalidInputError("emit_report: empty ablation results");
    make_report_dir(dir);
    atomic_write(dir + "/report.json", report_json(result));

    std::ostringstream os;
    os << "name,block_s," << kReportColumns << '\n';
    for (const auto& c : result.cells) {
        os << c.name << ',' << c.block_s << ',';
        report_row(os, c.run);
        os << '\n';
    }
    atomic_write(dir + "/ablation.csv", os.str());
}

void emit_report(const SaliencyResult& result, const std::string& dir) {
    if (result.maps.empty()) throw InvalidInputError("emit_report: empty saliency results");
    make_report_dir(dir);
    atomic_write(dir + "/report.json", report_json(result));

    std::ostringstream os;
    os << "record_id,mean_skin,mean_patch,skin_fraction,patch_fraction\n";
    for (const auto& m : result.maps)
        os << m.record_id << ',' << csv_cell(m.mean_skin) << ',' << csv_cell(m.mean_patch)
           << ',' << csv_cell(m.skin_fraction) << ',' << csv_cell(m.patch_fraction) << '\n';
    atomic_write(dir + "/saliency.csv", os.str());
    emit_saliency_pngs(result.maps, dir, "saliency_");

    for (const auto& w : result.waves) {
        // Overlay standardized traces so both waveforms share one scale.
        const Signal est = detrend_standardize(w.est);
        std::vector<Series> series(1);
        series[0].label = "rppg estimate";
        series[0].color = kSeriesPalette[0];
        for (int64_t i = 0; i < est.size(); ++i) {
            series[0].xs.push_back(static_cast<double>(i) / est.fps);
            series[0].ys.push_back(est.values[static_cast<size_t>(i)]);
        }
        if (w.gt) {
            const Signal gt = detrend_standardize(*w.gt);
            Series g;
            g.label = "gt signal";
            g.color = kSeriesPalette[1];
            for (int64_t i = 0; i < gt.size(); ++i) {
                g.xs.push_back(static_cast<double>(i) / gt.fps);
                g.ys.push_back(gt.values[static_cast<size_t>(i)]);
            }
            series.push_back(std::move(g));
        }
        atomic_write_png(dir + "/waveform_" + w.record_id + ".png",
                         line_chart("rppg vs gt: " + w.record_id, "time (s)", "a.u.", series));

        std::ostringstream wos;
        wos << "time_s,est,gt\n" << std::setprecision(17);
        for (int64_t i = 0; i < w.est.size(); ++i) {
            wos << static_cast<double>(i) / w.est.fps << ',' << w.est.values[static_cast<size_t>(i)]
                << ',';
            if (w.gt && i < w.gt->size()) wos << w.gt->values[static_cast<size_t>(i)];
            wos << '\n';
        }
        atomic_write(dir + "/waveform_" + w.record_id + ".csv", wos.str());
    }
}

}  // namespace cplab
