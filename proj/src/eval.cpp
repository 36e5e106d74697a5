#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cplab/errors.hpp"
#include "cplab/train.hpp"
#include "cplab/video.hpp"

namespace cplab {
namespace {

double reference_hr_bpm(const LabeledRecord& rec, double t0_s, double window_s) {
    if (rec.phi && rec.gt) {
        const auto n = static_cast<int64_t>(std::llround(window_s * rec.gt->fps));
        const Signal w = aligned_gt_window(rec, t0_s, n);
        return hr_from_psd(compute_psd(w));
    }
    if (rec.truth) {
        // No GT waveform: average the truth HR profile over the window.
        const int64_t n = 256;
        double sum = 0.0;
        for (int64_t i = 0; i < n; ++i)
            sum += rec.truth->hr_profile.at(t0_s + (static_cast<double>(i) + 0.5) * window_s /
                                                       static_cast<double>(n));
        return sum / static_cast<double>(n);
    }
    throw MissingLabelError("record " + rec.id + " has neither a GT signal nor truth metadata");
}

std::optional<HrvMetrics> try_hrv(const Signal& s) {
    try {
        return hrv_metrics(detect_peaks(s));
    } catch (const Error&) {
        return std::nullopt;
    }
}

double mean_of(const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return xs.empty() ? 0.0 : sum / static_cast<double>(xs.size());
}

void add_hrv_errors(EvalReport& rep, const std::vector<WindowResult>& windows) {
    struct Feature {
        const char* name;
        double HrvMetrics::* field;
    };
    const Feature features[] = {{"rf_hz", &HrvMetrics::rf_hz},
                                {"lf_nu", &HrvMetrics::lf_nu},
                                {"hf_nu", &HrvMetrics::hf_nu},
                                {"lf_hf_ratio", &HrvMetrics::lf_hf_ratio}};
    for (const auto& feat : features) {
        std::vector<double> est, ref;
        for (const auto& w : windows) {
            if (!w.error.empty() || !w.est_hrv || !w.ref_hrv) continue;
            const double e = (*w.est_hrv).*feat.field;
            const double r = (*w.ref_hrv).*feat.field;
            if (!std::isfinite(e) || !std::isfinite(r)) continue;
            est.push_back(e);
            ref.push_back(r);
        }
        if (est.empty()) continue;
        EvalReport::HrvError he;
        double se = 0.0;
        std::vector<double> diffs(est.size());
        for (size_t i = 0; i < est.size(); ++i) {
            diffs[i] = est[i] - ref[i];
            se += diffs[i] * diffs[i];
        }
        he.rmse = std::sqrt(se / static_cast<double>(est.size()));
        const double md = mean_of(diffs);
        double var = 0.0;
        for (double d : diffs) var += (d - md) * (d - md);
        he.stdev = std::sqrt(var / static_cast<double>(diffs.size()));
        if (est.size() >= 2) {
            try {
                he.r = pearson_r(est, ref);
            } catch (const UndefinedCorrelationError&) {
            }
        }
        rep.hrv_errors[feat.name] = he;
    }
}

}  // namespace

EvalReport evaluate_with(const InferFn& infer, const std::vector<LabeledRecord>& records,
                         const EvalOptions& opt) {
    if (records.empty()) throw InsufficientDataError("no records to evaluate");
    if (opt.window_s <= 0.0) throw ConfigError("evaluation window must be positive");
    if (opt.crop_size < 16) throw ConfigError("crop size must be >= 16");

    EvalReport rep;
    std::vector<double> est_hrs, ref_hrs, snrs, iprs;

    for (const auto& rec : records) {
        const VideoClip crop = cropped_record_video(rec, opt.crop_size);
        const auto wlen = static_cast<int64_t>(std::llround(opt.window_s * crop.fps));
        const int64_t nwin = wlen > 0 ? crop.t / wlen : 0;
        if (nwin < 1)
            throw InsufficientDataError("record " + rec.id + " is shorter than one " +
                                        std::to_string(opt.window_s) + " s window");
        for (int64_t k = 0; k < nwin; ++k) {
            WindowResult wr;
            wr.record_id = rec.id;
            wr.t0_s = static_cast<double>(k * wlen) / crop.fps;
            try {
                const Signal est = infer(rec, crop, k * wlen, wlen);
                validate_signal(est);
                // An exactly flat estimate would otherwise turn into pure
                // rounding noise once standardized; call it out instead.
                const auto [lo, hi] = std::minmax_element(est.values.begin(), est.values.end());
                if (*lo == *hi)
                    throw DegenerateVariabilityError("rPPG estimate is constant over the window");
                wr.est_hr_bpm = hr_from_psd(compute_psd(est));
                wr.ref_hr_bpm = reference_hr_bpm(rec, wr.t0_s, opt.window_s);
                wr.snr_db = snr_db(est, wr.ref_hr_bpm);
                wr.ipr = ipr(est);
                wr.est_hrv = try_hrv(est);
                if (rec.phi && rec.gt) {
                    const auto n = static_cast<int64_t>(std::llround(opt.window_s * rec.gt->fps));
                    wr.ref_hrv = try_hrv(aligned_gt_window(rec, wr.t0_s, n));
                }
                est_hrs.push_back(wr.est_hr_bpm);
                ref_hrs.push_back(wr.ref_hr_bpm);
                snrs.push_back(wr.snr_db);
                iprs.push_back(wr.ipr);
                ++rep.evaluated;
            } catch (const Error& e) {
                wr.error = e.what();
                ++rep.failed;
            }
            rep.windows.push_back(std::move(wr));
        }
    }

    if (rep.evaluated > 0) {
        double ae = 0.0, se = 0.0;
        for (size_t i = 0; i < est_hrs.size(); ++i) {
            const double d = est_hrs[i] - ref_hrs[i];
            ae += std::abs(d);
            se += d * d;
        }
        rep.mae_bpm = ae / static_cast<double>(rep.evaluated);
        rep.rmse_bpm = std::sqrt(se / static_cast<double>(rep.evaluated));
        rep.mean_snr_db = mean_of(snrs);
        rep.mean_ipr = mean_of(iprs);
        if (rep.evaluated >= 2) {
            try {
                rep.pearson_r = pearson_r(est_hrs, ref_hrs);
            } catch (const UndefinedCorrelationError&) {
            }
        }
    }
    add_hrv_errors(rep, rep.windows);
    return rep;
}

EvalReport evaluate(const RppgEncoder& model, const std::vector<LabeledRecord>& records,
                    const EvalOptions& opt) {
    const InferFn infer = [&model](const LabeledRecord&, const VideoClip& crop, int64_t start,
                                   int64_t frames) {
        return inference_rppg(model.forward(clip_window(crop, start, frames)));
    };
    return evaluate_with(infer, records, opt);
}

}  // namespace cplab
