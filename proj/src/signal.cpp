#include "cplab/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "cplab/errors.hpp"

namespace cplab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double population_std(const std::vector<double>& x) {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    return std::sqrt(ss / static_cast<double>(x.size()));
}

}  // namespace

void validate_signal(const Signal& s, int64_t min_len) {
    if (!(s.fps > 0.0) || !std::isfinite(s.fps))
        throw InvalidInputError("signal: fps must be a positive finite number");
    if (s.size() < min_len)
        throw InvalidInputError("signal: need at least " + std::to_string(min_len) +
                                " samples, got " + std::to_string(s.size()));
    for (double v : s.values)
        if (!std::isfinite(v)) throw InvalidInputError("signal: non-finite sample");
}

Signal detrend_standardize(const Signal& s) {
    validate_signal(s);
    const int64_t n = s.size();
    const double mid = static_cast<double>(n - 1) / 2.0;

    double mean = 0.0;
    for (double v : s.values) mean += v;
    mean /= static_cast<double>(n);

    double stt = 0.0, sxt = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double tc = static_cast<double>(i) - mid;
        stt += tc * tc;
        sxt += tc * (s.values[i] - mean);
    }
    const double slope = stt > 0.0 ? sxt / stt : 0.0;

    Signal out;
    out.fps = s.fps;
    out.values.resize(n);
    for (int64_t i = 0; i < n; ++i)
        out.values[i] = s.values[i] - mean - slope * (static_cast<double>(i) - mid);

    const double sigma = population_std(out.values);
    if (sigma > 0.0) {
        for (double& v : out.values) v /= sigma;
    } else {
        std::fill(out.values.begin(), out.values.end(), 0.0);
    }
    return out;
}

PsdPipeline::PsdPipeline(int64_t n, double fps, Band band, bool normalize, bool condition)
    : n_(n), fps_(fps), normalize_(normalize), condition_(condition) {
    if (n < 2) throw InvalidInputError("psd: need at least 2 samples");
    if (!(fps > 0.0)) throw InvalidInputError("psd: fps must be positive");
    const int64_t kmax = n / 2;
    for (int64_t k = 1; k <= kmax; ++k) {
        const double f = static_cast<double>(k) * fps / static_cast<double>(n);
        if (band.lo_hz >= 0.0 && (f < band.lo_hz || f > band.hi_hz)) continue;
        bins_.push_back(k);
        freqs_.push_back(f);
        // Nyquist bin of an even-length series has no mirror image.
        ck_.push_back((n % 2 == 0 && k == kmax) ? 1.0 : 2.0);
    }
    const auto nb = static_cast<int64_t>(bins_.size());
    cos_.resize(nb * n);
    sin_.resize(nb * n);
    for (int64_t b = 0; b < nb; ++b) {
        const double w = kTwoPi * static_cast<double>(bins_[b]) / static_cast<double>(n);
        for (int64_t t = 0; t < n; ++t) {
            cos_[b * n + t] = std::cos(w * static_cast<double>(t));
            sin_[b * n + t] = std::sin(w * static_cast<double>(t));
        }
    }
}

std::vector<double> PsdPipeline::forward(const double* x, Trace* trace) const {
    const int64_t n = n_;
    std::vector<double> d(n);
    std::vector<double> xs(n);
    double sigma = 1.0;
    if (condition_) {
        const double mid = static_cast<double>(n - 1) / 2.0;
        double mean = 0.0;
        for (int64_t i = 0; i < n; ++i) mean += x[i];
        mean /= static_cast<double>(n);
        double stt = 0.0, sxt = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            const double tc = static_cast<double>(i) - mid;
            stt += tc * tc;
            sxt += tc * (x[i] - mean);
        }
        const double slope = sxt / stt;

        double ss = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            d[i] = x[i] - mean - slope * (static_cast<double>(i) - mid);
            ss += d[i] * d[i];
        }
        sigma = std::sqrt(ss / static_cast<double>(n));
        if (sigma > 0.0) {
            for (int64_t i = 0; i < n; ++i) xs[i] = d[i] / sigma;
        }
    } else {
        std::copy(x, x + n, d.begin());
        std::copy(x, x + n, xs.begin());
    }

    const auto nb = static_cast<int64_t>(bins_.size());
    std::vector<double> a(nb), b(nb), raw(nb);
    const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    double total = 0.0;
    for (int64_t k = 0; k < nb; ++k) {
        const double* ct = cos_.data() + k * n;
        const double* st = sin_.data() + k * n;
        double ak = 0.0, bk = 0.0;
        for (int64_t t = 0; t < n; ++t) {
            ak += xs[t] * ct[t];
            bk += xs[t] * st[t];
        }
        a[k] = ak;
        b[k] = bk;
        raw[k] = ck_[k] * (ak * ak + bk * bk) * inv_n2;
        total += raw[k];
    }

    std::vector<double> out(nb);
    if (normalize_) {
        if (total <= 0.0)
            throw InvalidInputError("psd: cannot normalize a spectrum with zero total power");
        for (int64_t k = 0; k < nb; ++k) out[k] = raw[k] / total;
    } else {
        out = raw;
    }

    if (trace) {
        trace->detrended = std::move(d);
        trace->sigma = sigma;
        trace->xs = std::move(xs);
        trace->a = std::move(a);
        trace->b = std::move(b);
        trace->raw = std::move(raw);
        trace->total = total;
    }
    return out;
}

std::vector<double> PsdPipeline::backward(const Trace& trace,
                                          const std::vector<double>& dpower) const {
    const int64_t n = n_;
    const auto nb = static_cast<int64_t>(bins_.size());
    if (static_cast<int64_t>(dpower.size()) != nb)
        throw ShapeError("psd backward: gradient length mismatch");

    // Through the normalization y_k = raw_k / total.
    std::vector<double> draw(nb);
    if (normalize_) {
        double gy = 0.0;
        for (int64_t k = 0; k < nb; ++k) gy += dpower[k] * trace.raw[k];
        gy /= trace.total * trace.total;
        for (int64_t k = 0; k < nb; ++k) draw[k] = dpower[k] / trace.total - gy;
    } else {
        draw = dpower;
    }

    // Through the periodogram into the standardized window.
    std::vector<double> dxs(n, 0.0);
    const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    for (int64_t k = 0; k < nb; ++k) {
        const double ga = draw[k] * ck_[k] * 2.0 * trace.a[k] * inv_n2;
        const double gb = draw[k] * ck_[k] * 2.0 * trace.b[k] * inv_n2;
        const double* ct = cos_.data() + k * n;
        const double* st = sin_.data() + k * n;
        for (int64_t t = 0; t < n; ++t) dxs[t] += ga * ct[t] + gb * st[t];
    }

    if (!condition_) return dxs;

    // Through standardization xs = d / sigma, sigma = sqrt(mean(d^2)).
    std::vector<double> dd(n, 0.0);
    if (trace.sigma > 0.0) {
        double gd = 0.0;
        for (int64_t t = 0; t < n; ++t) gd += dxs[t] * trace.detrended[t];
        const double s3 = trace.sigma * trace.sigma * trace.sigma;
        for (int64_t t = 0; t < n; ++t)
            dd[t] = dxs[t] / trace.sigma -
                    trace.detrended[t] * gd / (static_cast<double>(n) * s3);
    }

    // Through detrending: symmetric projector, so apply it to the gradient.
    const double mid = static_cast<double>(n - 1) / 2.0;
    double stt = 0.0;
    for (int64_t t = 0; t < n; ++t) {
        const double tc = static_cast<double>(t) - mid;
        stt += tc * tc;
    }
    double gmean = 0.0, gslope = 0.0;
    for (int64_t t = 0; t < n; ++t) {
        gmean += dd[t];
        gslope += dd[t] * (static_cast<double>(t) - mid);
    }
    gmean /= static_cast<double>(n);
    gslope /= stt;
    std::vector<double> dx(n);
    for (int64_t t = 0; t < n; ++t)
        dx[t] = dd[t] - gmean - gslope * (static_cast<double>(t) - mid);
    return dx;
}

Psd compute_psd(const Signal& s, Band band, bool normalize) {
    validate_signal(s);
    if (s.duration_s() < 2.0 - 1e-9)
        throw ResolutionError("psd: window must span at least 2 s, got " +
                              std::to_string(s.duration_s()) + " s");
    PsdPipeline pipe(s.size(), s.fps, band, normalize);
    if (band.lo_hz >= 0.0 && pipe.bins() < 3)
        throw ResolutionError("psd: fewer than 3 bins fall inside the band");
    Psd out;
    out.freqs = pipe.freqs();
    out.power = pipe.forward(s.values.data());
    return out;
}

double hr_from_psd(const Psd& psd) {
    if (psd.power.empty() || psd.power.size() != psd.freqs.size())
        throw InvalidInputError("hr_from_psd: empty or inconsistent spectrum");
    double best = -1.0;
    size_t arg = 0;
    for (size_t k = 0; k < psd.power.size(); ++k) {
        const double p = psd.power[k];
        if (!std::isfinite(p) || p < 0.0)
            throw InvalidInputError("hr_from_psd: power values must be finite and nonnegative");
        if (p > best) {  // strict: ties keep the earlier (lower) frequency
            best = p;
            arg = k;
        }
    }
    if (best <= 0.0) throw NoPeakError("hr_from_psd: spectrum has no power");
    return 60.0 * psd.freqs[arg];
}

double snr_db(const Signal& rppg, double gt_hr_bpm) {
    if (!(gt_hr_bpm >= 40.0 && gt_hr_bpm <= 250.0))
        throw InvalidInputError("snr_db: reference HR must lie in [40, 250] bpm");
    validate_signal(rppg);
    if (rppg.duration_s() < 2.0 - 1e-9)
        throw ResolutionError("snr_db: window must span at least 2 s");
    // Raw periodogram: detrending would leak trend power into the noise
    // windows and spoil the documented cap behavior for clean tones.
    PsdPipeline pipe(rppg.size(), rppg.fps, kHrBand, /*normalize=*/false, /*condition=*/false);
    if (pipe.bins() < 3)
        throw ResolutionError("snr_db: fewer than 3 bins fall inside the band");
    const std::vector<double> power = pipe.forward(rppg.values.data());
    const double f0 = gt_hr_bpm / 60.0;
    double sig = 0.0, noise = 0.0;
    for (int64_t k = 0; k < pipe.bins(); ++k) {
        const double f = pipe.freqs()[k];
        const bool near_fund = std::abs(f - f0) <= 0.2;
        const bool near_harm = std::abs(f - 2.0 * f0) <= 0.2;
        (near_fund || near_harm ? sig : noise) += power[k];
    }
    if (sig <= 0.0) return -60.0;
    if (noise <= 0.0) return 60.0;
    return std::clamp(10.0 * std::log10(sig / noise), -60.0, 60.0);
}

double ipr(const Signal& s) {
    validate_signal(s);
    if (s.duration_s() < 2.0 - 1e-9)
        throw ResolutionError("ipr: window must span at least 2 s");
    PsdPipeline pipe(s.size(), s.fps, Band{-1.0, -1.0}, /*normalize=*/false, /*condition=*/false);
    const std::vector<double> power = pipe.forward(s.values.data());
    double total = 0.0, inband = 0.0;
    for (int64_t k = 0; k < pipe.bins(); ++k) {
        total += power[k];
        const double f = pipe.freqs()[k];
        if (f >= kHrBand.lo_hz && f <= kHrBand.hi_hz) inband += power[k];
    }
    if (total <= 0.0) throw InvalidInputError("ipr: zero total spectral power");
    return (total - inband) / total;
}

double pearson_r(const std::vector<double>& a, const std::vector<double>& b) {
    return pearson_with_grad(a, b).r;
}

PearsonGrad pearson_with_grad(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = static_cast<int64_t>(a.size());
    if (n < 2 || b.size() != a.size())
        throw InvalidInputError("pearson: need two equal-length series with >= 2 samples");
    double ma = 0.0, mb = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        if (!std::isfinite(a[i]) || !std::isfinite(b[i]))
            throw InvalidInputError("pearson: non-finite sample");
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double ca = a[i] - ma, cb = b[i] - mb;
        saa += ca * ca;
        sbb += cb * cb;
        sab += ca * cb;
    }
    if (saa <= 0.0 || sbb <= 0.0)
        throw UndefinedCorrelationError("pearson: constant input has no defined correlation");

    PearsonGrad out;
    const double denom = std::sqrt(saa * sbb);
    out.r = sab / denom;
    out.da.resize(n);
    out.db.resize(n);
    for (int64_t i = 0; i < n; ++i) {
        const double ca = a[i] - ma, cb = b[i] - mb;
        out.da[i] = cb / denom - sab * ca / (saa * denom);
        out.db[i] = ca / denom - sab * cb / (sbb * denom);
    }
    return out;
}

std::vector<double> detect_peaks(const Signal& s) {
    validate_signal(s);
    if (s.duration_s() < 5.0 - 1e-9)
        throw InvalidInputError("detect_peaks: need at least 5 s of signal");
    const int64_t n = s.size();
    const auto half = static_cast<int64_t>(std::llround(s.fps));  // +-1 s around each sample

    std::vector<double> kept_t;
    std::vector<double> kept_v;
    for (int64_t i = 1; i + 1 < n; ++i) {
        const double v = s.values[i];
        // Strict rise into the peak, plateau ties resolve to the first sample.
        if (!(v > s.values[i - 1] && v >= s.values[i + 1])) continue;

        const int64_t lo = std::max<int64_t>(0, i - half);
        const int64_t hi = std::min<int64_t>(n - 1, i + half);
        double mean = 0.0;
        for (int64_t j = lo; j <= hi; ++j) mean += s.values[j];
        mean /= static_cast<double>(hi - lo + 1);
        double var = 0.0;
        for (int64_t j = lo; j <= hi; ++j) {
            const double c = s.values[j] - mean;
            var += c * c;
        }
        var /= static_cast<double>(hi - lo + 1);
        if (!(v > mean + 0.3 * std::sqrt(var))) continue;

        const double t = static_cast<double>(i) / s.fps;
        if (!kept_t.empty() && t - kept_t.back() < 0.24) {
            if (v > kept_v.back()) {  // taller peak wins the refractory window
                kept_t.back() = t;
                kept_v.back() = v;
            }
            continue;
        }
        kept_t.push_back(t);
        kept_v.push_back(v);
    }
    return kept_t;
}

HrvMetrics hrv_metrics(const std::vector<double>& peak_times_s) {
    if (peak_times_s.size() < 8)
        throw InsufficientDataError("hrv: need at least 8 peaks, got " +
                                    std::to_string(peak_times_s.size()));
    for (size_t i = 1; i < peak_times_s.size(); ++i)
        if (!(peak_times_s[i] > peak_times_s[i - 1]))
            throw InvalidInputError("hrv: peak times must be strictly increasing");

    // IBI value between beats j and j+1 is attributed to the later beat time.
    std::vector<double> ibi_t, ibi_v;
    for (size_t i = 1; i < peak_times_s.size(); ++i) {
        ibi_t.push_back(peak_times_s[i]);
        ibi_v.push_back(peak_times_s[i] - peak_times_s[i - 1]);
    }

    // Resample at 4 Hz over the covered span.
    constexpr double kGridHz = 4.0;
    const double t0 = ibi_t.front(), t1 = ibi_t.back();
    const auto m = static_cast<int64_t>(std::floor((t1 - t0) * kGridHz)) + 1;
    if (m < 8) throw InsufficientDataError("hrv: beat series spans too little time");
    std::vector<double> grid(m);
    size_t seg = 0;
    for (int64_t i = 0; i < m; ++i) {
        const double t = t0 + static_cast<double>(i) / kGridHz;
        while (seg + 2 < ibi_t.size() && ibi_t[seg + 1] < t) ++seg;
        const double tl = ibi_t[seg], tr = ibi_t[seg + 1];
        const double u = (t - tl) / (tr - tl);
        grid[i] = ibi_v[seg] + u * (ibi_v[seg + 1] - ibi_v[seg]);
    }

    double mean = 0.0;
    for (double v : grid) mean += v;
    mean /= static_cast<double>(m);
    double varsum = 0.0;
    for (double& v : grid) {
        v -= mean;
        varsum += v * v;
    }
    // Metronomic beats leave only double-rounding dust in the series; treat
    // relative variability below 1e-9 as zero rather than analyzing noise.
    if (mean <= 0.0 || std::sqrt(varsum / static_cast<double>(m)) < 1e-9 * mean)
        throw DegenerateVariabilityError("hrv: inter-beat intervals are effectively constant");

    PsdPipeline pipe(m, kGridHz, Band{-1.0, -1.0}, /*normalize=*/false, /*condition=*/false);
    const std::vector<double> power = pipe.forward(grid.data());

    double lf = 0.0, hf = 0.0, rf_best = -1.0, rf_hz = 0.0;
    bool any_hf_bin = false;
    for (int64_t k = 0; k < pipe.bins(); ++k) {
        const double f = pipe.freqs()[k];
        if (f >= 0.04 && f < 0.15) lf += power[k];
        if (f >= 0.15 && f <= 0.4) {
            any_hf_bin = true;
            hf += power[k];
            if (power[k] > rf_best) {
                rf_best = power[k];
                rf_hz = f;
            }
        }
    }
    if (!any_hf_bin)
        throw DegenerateVariabilityError("hrv: no spectral bins fall in the HF band");
    if (lf + hf <= 0.0)
        throw DegenerateVariabilityError("hrv: zero power in both LF and HF bands");

    HrvMetrics out;
    out.lf_nu = lf / (lf + hf);
    out.hf_nu = hf / (lf + hf);
    out.lf_hf_ratio = hf > 0.0 ? lf / hf : std::numeric_limits<double>::infinity();
    out.rf_hz = rf_hz;
    return out;
}

void write_signal_csv(const std::string& path, const Signal& s) {
    validate_signal(s, 1);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "time_s,value\n";
    char buf[64];
    for (int64_t i = 0; i < s.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9f,%.17g\n", static_cast<double>(i) / s.fps,
                      s.values[i]);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

Signal read_signal_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("signal csv: empty file: " + path);
    if (line.rfind("time_s,value", 0) != 0)
        throw FormatError("signal csv: bad header line, expected 'time_s,value'");
    std::vector<double> times, values;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tcol, vcol;
        if (!std::getline(ss, tcol, ',') || !std::getline(ss, vcol))
            throw FormatError("signal csv: line " + std::to_string(lineno) +
                              ": expected two comma-separated columns");
        try {
            times.push_back(std::stod(tcol));
            values.push_back(std::stod(vcol));
        } catch (const std::exception&) {
            throw FormatError("signal csv: line " + std::to_string(lineno) + ": not a number");
        }
    }
    if (times.size() < 2) throw FormatError("signal csv: need at least 2 rows");
    const double dt = times[1] - times[0];
    if (!(dt > 0.0)) throw FormatError("signal csv: time column must increase");
    for (size_t i = 1; i < times.size(); ++i) {
        const double step = times[i] - times[i - 1];
        if (std::abs(step - dt) > 1e-6 * std::max(1.0, std::abs(dt)))
            throw FormatError("signal csv: non-uniform sampling at line " +
                              std::to_string(i + 2));
    }
    Signal s;
    s.fps = 1.0 / dt;
    s.values = std::move(values);
    return s;
}

}  // namespace cplab
