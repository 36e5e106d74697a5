#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cplab {

// A uniformly sampled scalar time series. values[i] sits at time i / fps.
struct Signal {
    std::vector<double> values;
    double fps = 0.0;

    int64_t size() const { return static_cast<int64_t>(values.size()); }
    double duration_s() const { return fps > 0 ? static_cast<double>(size()) / fps : 0.0; }
};

// One-sided power spectrum, DC excluded. freqs[i] in Hz, power[i] >= 0.
struct Psd {
    std::vector<double> freqs;
    std::vector<double> power;
};

struct Band {
    double lo_hz;
    double hi_hz;
};

// Heart-rate band: 0.66 Hz to 4.16 Hz (about 40 to 250 bpm), inclusive.
inline constexpr Band kHrBand{0.66, 4.16};

struct HrvMetrics {
    double lf_nu = 0.0;        // LF / (LF + HF), LF band [0.04, 0.15) Hz
    double hf_nu = 0.0;        // HF / (LF + HF), HF band [0.15, 0.4] Hz
    double lf_hf_ratio = 0.0;  // LF / HF, +inf when HF power is zero
    double rf_hz = 0.0;        // respiration proxy: peak frequency within HF
};

// Throws InvalidInputError unless the signal is finite, fps > 0 and there
// are at least min_len samples.
void validate_signal(const Signal& s, int64_t min_len = 2);

// Remove the least-squares line, then divide by the population standard
// deviation. A signal that is constant after detrending comes back all-zero.
Signal detrend_standardize(const Signal& s);

// Differentiable window -> PSD pipeline: detrend, standardize, one-sided
// periodogram P_k = c_k * |X_k|^2 / n^2 (c_k = 2 except the Nyquist bin),
// optional band restriction, optional division by the in-band sum. The same
// object serves many windows of identical length; trig tables are built once.
class PsdPipeline {
  public:
    // band.lo_hz < 0 disables band restriction (full spectrum minus DC).
    // condition=false skips detrend+standardize and transforms the window
    // as-is (the raw periodogram ignores the mean anyway since DC is gone).
    PsdPipeline(int64_t n, double fps, Band band, bool normalize, bool condition = true);

    const std::vector<double>& freqs() const { return freqs_; }
    int64_t bins() const { return static_cast<int64_t>(freqs_.size()); }
    int64_t length() const { return n_; }

    struct Trace {
        std::vector<double> detrended;  // after line removal
        double sigma = 0.0;             // population std of detrended input
        std::vector<double> xs;         // standardized
        std::vector<double> a, b;       // cos/sin projections per bin
        std::vector<double> raw;        // band power before normalization
        double total = 0.0;             // sum of raw
    };

    // x must have length(). Pass a Trace to enable backward().
    std::vector<double> forward(const double* x, Trace* trace = nullptr) const;
    // Vector-Jacobian product: dL/d(output) -> dL/d(input window).
    std::vector<double> backward(const Trace& trace, const std::vector<double>& dpower) const;

  private:
    int64_t n_;
    double fps_;
    bool normalize_;
    bool condition_;
    std::vector<double> freqs_;
    std::vector<int64_t> bins_;      // spectrum indices k kept
    std::vector<double> ck_;         // one-sided weight per kept bin
    std::vector<double> cos_, sin_;  // tables, bins x n
};

// In-band PSD of a whole signal. Duration must be at least 2 s and the band
// must contain at least 3 bins, else ResolutionError.
Psd compute_psd(const Signal& s, Band band = kHrBand, bool normalize = true);

// 60 * argmax frequency of the PSD; ties break toward the lower frequency.
// All-zero power raises NoPeakError.
double hr_from_psd(const Psd& psd);

// de Haan style SNR in dB: power within +-0.2 Hz of the reference HR and its
// first harmonic (intersected with the HR band) versus the remaining in-band
// power. Clamped to [-60, 60] so empty windows stay meaningful.
double snr_db(const Signal& rppg, double gt_hr_bpm);

// Irrelevant-power ratio: fraction of total (DC-excluded) spectral power
// lying outside the HR band. Lower is better. Zero total power is invalid.
double ipr(const Signal& s);

double pearson_r(const std::vector<double>& a, const std::vector<double>& b);

struct PearsonGrad {
    double r = 0.0;
    std::vector<double> da, db;
};
PearsonGrad pearson_with_grad(const std::vector<double>& a, const std::vector<double>& b);

// Systolic-peak picking: local maxima above a rolling mean + 0.3 * rolling
// std (centered 2 s window), with a 0.24 s refractory gap that keeps the
// taller of two close peaks. Needs at least 5 s of signal. Returns times.
std::vector<double> detect_peaks(const Signal& s);

// Frequency-domain HRV from peak times: inter-beat intervals resampled at
// 4 Hz, mean removed, periodogram, LF/HF band powers. Needs >= 8 peaks.
HrvMetrics hrv_metrics(const std::vector<double>& peak_times_s);

// Two-column CSV (time_s,value) with a header line.
void write_signal_csv(const std::string& path, const Signal& s);
Signal read_signal_csv(const std::string& path);

}  // namespace cplab
