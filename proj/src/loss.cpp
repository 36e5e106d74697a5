#include "cplab/loss.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "cplab/errors.hpp"

namespace cplab {

namespace {

void check_grid(const std::string& who, const std::vector<const std::vector<Psd>*>& groups) {
    const Psd* ref = nullptr;
    for (const auto* g : groups)
        for (const auto& p : *g) {
            if (p.freqs.size() != p.power.size())
                throw ShapeError(who + ": spectrum freqs/power lengths differ");
            if (p.power.empty()) throw ShapeError(who + ": empty spectrum");
            if (!ref) {
                ref = &p;
                continue;
            }
            if (p.freqs.size() != ref->freqs.size())
                throw ShapeError(who + ": spectra live on different frequency grids");
            for (size_t b = 0; b < p.freqs.size(); ++b)
                if (std::abs(p.freqs[b] - ref->freqs[b]) > 1e-9)
                    throw ShapeError(who + ": spectra live on different frequency grids");
        }
}

double sq_dist(const Psd& a, const Psd& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.power.size(); ++i) {
        const double d = a.power[i] - b.power[i];
        acc += d * d;
    }
    return acc;
}

void check_pair(const std::string& who, const std::vector<Psd>& f,
                const std::vector<Psd>& fp) {
    if (f.empty() || fp.size() != f.size())
        throw ShapeError(who + ": the two clips need the same nonzero sample count");
}

void check_gt_group(const std::string& who, const std::vector<Psd>& g, bool phi, size_t n) {
    if (!phi) {
        if (!g.empty())
            throw ConsistencyError(who + ": GT spectra present for an unlabeled clip");
        return;
    }
    if (g.size() != n) throw ShapeError(who + ": need one GT spectrum per rPPG sample");
}

}  // namespace

double loss_rr_pos(const std::vector<Psd>& f, const std::vector<Psd>& fp) {
    check_pair("loss_rr_pos", f, fp);
    const auto n = static_cast<int64_t>(f.size());
    if (n < 2) throw ConfigError("loss_rr_pos: needs at least two samples per clip");
    check_grid("loss_rr_pos", {&f, &fp});
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            if (j == i) continue;
            acc += sq_dist(f[i], f[j]) + sq_dist(fp[i], fp[j]);
        }
    return acc / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

double loss_rr_neg(const std::vector<Psd>& f, const std::vector<Psd>& fp) {
    check_pair("loss_rr_neg", f, fp);
    check_grid("loss_rr_neg", {&f, &fp});
    const auto n = static_cast<int64_t>(f.size());
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) acc += sq_dist(f[i], fp[j]);
    return -acc / (static_cast<double>(n) * static_cast<double>(n));
}

double loss_gr_pos(const std::vector<Psd>& f, const std::vector<Psd>& g,
                   const std::vector<Psd>& fp, const std::vector<Psd>& gp, bool phi,
                   bool phi_p) {
    check_pair("loss_gr_pos", f, fp);
    check_gt_group("loss_gr_pos", g, phi, f.size());
    check_gt_group("loss_gr_pos", gp, phi_p, fp.size());
    if (!phi && !phi_p) return 0.0;  // term drops from unlabeled batches
    check_grid("loss_gr_pos", {&f, &g, &fp, &gp});
    const auto n = static_cast<int64_t>(f.size());
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            if (phi) acc += sq_dist(f[i], g[j]);
            if (phi_p) acc += sq_dist(fp[i], gp[j]);
        }
    const double denom = static_cast<double>((phi ? 1 : 0) + (phi_p ? 1 : 0)) *
                         static_cast<double>(n) * static_cast<double>(n);
    return acc / denom;
}

double loss_gr_neg(const std::vector<Psd>& f, const std::vector<Psd>& g,
                   const std::vector<Psd>& fp, const std::vector<Psd>& gp, bool phi,
                   bool phi_p) {
    check_pair("loss_gr_neg", f, fp);
    check_gt_group("loss_gr_neg", g, phi, f.size());
    check_gt_group("loss_gr_neg", gp, phi_p, fp.size());
    if (!phi && !phi_p) return 0.0;
    check_grid("loss_gr_neg", {&f, &g, &fp, &gp});
    const auto n = static_cast<int64_t>(f.size());
    // cross-pairing: a clip's samples are pushed away from the other clip's GT
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            if (phi) acc += sq_dist(fp[i], g[j]);
            if (phi_p) acc += sq_dist(f[i], gp[j]);
        }
    const double denom = static_cast<double>((phi ? 1 : 0) + (phi_p ? 1 : 0)) *
                         static_cast<double>(n) * static_cast<double>(n);
    return -acc / denom;
}

LossBreakdown loss_total(const std::vector<Psd>& f, const std::vector<Psd>& fp,
                         const std::vector<Psd>& g, const std::vector<Psd>& gp, bool phi,
                         bool phi_p) {
    LossBreakdown out;
    out.l_p_rr = loss_rr_pos(f, fp);
    out.l_n_rr = loss_rr_neg(f, fp);
    out.l_p_gr = loss_gr_pos(f, g, fp, gp, phi, phi_p);
    out.l_n_gr = loss_gr_neg(f, g, fp, gp, phi, phi_p);
    out.total = out.l_p_rr + out.l_n_rr + out.l_p_gr + out.l_n_gr;
    return out;
}

LossGrads loss_total_with_grad(const std::vector<Psd>& f, const std::vector<Psd>& fp,
                               const std::vector<Psd>& g, const std::vector<Psd>& gp,
                               bool phi, bool phi_p) {
    return loss_total_with_grad(f, fp, g, gp, phi, phi_p, TermMask{});
}

LossGrads loss_total_with_grad(const std::vector<Psd>& f, const std::vector<Psd>& fp,
                               const std::vector<Psd>& g, const std::vector<Psd>& gp,
                               bool phi, bool phi_p, const TermMask& mask) {
    LossGrads out;
    out.value = loss_total(f, fp, g, gp, phi, phi_p);
    if (!mask.p_rr) out.value.l_p_rr = 0.0;
    if (!mask.n_rr) out.value.l_n_rr = 0.0;
    if (!mask.p_gr) out.value.l_p_gr = 0.0;
    if (!mask.n_gr) out.value.l_n_gr = 0.0;
    out.value.total =
        out.value.l_p_rr + out.value.l_n_rr + out.value.l_p_gr + out.value.l_n_gr;

    const auto n = static_cast<int64_t>(f.size());
    const auto bins = static_cast<int64_t>(f[0].power.size());
    out.df.assign(n, std::vector<double>(bins, 0.0));
    out.dfp.assign(n, std::vector<double>(bins, 0.0));

    const double sp = 1.0 / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
    const double sn = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) {
            if (mask.p_rr && j != i) {
                for (int64_t b = 0; b < bins; ++b) {
                    const double d = f[i].power[b] - f[j].power[b];
                    out.df[i][b] += 2.0 * d * sp;
                    out.df[j][b] -= 2.0 * d * sp;
                    const double dp = fp[i].power[b] - fp[j].power[b];
                    out.dfp[i][b] += 2.0 * dp * sp;
                    out.dfp[j][b] -= 2.0 * dp * sp;
                }
            }
            if (mask.n_rr)
                for (int64_t b = 0; b < bins; ++b) {
                    const double d = f[i].power[b] - fp[j].power[b];
                    out.df[i][b] -= 2.0 * d * sn;
                    out.dfp[j][b] += 2.0 * d * sn;
                }
        }

    if (phi || phi_p) {
        const double denom = static_cast<double>((phi ? 1 : 0) + (phi_p ? 1 : 0)) *
                             static_cast<double>(n) * static_cast<double>(n);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < n; ++j)
                for (int64_t b = 0; b < bins; ++b) {
                    if (phi) {
                        if (mask.p_gr)
                            out.df[i][b] += 2.0 * (f[i].power[b] - g[j].power[b]) / denom;
                        if (mask.n_gr)
                            out.dfp[i][b] -= 2.0 * (fp[i].power[b] - g[j].power[b]) / denom;
                    }
                    if (phi_p) {
                        if (mask.p_gr)
                            out.dfp[i][b] += 2.0 * (fp[i].power[b] - gp[j].power[b]) / denom;
                        if (mask.n_gr)
                            out.df[i][b] -= 2.0 * (f[i].power[b] - gp[j].power[b]) / denom;
                    }
                }
    }
    return out;
}

}  // namespace cplab
