#pragma once

#include <vector>

#include "cplab/signal.hpp"

namespace cplab {

struct LossBreakdown {
    double l_p_rr = 0.0;
    double l_n_rr = 0.0;
    double l_p_gr = 0.0;
    double l_n_gr = 0.0;
    double total = 0.0;
};

// Contrastive PSD losses. f/fp hold the N rPPG sample spectra of the two
// clips in a batch, g/gp their GT sample spectra (empty unless the matching
// phi flag is set). Every spectrum must live on one shared frequency grid.
// Distances are plain sums of squared per-bin differences, no mean over bins.
//
// Pull together samples of the same clip (and its own GT), push apart
// samples of different clips (and the other clip's GT). The gr terms are
// averaged over the labeled clips only and vanish exactly when neither clip
// is labeled, so unlabeled batches degrade to the unsupervised pair of terms.
double loss_rr_pos(const std::vector<Psd>& f, const std::vector<Psd>& fp);
double loss_rr_neg(const std::vector<Psd>& f, const std::vector<Psd>& fp);
double loss_gr_pos(const std::vector<Psd>& f, const std::vector<Psd>& g,
                   const std::vector<Psd>& fp, const std::vector<Psd>& gp, bool phi,
                   bool phi_p);
double loss_gr_neg(const std::vector<Psd>& f, const std::vector<Psd>& g,
                   const std::vector<Psd>& fp, const std::vector<Psd>& gp, bool phi,
                   bool phi_p);
LossBreakdown loss_total(const std::vector<Psd>& f, const std::vector<Psd>& fp,
                         const std::vector<Psd>& g, const std::vector<Psd>& gp, bool phi,
                         bool phi_p);

struct LossGrads {
    LossBreakdown value;
    // d(total)/d(power bin), one vector per rPPG sample. GT spectra are
    // constants, so no gradient is produced for them.
    std::vector<std::vector<double>> df, dfp;
};
LossGrads loss_total_with_grad(const std::vector<Psd>& f, const std::vector<Psd>& fp,
                               const std::vector<Psd>& g, const std::vector<Psd>& gp,
                               bool phi, bool phi_p);

// Ablation switch: a disabled term is reported as 0 in the breakdown and
// contributes nothing to total or gradients. Inputs are still validated in
// full, so a masked call rejects exactly what an unmasked one would.
struct TermMask {
    bool p_rr = true;
    bool n_rr = true;
    bool p_gr = true;
    bool n_gr = true;
};
LossGrads loss_total_with_grad(const std::vector<Psd>& f, const std::vector<Psd>& fp,
                               const std::vector<Psd>& g, const std::vector<Psd>& gp,
                               bool phi, bool phi_p, const TermMask& mask);

}  // namespace cplab
