#pragma once

#include <cstdint>
#include <vector>

#include "cplab/dataset.hpp"

namespace cplab {

struct KsTest {
    double statistic = 0.0;  // sup |ECDF_a - ECDF_b|
    double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test. The p-value comes from the asymptotic
// Kolmogorov distribution, Q(lambda) = 2 sum_k (-1)^(k-1) exp(-2 k^2 lambda^2)
// truncated at 100 terms with lambda = sqrt(n a b / (a + b)) * statistic;
// exact small-sample tables are out of scope. Empty or non-finite samples
// raise InvalidInputError.
KsTest two_sample_ks(const std::vector<double>& a, const std::vector<double>& b);

struct StatsOptions {
    int64_t grid = 4;       // spatial grid laid over the face crop
    int64_t windows = 4;    // temporal windows per grid-cell trace
    int64_t crop_size = 64;
};

// PSD-pair MSE samples for the similarity analysis plus the KS comparison.
struct StatsResult {
    std::vector<double> intra_mse;  // pairs within one video
    std::vector<double> cross_mse;  // pairs across two videos
    double ks_statistic = 0.0;
    double p_value = 1.0;
};

// Validates the two rPPG observations without any trained model or GT
// signal: each video's crop is cut into a grid x grid field of mean pixel
// traces, every trace into `windows` equal windows, and each window becomes
// a normalized HR-band PSD. Intra pairs are all unordered pairs of one
// video's PSDs; cross pairs are all ordered pairs between two videos that
// do not share a (cell, window) slot, so a corpus of duplicated videos
// yields identical distributions. Needs at least 8 uniformly shaped videos,
// else ConfigError.
StatsResult run_stats_validation(const std::vector<LabeledRecord>& records,
                                 const StatsOptions& opt = {});

}  // namespace cplab
