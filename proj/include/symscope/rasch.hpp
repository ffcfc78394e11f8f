#pragma once

#include "symscope/scoretable.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace symscope {

// Dichotomization rule for the logistic latent-trait fit: response is 1
// when the raw 0..3 score is at least `threshold`.
struct DichotomizeRule {
    int threshold = 1;
    std::string tag() const { return "score_ge_" + std::to_string(threshold); }
};

struct RaschFit {
    std::array<double, kNumSymptoms> locations;  // item location b_j
    std::array<int, kNumSymptoms> ranks;         // 1 = lowest location
    std::string dichotomization;
    int iterations = 0;
    double log_likelihood = 0.0;
    double final_grad_norm = 0.0;
    std::vector<double> ll_trace;  // marginal log-likelihood per iteration
    std::vector<double> latent_nodes;
    std::vector<double> latent_weights;
};

// Marginal maximum likelihood for the 1-parameter logistic model: latent
// severity standard normal, slope fixed at 1, item locations free.
// 21-node Gauss-Hermite quadrature; EM with Newton location updates.
RaschFit fit_rasch(const ScoreTable& t, DichotomizeRule rule = {});

// Rank 1 goes to the smallest location; ties broken by item index.
std::array<int, kNumSymptoms> ranks_from_locations(const std::array<double, kNumSymptoms>& locations);

// Location ranks of two sources over the same individuals, with paired
// bootstrap CIs on the ranks and on the per-item rank differences.
struct DifRanks {
    std::array<double, kNumSymptoms> loc_a, loc_b;
    std::array<int, kNumSymptoms> rank_a, rank_b;
    std::array<int, kNumSymptoms> rank_diff;  // a - b
    std::array<double, kNumSymptoms> a_ci_low, a_ci_high;
    std::array<double, kNumSymptoms> b_ci_low, b_ci_high;
    std::array<double, kNumSymptoms> diff_ci_low, diff_ci_high;
    std::array<bool, kNumSymptoms> diff_significant;
    int trials = 0;
    double level = 0.0;
    std::uint64_t seed = 0;
    int failed_trials = 0;
};

DifRanks dif_ranks(const ScoreTable& a, const ScoreTable& b, DichotomizeRule rule = {},
                   int trials = 500, double level = 0.95, std::uint64_t seed = 0);

void write_rasch_csv(const DifRanks& result, const std::string& source_a, const std::string& source_b,
                     const std::string& path);

} // namespace symscope
