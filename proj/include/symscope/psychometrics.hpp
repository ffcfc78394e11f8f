#pragma once

#include "symscope/scoretable.hpp"
#include "symscope/stats.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace symscope {

using Matrix9 = std::array<std::array<double, kNumSymptoms>, kNumSymptoms>;

// Per-item and total Pearson agreement between two aligned tables. Items
// where the correlation is undefined are reported, not fatal.
struct ValidityResult {
    std::array<double, kNumSymptoms> item_r;
    std::array<bool, kNumSymptoms> item_defined;
    std::array<std::string, kNumSymptoms> item_note;  // reason when undefined
    double total_r;
};

ValidityResult convergent_validity(const ScoreTable& a, const ScoreTable& b);

struct IntersymptomResult {
    Matrix9 r;                                       // symmetric, unit diagonal
    std::array<double, kNumSymptoms> mean_offdiag;   // row means excluding diagonal
};

IntersymptomResult intersymptom_matrix(const ScoreTable& t);

// Bootstrapped cell-wise difference between two inter-symptom matrices.
// Resampling is paired: one row draw reindexes both tables.
struct MatrixDiffResult {
    Matrix9 delta;  // r_a - r_b
    Matrix9 ci_low;
    Matrix9 ci_high;
    std::array<std::array<bool, kNumSymptoms>, kNumSymptoms> significant;  // CI excludes 0
    int trials;
    double level;
    std::uint64_t seed;
    int redrawn_resamples;  // degenerate draws replaced within their trial
};

MatrixDiffResult matrix_difference_ci(const ScoreTable& a, const ScoreTable& b, int trials = 500,
                                      double level = 0.95, std::uint64_t seed = 0);

// Paired bootstrap CI on r(x, y1) - r(x, y2), all three sampled on the same
// individuals. Backs the significance daggers of the validity report.
struct RDiffResult {
    double delta;
    Ci ci;
    bool significant;
    int trials;
    double level;
};

RDiffResult paired_r_difference_ci(const std::vector<double>& x, const std::vector<double>& y1,
                                   const std::vector<double>& y2, int trials = 500,
                                   double level = 0.95, std::uint64_t seed = 0);

// Convergence of model and self-report scores split by explicitness: per
// item, r over rows the model marked explicit vs rows it inferred. Splits
// with fewer than min_rows rows (or undefined r) are omitted with a note.
struct SplitValidity {
    std::array<double, kNumSymptoms> r_explicit;
    std::array<double, kNumSymptoms> r_implicit;
    std::array<bool, kNumSymptoms> explicit_defined;
    std::array<bool, kNumSymptoms> implicit_defined;
    std::array<std::string, kNumSymptoms> explicit_note;
    std::array<std::string, kNumSymptoms> implicit_note;
    std::array<double, kNumSymptoms> pct_explicit;  // percent of rows, 0..100
    double mean_r_explicit;   // over defined items
    double mean_r_implicit;   // over defined items
    double mean_pct_explicit;
};

SplitValidity explicit_split_validity(const ScoreTable& model, const ScoreTable& self_report,
                                      int min_rows = 10);

// Percent of rows scoring 0/1/2/3 per item; each row sums to 100.
using Distribution = std::array<std::array<double, 4>, kNumSymptoms>;

Distribution score_distribution(const ScoreTable& t);

// Artifact emitters.
void write_validity_csv(const ValidityResult& model_vs_self,
                        const std::vector<std::pair<std::string, ValidityResult>>& expert_panels,
                        const std::string& path);
void write_intersymptom_csv(const IntersymptomResult& result, const std::string& source,
                            const std::string& path);
void write_diff_matrix_csv(const MatrixDiffResult& result, const std::string& path);
void write_split_validity_csv(const SplitValidity& split, const std::string& path);
void write_distribution_csv(const std::vector<std::pair<std::string, Distribution>>& per_source,
                            const std::string& path);

} // namespace symscope
