#pragma once

#include "symscope/corpus.hpp"
#include "symscope/symptoms.hpp"

#include <array>
#include <string>
#include <vector>

namespace symscope {

// Tabular scores for one source: N rows, 9 item columns. The explicit mask
// is present only for model-derived tables (self-reports have no notion of
// explicitness).
struct ScoreTable {
    std::string source;  // "model", "self_report", "expert:<rater>"
    std::vector<std::string> row_ids;
    std::vector<std::array<int, kNumSymptoms>> matrix;
    std::vector<std::array<bool, kNumSymptoms>> explicit_mask;  // empty or size() == rows
    std::vector<int> totals;                                    // row sums

    std::size_t rows() const { return matrix.size(); }
    bool has_mask() const { return !explicit_mask.empty(); }

    // One item column as reals, for correlation work.
    std::vector<double> column(int item) const;
    std::vector<double> totals_real() const;
};

// Recomputes row sums; call after building matrix by hand.
void refresh_totals(ScoreTable& table);

// Self-report columns of a corpus, rows in corpus order.
ScoreTable self_report_table(const std::vector<EssayRecord>& corpus);

// Scores of one expert rater across the corpus; participants this rater
// did not score are skipped. ids_out mirrors row order.
ScoreTable expert_table(const std::vector<EssayRecord>& corpus, const std::string& rater_id);

// All rater ids present anywhere in the corpus, sorted.
std::vector<std::string> expert_rater_ids(const std::vector<EssayRecord>& corpus);

// Restrict both tables to rows whose ids appear in both, aligned by id in
// the order of `a`. Needed before any paired statistic.
void align_rows(ScoreTable& a, ScoreTable& b);

} // namespace symscope
