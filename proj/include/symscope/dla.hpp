#pragma once

#include "symscope/normalizer.hpp"

#include <string>
#include <vector>

namespace symscope {

struct DlaConfig {
    int min_users = 10;          // distinct participants an n-gram must reach
    double q = 0.05;             // BH level for both effect and severity p-values
    double pmi_threshold = 4.0;  // inclusive retention bound
    int max_order = 3;           // 1-, 2-, 3-grams
};

struct TokenStream {
    std::vector<std::string> tokens;  // lowercased, alphabetic only
    std::vector<bool> in_span;
};

// Lowercases and splits on every non-alphabetic character, then marks the
// tokens covered by the cited spans. Spans are located by matching their
// own token sequence against the essay's (first occurrence); a span whose
// tokens never occur contributes no labels.
TokenStream tokenize(const std::string& essay, const std::vector<std::string>& spans);

struct NGramStat {
    std::string ngram;  // space-joined tokens
    int order = 0;
    int users = 0;
    double rel_freq_in = 0.0;   // mean per-participant relative frequency inside spans
    double rel_freq_out = 0.0;  // and outside
    double d = 0.0;
    double p = 1.0;
    bool p_bh_reject = false;
    double pmi = 0.0;
    bool pmi_pass = false;      // pmi >= threshold
    double severity_r = 0.0;
    double severity_p = 1.0;
    bool severity_defined = false;
    bool severity_sig = false;  // BH across features
    bool retained = false;      // users, BH, and PMI gates all pass
    std::string note;           // reason when a statistic is undefined
};

struct DlaResult {
    std::vector<NGramStat> features;  // candidates with users >= min_users, sorted by d desc
    int vocabulary_size = 0;          // distinct n-grams before the user gate
    int candidate_count = 0;
    int retained_count = 0;
    std::vector<std::string> warnings;  // spans that could not be located
};

// Full pipeline: n-gram extraction, in-span effect size with BH decision,
// PMI gate, and severity correlation against the model's total scores.
DlaResult differential_language_analysis(const std::vector<AssessmentRecord>& records,
                                         const std::vector<EssayRecord>& corpus,
                                         const DlaConfig& cfg = {});

void write_dla_csv(const DlaResult& result, const std::string& path);

} // namespace symscope
