#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "symscope/symptoms.hpp"

namespace symscope {

// One participant's essay plus self-reported PHQ-9 item scores. Expert
// vectors are attached later from a separate file and stay absent (never
// zero-filled) when no annotation exists.
struct ExpertScores {
    std::string rater_id;
    std::array<int, kNumSymptoms> items;
};

struct EssayRecord {
    std::string participant_id;
    std::string essay_text;
    std::array<int, kNumSymptoms> self_report;
    std::vector<ExpertScores> expert_scores;
    std::map<std::string, std::string> meta;

    int self_report_total() const;
};

// Reads a line-delimited JSON corpus (one participant per line).
// Validates: unique ids, item scores in 0..=3, non-blank essays. Ordering
// preserved.
std::vector<EssayRecord> load_corpus(const std::filesystem::path& path);

// Inverse of load_corpus; load(write(c)) is field-by-field identical to c.
void write_corpus(const std::filesystem::path& path, const std::vector<EssayRecord>& corpus);

// Attaches rows of experts.csv (participant_id, rater_id, 9 item columns)
// to the matching records. Returns the number of records that gained at
// least one expert vector. Unknown ids and short rows are errors.
int load_expert_scores(const std::filesystem::path& path, std::vector<EssayRecord>& corpus);

void write_expert_scores(const std::filesystem::path& path, const std::vector<EssayRecord>& corpus);

// FNV-1a checksum over ids in corpus order; manifests record it so a
// loaded corpus can be matched against its generator.
std::string corpus_id_checksum(const std::vector<EssayRecord>& corpus);

} // namespace symscope
