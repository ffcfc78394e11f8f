#pragma once

#include "symscope/corpus.hpp"
#include "symscope/errors.hpp"
#include "symscope/scoretable.hpp"
#include "symscope/symptoms.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace symscope {

// Repair tags. Each repair applied while parsing a reply is appended to the
// record's repair_log as "<tag>: <detail>".
inline constexpr const char* kRepairAlias = "alias_map";
inline constexpr const char* kRepairAspect = "aspect_map";
inline constexpr const char* kRepairMergedSiblings = "merged_siblings";
inline constexpr const char* kRepairStrippedProse = "stripped_prose";
inline constexpr const char* kRepairNonPhq9 = "non_phq9";
inline constexpr const char* kRepairUnbalancedQuotes = "unbalanced_quotes";

struct SymptomAssessment {
    int score = 0;
    bool is_explicit = false;
    std::vector<std::string> spans;  // explicit entries only
    std::string rationale;           // implicit entries only
};

struct AssessmentRecord {
    std::string participant_id;
    std::array<SymptomAssessment, kNumSymptoms> symptoms;
    int combined_score_reported = 0;
    std::string category_reported;
    std::vector<std::string> repair_log;

    int recomputed_total() const;
    bool was_repaired() const { return !repair_log.empty(); }
};

// True when the log contains an entry with this tag (detail ignored).
bool has_repair(const AssessmentRecord& record, std::string_view tag);

// Raised when a reply cannot be parsed even after the documented repairs;
// carries the raw text and whatever repairs were applied before failing.
class ReplyParseError : public Error {
public:
    ReplyParseError(const std::string& what, std::string raw, std::vector<std::string> repair_log);
    const std::string& raw_text() const { return raw_; }
    const std::vector<std::string>& repair_log() const { return repair_log_; }

private:
    std::string raw_;
    std::vector<std::string> repair_log_;
};

struct SpanExtraction {
    std::vector<std::string> spans;
    bool unbalanced = false;
};

// Every maximal single-quoted substring of the text, order preserved. A
// quote flanked by letters on both sides is an apostrophe, not a delimiter.
// An unclosed final quote yields a best-effort span to end of text.
SpanExtraction extract_spans(const std::string& step1_value);

// Parses one raw reply into a record. participant_id is attached verbatim.
AssessmentRecord parse_reply(const std::string& raw, const std::string& participant_id);

// Canonical serialization: explicit symptoms under STEP 1 with each span
// re-quoted, the rest under STEP 2, reported total and category verbatim.
// parse_reply(render_reply(r)) reproduces r's scores, masks and spans.
std::string render_reply(const AssessmentRecord& record);

enum class SpanMatch { Exact, Normalized, None };

const char* to_string(SpanMatch match);

struct SpanMatchEntry {
    int symptom;
    std::string span;
    SpanMatch match;
};

struct SpanMatchReport {
    std::string participant_id;
    std::vector<SpanMatchEntry> entries;
    int exact = 0;
    int normalized = 0;
    int unmatched = 0;
};

// Checks every cited span against the essay: exact substring, substring
// after case/whitespace/punctuation folding, or no match.
SpanMatchReport validate_against_essay(const AssessmentRecord& record, const EssayRecord& essay);

struct TabulateResult {
    ScoreTable table;  // source "model"; totals are recomputed row sums
    std::vector<int> reported_totals;
    std::vector<std::string> reported_categories;
    int total_mismatches = 0;     // reported combined score != recomputed sum
    int category_mismatches = 0;  // reported category != standard banding of the sum
};

// Rows follow the given record order (callers pass records in corpus order).
TabulateResult tabulate(const std::vector<AssessmentRecord>& records);

struct NormalizeOutcome {
    std::vector<AssessmentRecord> records;        // corpus order, failures skipped
    std::map<std::string, std::string> failures;  // participant -> parse error
    int repaired_count = 0;
};

// Parses the reply of every corpus participant present in `replies`.
NormalizeOutcome normalize_replies(const std::vector<EssayRecord>& corpus,
                                   const std::map<std::string, std::string>& replies);

// Artifact emitters.
void write_scores_csv(const TabulateResult& result, const std::string& path);
void write_spans_jsonl(const std::vector<AssessmentRecord>& records,
                       const std::vector<EssayRecord>& corpus, const std::string& path);
void write_repairs_jsonl(const std::vector<AssessmentRecord>& records,
                         const std::map<std::string, std::string>& failures,
                         const std::string& path);

} // namespace symscope
