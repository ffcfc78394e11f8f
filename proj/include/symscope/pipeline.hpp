#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "symscope/assessor.hpp"
#include "symscope/cache.hpp"
#include "symscope/dla.hpp"
#include "symscope/normalizer.hpp"
#include "symscope/synth.hpp"

#include <nlohmann/json.hpp>

namespace symscope {

// Analysis knobs shared by the analyze and replicate stages. Defaults match
// the reference analysis: 500 bootstrap trials, 95% matrix CIs, 90% schema
// CIs, PMI threshold 4.0, minimum 10 users, BH q = 0.05.
struct AnalysisKnobs {
    int trials = 500;
    double matrix_level = 0.95;
    double schema_level = 0.90;
    std::uint64_t seed = 0;
    DlaConfig dla{};
    int dichotomize_threshold = 1;
    int schema_min_implicit_rows = 30;
};

struct AnalyzeInputs {
    std::string corpus_path;
    std::string experts_path;  // empty: no expert channel
    std::string scores_csv;
    std::string spans_jsonl;
    std::string repairs_jsonl;
    std::string out_dir;
};

// Rebuilds assessment records from the normalize-stage artifacts.
std::vector<AssessmentRecord> read_normalized_records(const std::string& scores_csv,
                                                      const std::string& spans_jsonl);

// Repair bookkeeping parsed back from repairs.jsonl.
struct RepairSummary {
    int repaired_records = 0;
    int failures = 0;
    std::map<std::string, int> tag_counts;
};
RepairSummary read_repairs(const std::string& repairs_jsonl);

// Runs the full battery and writes every analysis artifact plus
// summary.json under out_dir. Returns the summary document.
nlohmann::json run_analyze(const AnalyzeInputs& inputs, const AnalysisKnobs& knobs);

// Markdown digest of a summary document (the `report` stage).
std::string render_report(const nlohmann::json& summary);

// Pulls cached raw replies for every corpus record by recomputing each
// request fingerprint from the prompt, decoding config and model id.
// Records without a cached reply are returned in `missing`.
struct CachedReplies {
    std::map<std::string, std::string> replies;
    std::vector<std::string> missing;
};
CachedReplies replies_from_cache(const std::vector<EssayRecord>& corpus, ResponseCache& cache,
                                 const std::string& model_id, const DecodingConfig& cfg);

struct ReplicateOptions {
    int n = 955;
    std::uint64_t seed = 7;
    std::string out_dir;
    AnalysisKnobs knobs{};
    int parallelism = 1;
};

// synth -> assess (mock transport, epoch clock) -> normalize -> analyze ->
// compare against the world manifest. Writes replicate_report.json; returns
// the report with "all_pass" set.
nlohmann::json run_replicate(const ReplicateOptions& opts);

} // namespace symscope
