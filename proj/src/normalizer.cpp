#include "symscope/normalizer.hpp"

#include "symscope/csvio.hpp"

#include <nlohmann/json.hpp>

#include <cctype>
#include <numeric>
#include <regex>
#include <sstream>

namespace symscope {

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

std::string trimmed(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Case-folds and collapses every run of non-alphanumeric characters to one
// space. Used for the "normalized" tier of span matching.
std::string fold_text(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_gap = false;
    for (unsigned char c : s) {
        if (std::isalnum(c)) {
            if (pending_gap && !out.empty()) out.push_back(' ');
            pending_gap = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_gap = true;
        }
    }
    return out;
}

struct BlockScan {
    std::vector<std::string> blocks;  // complete top-level {...} regions
    bool prose = false;               // non-whitespace text outside blocks
};

// Locates top-level JSON objects inside free text, honoring double-quoted
// strings so braces in reasons cannot derail the scan.
BlockScan scan_blocks(const std::string& raw) {
    BlockScan out;
    int depth = 0;
    bool in_string = false, escape = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (depth == 0) {
            if (c == '{') {
                depth = 1;
                start = i;
            } else if (!std::isspace(static_cast<unsigned char>(c))) {
                out.prose = true;
            }
            continue;
        }
        if (in_string) {
            if (escape) escape = false;
            else if (c == '\\') escape = true;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) out.blocks.push_back(raw.substr(start, i - start + 1));
    }
    return out;
}

int coerce_score(const nlohmann::json& value, const std::string& entry_name, const std::string& raw,
                 const std::vector<std::string>& log) {
    long score = 0;
    if (value.is_number_integer()) {
        score = value.get<long>();
    } else if (value.is_number_float()) {
        double d = value.get<double>();
        if (d != static_cast<long>(d)) {
            throw ReplyParseError("score " + value.dump() + " for '" + entry_name + "' is not an integer",
                                  raw, log);
        }
        score = static_cast<long>(d);
    } else if (value.is_string()) {
        std::string text = trimmed(value.get<std::string>());
        std::size_t consumed = 0;
        try {
            score = std::stol(text, &consumed);
        } catch (const std::exception&) {
            consumed = 0;
        }
        if (text.empty() || consumed != text.size()) {
            throw ReplyParseError("score '" + value.get<std::string>() + "' for '" + entry_name +
                                      "' is not an integer",
                                  raw, log);
        }
    } else {
        throw ReplyParseError("score for '" + entry_name + "' is neither a number nor a string", raw, log);
    }
    if (score < 0 || score > 3) {
        throw ReplyParseError("score " + std::to_string(score) + " for '" + entry_name +
                                  "' is outside 0..3",
                              raw, log);
    }
    return static_cast<int>(score);
}

} // namespace

ReplyParseError::ReplyParseError(const std::string& what, std::string raw, std::vector<std::string> repair_log)
    : Error(ErrorKind::Parse, what), raw_(std::move(raw)), repair_log_(std::move(repair_log)) {}

int AssessmentRecord::recomputed_total() const {
    int total = 0;
    for (const auto& s : symptoms) total += s.score;
    return total;
}

bool has_repair(const AssessmentRecord& record, std::string_view tag) {
    for (const auto& entry : record.repair_log) {
        if (entry.size() >= tag.size() && std::string_view(entry).substr(0, tag.size()) == tag &&
            (entry.size() == tag.size() || entry[tag.size()] == ':')) {
            return true;
        }
    }
    return false;
}

SpanExtraction extract_spans(const std::string& step1_value) {
    // A single quote is a span delimiter unless flanked by word characters
    // on both sides (then it is an apostrophe, as in "don't").
    std::vector<std::size_t> delims;
    for (std::size_t i = 0; i < step1_value.size(); ++i) {
        if (step1_value[i] != '\'') continue;
        bool left = i > 0 && is_word_char(static_cast<unsigned char>(step1_value[i - 1]));
        bool right = i + 1 < step1_value.size() && is_word_char(static_cast<unsigned char>(step1_value[i + 1]));
        if (left && right) continue;
        delims.push_back(i);
    }
    SpanExtraction out;
    std::size_t k = 0;
    for (; k + 1 < delims.size(); k += 2) {
        std::string span = step1_value.substr(delims[k] + 1, delims[k + 1] - delims[k] - 1);
        if (!trimmed(span).empty()) out.spans.push_back(std::move(span));
    }
    if (k < delims.size()) {
        out.unbalanced = true;
        std::string tail = step1_value.substr(delims[k] + 1);
        if (!trimmed(tail).empty()) out.spans.push_back(std::move(tail));
    }
    return out;
}

namespace {

void process_step_entries(const nlohmann::json& step, bool is_step1, AssessmentRecord& rec,
                          std::array<bool, kNumSymptoms>& seen, const std::string& raw) {
    const auto& names = symptom_names();
    for (const auto& [name, value] : step.items()) {
        auto lookup = resolve_symptom_name(name);
        if (!lookup) {
            rec.repair_log.push_back(std::string(kRepairNonPhq9) + ": dropped entry '" + name + "'");
            continue;
        }
        const std::string& canonical = names[static_cast<std::size_t>(lookup->index)];
        if (lookup->match == NameMatch::Alias) {
            rec.repair_log.push_back(std::string(kRepairAlias) + ": '" + name + "' -> '" + canonical + "'");
        } else if (lookup->match == NameMatch::Aspect) {
            rec.repair_log.push_back(std::string(kRepairAspect) + ": '" + name + "' -> '" + canonical + "'");
        }
        if (seen[static_cast<std::size_t>(lookup->index)]) {
            throw ReplyParseError("symptom '" + canonical + "' assessed more than once", raw, rec.repair_log);
        }
        seen[static_cast<std::size_t>(lookup->index)] = true;

        if (!value.is_array() || value.size() < 2) {
            throw ReplyParseError("entry for '" + name + "' is not a [reason..., score] list", raw,
                                  rec.repair_log);
        }
        std::vector<std::string> reasons;
        for (std::size_t i = 0; i + 1 < value.size(); ++i) {
            if (!value[i].is_string()) {
                throw ReplyParseError("entry for '" + name + "' has a non-text reason", raw, rec.repair_log);
            }
            reasons.push_back(value[i].get<std::string>());
        }
        int score = coerce_score(value.back(), name, raw, rec.repair_log);

        auto& slot = rec.symptoms[static_cast<std::size_t>(lookup->index)];
        slot.score = score;
        slot.is_explicit = is_step1;
        if (is_step1) {
            for (const auto& reason : reasons) {
                auto extraction = extract_spans(reason);
                if (extraction.unbalanced) {
                    rec.repair_log.push_back(std::string(kRepairUnbalancedQuotes) + ": in entry '" + name + "'");
                }
                for (auto& span : extraction.spans) slot.spans.push_back(std::move(span));
            }
            if (slot.spans.empty()) {
                throw ReplyParseError("explicit entry for '" + canonical + "' cites no quoted span", raw,
                                      rec.repair_log);
            }
        } else {
            std::string joined;
            for (const auto& reason : reasons) {
                if (!joined.empty()) joined += "; ";
                joined += reason;
            }
            slot.rationale = joined;
        }
    }
}

} // namespace

AssessmentRecord parse_reply(const std::string& raw, const std::string& participant_id) {
    if (trimmed(raw).empty()) {
        throw ReplyParseError("reply for participant '" + participant_id + "' is empty", raw, {});
    }
    AssessmentRecord rec;
    rec.participant_id = participant_id;

    auto scan = scan_blocks(raw);
    if (scan.blocks.empty()) {
        throw ReplyParseError("reply contains no complete JSON object", raw, rec.repair_log);
    }
    if (scan.prose) {
        rec.repair_log.push_back(std::string(kRepairStrippedProse) + ": removed text outside the JSON");
    }

    std::vector<nlohmann::json> objects;
    for (const auto& block : scan.blocks) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(block);
        } catch (const nlohmann::json::exception& e) {
            throw ReplyParseError(std::string("reply JSON malformed: ") + e.what(), raw, rec.repair_log);
        }
        if (!j.is_object()) {
            throw ReplyParseError("top-level JSON value is not an object", raw, rec.repair_log);
        }
        objects.push_back(std::move(j));
    }

    nlohmann::json merged = std::move(objects[0]);
    if (objects.size() > 1) {
        rec.repair_log.push_back(std::string(kRepairMergedSiblings) + ": merged " +
                                 std::to_string(objects.size()) + " JSON objects");
        for (std::size_t k = 1; k < objects.size(); ++k) {
            for (const auto& [key, value] : objects[k].items()) {
                if (!merged.contains(key)) {
                    merged[key] = value;
                    continue;
                }
                if (merged[key].is_object() && value.is_object()) {
                    for (const auto& [k2, v2] : value.items()) {
                        if (merged[key].contains(k2)) {
                            if (merged[key][k2] != v2) {
                                throw ReplyParseError("conflicting duplicate entry '" + k2 +
                                                          "' across sibling objects",
                                                      raw, rec.repair_log);
                            }
                        } else {
                            merged[key][k2] = v2;
                        }
                    }
                } else if (merged[key] != value) {
                    throw ReplyParseError("conflicting duplicate key '" + key + "' across sibling objects",
                                          raw, rec.repair_log);
                }
            }
        }
    }

    for (const auto& [key, value] : merged.items()) {
        if (key != "STEP 1" && key != "STEP 2" && key != "STEP 3") {
            throw ReplyParseError("unexpected top-level key '" + key + "'", raw, rec.repair_log);
        }
    }
    for (const char* key : {"STEP 1", "STEP 2", "STEP 3"}) {
        if (!merged.contains(key)) {
            throw ReplyParseError(std::string("reply lacks key '") + key + "'", raw, rec.repair_log);
        }
        if (!merged[key].is_object()) {
            throw ReplyParseError(std::string("value of '") + key + "' is not an object", raw,
                                  rec.repair_log);
        }
    }

    std::array<bool, kNumSymptoms> seen{};
    process_step_entries(merged["STEP 1"], true, rec, seen, raw);
    process_step_entries(merged["STEP 2"], false, rec, seen, raw);

    std::string missing;
    for (int i = 0; i < kNumSymptoms; ++i) {
        if (!seen[static_cast<std::size_t>(i)]) {
            if (!missing.empty()) missing += ", ";
            missing += symptom_names()[static_cast<std::size_t>(i)];
        }
    }
    if (!missing.empty()) {
        throw ReplyParseError("reply assesses no entry for: " + missing, raw, rec.repair_log);
    }

    const auto& final_step = merged["STEP 3"];
    if (!final_step.contains("Final") || !final_step["Final"].is_array()) {
        throw ReplyParseError("STEP 3 lacks a 'Final' list", raw, rec.repair_log);
    }
    static const std::regex combined_re(R"(Combined Score:\s*(\d+))");
    static const std::regex category_re(R"(Category:\s*(.+))");
    int combined_hits = 0, category_hits = 0;
    for (const auto& element : final_step["Final"]) {
        if (!element.is_string()) {
            throw ReplyParseError("'Final' contains a non-text element", raw, rec.repair_log);
        }
        std::string text = element.get<std::string>();
        std::smatch m;
        if (std::regex_search(text, m, combined_re)) {
            ++combined_hits;
            rec.combined_score_reported = std::stoi(m[1].str());
        } else if (std::regex_search(text, m, category_re)) {
            ++category_hits;
            rec.category_reported = trimmed(m[1].str());
        } else {
            throw ReplyParseError("unrecognized 'Final' element: " + text, raw, rec.repair_log);
        }
    }
    if (combined_hits != 1 || category_hits != 1) {
        throw ReplyParseError("'Final' must state the combined score and the category exactly once", raw,
                              rec.repair_log);
    }
    if (rec.combined_score_reported < 0 || rec.combined_score_reported > 27) {
        throw ReplyParseError("combined score " + std::to_string(rec.combined_score_reported) +
                                  " is outside 0..27",
                              raw, rec.repair_log);
    }
    if (!is_valid_category(rec.category_reported)) {
        throw ReplyParseError("unknown category '" + rec.category_reported + "'", raw, rec.repair_log);
    }
    return rec;
}

std::string render_reply(const AssessmentRecord& record) {
    using nlohmann::json;
    json step1 = json::object();
    json step2 = json::object();
    for (int i = 0; i < kNumSymptoms; ++i) {
        const auto& s = record.symptoms[static_cast<std::size_t>(i)];
        const auto& name = symptom_names()[static_cast<std::size_t>(i)];
        json entry = json::array();
        if (s.is_explicit) {
            if (s.spans.empty()) {
                throw validation_error("explicit symptom '" + name + "' has no spans to cite");
            }
            for (const auto& span : s.spans) entry.push_back("'" + span + "'");
            entry.push_back(s.score);
            step1[name] = std::move(entry);
        } else {
            entry.push_back(s.rationale.empty() ? std::string("No explicit mention in the text")
                                                : s.rationale);
            entry.push_back(s.score);
            step2[name] = std::move(entry);
        }
    }
    json root;
    root["STEP 1"] = std::move(step1);
    root["STEP 2"] = std::move(step2);
    root["STEP 3"]["Final"] = json::array(
        {"Combined Score: " + std::to_string(record.combined_score_reported),
         "Category: " + record.category_reported});
    return root.dump(2);
}

const char* to_string(SpanMatch match) {
    switch (match) {
        case SpanMatch::Exact: return "exact";
        case SpanMatch::Normalized: return "normalized";
        case SpanMatch::None: return "none";
    }
    return "none";
}

SpanMatchReport validate_against_essay(const AssessmentRecord& record, const EssayRecord& essay) {
    if (record.participant_id != essay.participant_id) {
        throw validation_error("span validation across different participants: '" + record.participant_id +
                               "' vs '" + essay.participant_id + "'");
    }
    SpanMatchReport report;
    report.participant_id = record.participant_id;
    const std::string folded_essay = fold_text(essay.essay_text);
    for (int i = 0; i < kNumSymptoms; ++i) {
        const auto& slot = record.symptoms[static_cast<std::size_t>(i)];
        for (const auto& span : slot.spans) {
            SpanMatchEntry entry{i, span, SpanMatch::None};
            if (essay.essay_text.find(span) != std::string::npos) {
                entry.match = SpanMatch::Exact;
                ++report.exact;
            } else if (!fold_text(span).empty() &&
                       folded_essay.find(fold_text(span)) != std::string::npos) {
                entry.match = SpanMatch::Normalized;
                ++report.normalized;
            } else {
                ++report.unmatched;
            }
            report.entries.push_back(std::move(entry));
        }
    }
    return report;
}

TabulateResult tabulate(const std::vector<AssessmentRecord>& records) {
    TabulateResult result;
    result.table.source = "model";
    for (const auto& rec : records) {
        std::array<int, kNumSymptoms> row{};
        std::array<bool, kNumSymptoms> mask{};
        for (int i = 0; i < kNumSymptoms; ++i) {
            row[static_cast<std::size_t>(i)] = rec.symptoms[static_cast<std::size_t>(i)].score;
            mask[static_cast<std::size_t>(i)] = rec.symptoms[static_cast<std::size_t>(i)].is_explicit;
        }
        result.table.row_ids.push_back(rec.participant_id);
        result.table.matrix.push_back(row);
        result.table.explicit_mask.push_back(mask);
        result.reported_totals.push_back(rec.combined_score_reported);
        result.reported_categories.push_back(rec.category_reported);
        int total = rec.recomputed_total();
        if (total != rec.combined_score_reported) ++result.total_mismatches;
        if (category_standard(total) != rec.category_reported) ++result.category_mismatches;
    }
    refresh_totals(result.table);
    return result;
}

NormalizeOutcome normalize_replies(const std::vector<EssayRecord>& corpus,
                                   const std::map<std::string, std::string>& replies) {
    NormalizeOutcome outcome;
    for (const auto& rec : corpus) {
        auto it = replies.find(rec.participant_id);
        if (it == replies.end()) continue;
        try {
            auto parsed = parse_reply(it->second, rec.participant_id);
            if (parsed.was_repaired()) ++outcome.repaired_count;
            outcome.records.push_back(std::move(parsed));
        } catch (const Error& e) {
            outcome.failures[rec.participant_id] = e.what();
        }
    }
    return outcome;
}

void write_scores_csv(const TabulateResult& result, const std::string& path) {
    CsvWriter csv(path);
    std::vector<std::string> header = {"participant_id"};
    for (const auto& key : symptom_keys()) header.push_back(key);
    for (const auto& key : symptom_keys()) header.push_back(key + "_explicit");
    header.insert(header.end(),
                  {"total", "reported_total", "reported_category", "standard_category"});
    csv.write_row(header);
    for (std::size_t r = 0; r < result.table.rows(); ++r) {
        std::vector<std::string> row = {result.table.row_ids[r]};
        for (int v : result.table.matrix[r]) row.push_back(std::to_string(v));
        for (bool b : result.table.explicit_mask[r]) row.push_back(b ? "1" : "0");
        row.push_back(std::to_string(result.table.totals[r]));
        row.push_back(std::to_string(result.reported_totals[r]));
        row.push_back(result.reported_categories[r]);
        row.push_back(category_standard(result.table.totals[r]));
        csv.write_row(row);
    }
    csv.close();
}

void write_spans_jsonl(const std::vector<AssessmentRecord>& records,
                       const std::vector<EssayRecord>& corpus, const std::string& path) {
    std::map<std::string, const EssayRecord*> by_id;
    for (const auto& rec : corpus) by_id.emplace(rec.participant_id, &rec);

    std::ostringstream out;
    for (const auto& rec : records) {
        auto it = by_id.find(rec.participant_id);
        if (it == by_id.end()) continue;
        auto report = validate_against_essay(rec, *it->second);
        nlohmann::json line;
        line["participant_id"] = rec.participant_id;
        auto spans = nlohmann::json::array();
        for (const auto& entry : report.entries) {
            spans.push_back({{"symptom", symptom_names()[static_cast<std::size_t>(entry.symptom)]},
                             {"text", entry.span},
                             {"match", to_string(entry.match)}});
        }
        line["spans"] = std::move(spans);
        line["exact"] = report.exact;
        line["normalized"] = report.normalized;
        line["unmatched"] = report.unmatched;
        out << line.dump() << '\n';
    }
    write_text_file(path, out.str());
}

void write_repairs_jsonl(const std::vector<AssessmentRecord>& records,
                         const std::map<std::string, std::string>& failures,
                         const std::string& path) {
    std::ostringstream out;
    for (const auto& rec : records) {
        if (!rec.was_repaired()) continue;
        nlohmann::json line;
        line["participant_id"] = rec.participant_id;
        line["repairs"] = rec.repair_log;
        line["parsed"] = true;
        out << line.dump() << '\n';
    }
    for (const auto& [id, message] : failures) {
        nlohmann::json line;
        line["participant_id"] = id;
        line["error"] = message;
        line["parsed"] = false;
        out << line.dump() << '\n';
    }
    write_text_file(path, out.str());
}

} // namespace symscope
