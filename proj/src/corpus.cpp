#include "symscope/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "symscope/csvio.hpp"
#include "symscope/errors.hpp"
#include "symscope/rng.hpp"

namespace symscope {

using nlohmann::json;

int EssayRecord::self_report_total() const {
    return std::accumulate(self_report.begin(), self_report.end(), 0);
}

namespace {

bool is_blank(const std::string& text) {
    return std::all_of(text.begin(), text.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

std::array<int, kNumSymptoms> parse_item_vector(const json& arr, const std::string& where) {
    if (!arr.is_array() || arr.size() != kNumSymptoms) {
        throw validation_error(where + ": expected " + std::to_string(kNumSymptoms) + " item scores");
    }
    std::array<int, kNumSymptoms> items{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        if (!arr[i].is_number_integer()) {
            throw validation_error(where + ": item " + std::to_string(i) + " is not an integer");
        }
        int v = arr[i].get<int>();
        if (v < 0 || v > 3) {
            throw validation_error(where + ": item " + std::to_string(i) + " score " +
                                   std::to_string(v) + " outside 0..3");
        }
        items[i] = v;
    }
    return items;
}

} // namespace

std::vector<EssayRecord> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open corpus: " + path.string());

    std::vector<EssayRecord> corpus;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || is_blank(line)) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw parse_error("corpus line " + std::to_string(line_no) + ": malformed JSON (" +
                              e.what() + ")");
        }
        const std::string where = "corpus line " + std::to_string(line_no);
        if (!obj.is_object() || !obj.contains("participant_id") || !obj.contains("essay_text") ||
            !obj.contains("self_report")) {
            throw validation_error(where + ": missing participant_id/essay_text/self_report");
        }
        EssayRecord rec;
        rec.participant_id = obj.at("participant_id").get<std::string>();
        rec.essay_text = obj.at("essay_text").get<std::string>();
        rec.self_report = parse_item_vector(obj.at("self_report"), where);
        if (rec.participant_id.empty()) {
            throw validation_error(where + ": empty participant_id");
        }
        if (is_blank(rec.essay_text)) {
            throw validation_error(where + ": essay_text blank for participant " + rec.participant_id);
        }
        if (!seen_ids.insert(rec.participant_id).second) {
            throw validation_error(where + ": duplicate participant_id " + rec.participant_id);
        }
        if (obj.contains("meta")) {
            for (const auto& [k, v] : obj.at("meta").items()) {
                rec.meta[k] = v.get<std::string>();
            }
        }
        if (obj.contains("expert_scores")) {
            for (const auto& entry : obj.at("expert_scores")) {
                ExpertScores ex;
                ex.rater_id = entry.at("rater_id").get<std::string>();
                ex.items = parse_item_vector(entry.at("items"), where + " expert row");
                rec.expert_scores.push_back(std::move(ex));
            }
        }
        corpus.push_back(std::move(rec));
    }
    return corpus;
}

void write_corpus(const std::filesystem::path& path, const std::vector<EssayRecord>& corpus) {
    std::ostringstream out;
    for (const auto& rec : corpus) {
        json obj;
        obj["participant_id"] = rec.participant_id;
        obj["essay_text"] = rec.essay_text;
        obj["self_report"] = rec.self_report;
        if (!rec.meta.empty()) obj["meta"] = rec.meta;
        if (!rec.expert_scores.empty()) {
            json raters = json::array();
            for (const auto& ex : rec.expert_scores) {
                raters.push_back({{"rater_id", ex.rater_id}, {"items", ex.items}});
            }
            obj["expert_scores"] = std::move(raters);
        }
        out << obj.dump() << '\n';
    }
    write_text_file(path, out.str());
}

int load_expert_scores(const std::filesystem::path& path, std::vector<EssayRecord>& corpus) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open expert scores: " + path.string());

    std::unordered_map<std::string, EssayRecord*> by_id;
    for (auto& rec : corpus) by_id.emplace(rec.participant_id, &rec);

    std::unordered_set<std::string> touched;
    std::string line;
    std::size_t line_no = 0;
    bool header_skipped = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || is_blank(line)) continue;
        auto fields = split_csv_line(line);
        if (!header_skipped) {
            header_skipped = true;
            if (!fields.empty() && fields[0] == "participant_id") continue;
        }
        if (fields.size() != 2 + kNumSymptoms) {
            throw validation_error("experts line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(2 + kNumSymptoms) + " columns, got " +
                                   std::to_string(fields.size()));
        }
        const std::string& pid = fields[0];
        auto it = by_id.find(pid);
        if (it == by_id.end()) {
            throw validation_error("experts line " + std::to_string(line_no) +
                                   ": unknown participant_id " + pid);
        }
        ExpertScores ex;
        ex.rater_id = fields[1];
        for (int i = 0; i < kNumSymptoms; ++i) {
            const std::string& cell = fields[2 + i];
            int v;
            try {
                std::size_t pos = 0;
                v = std::stoi(cell, &pos);
                if (pos != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw validation_error("experts line " + std::to_string(line_no) +
                                       ": non-integer item score '" + cell + "'");
            }
            if (v < 0 || v > 3) {
                throw validation_error("experts line " + std::to_string(line_no) + ": item score " +
                                       std::to_string(v) + " outside 0..3");
            }
            ex.items[i] = v;
        }
        it->second->expert_scores.push_back(std::move(ex));
        touched.insert(pid);
    }
    return static_cast<int>(touched.size());
}

void write_expert_scores(const std::filesystem::path& path, const std::vector<EssayRecord>& corpus) {
    CsvWriter csv(path);
    std::vector<std::string> header = {"participant_id", "rater_id"};
    for (const auto& key : symptom_keys()) header.push_back(key);
    csv.write_row(header);
    for (const auto& rec : corpus) {
        for (const auto& ex : rec.expert_scores) {
            std::vector<std::string> row = {rec.participant_id, ex.rater_id};
            for (int v : ex.items) row.push_back(std::to_string(v));
            csv.write_row(row);
        }
    }
    csv.close();
}

std::string corpus_id_checksum(const std::vector<EssayRecord>& corpus) {
    std::string joined;
    for (const auto& rec : corpus) {
        joined += rec.participant_id;
        joined += '\n';
    }
    return to_hex16(fnv1a64(joined));
}

} // namespace symscope
