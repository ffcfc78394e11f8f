#include "symscope/scoretable.hpp"

#include "symscope/errors.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

namespace symscope {

std::vector<double> ScoreTable::column(int item) const {
    std::vector<double> out;
    out.reserve(matrix.size());
    for (const auto& row : matrix) out.push_back(static_cast<double>(row[static_cast<std::size_t>(item)]));
    return out;
}

std::vector<double> ScoreTable::totals_real() const {
    std::vector<double> out;
    out.reserve(totals.size());
    for (int t : totals) out.push_back(static_cast<double>(t));
    return out;
}

void refresh_totals(ScoreTable& table) {
    table.totals.clear();
    table.totals.reserve(table.matrix.size());
    for (const auto& row : table.matrix) {
        table.totals.push_back(std::accumulate(row.begin(), row.end(), 0));
    }
}

ScoreTable self_report_table(const std::vector<EssayRecord>& corpus) {
    ScoreTable table;
    table.source = "self_report";
    for (const auto& rec : corpus) {
        table.row_ids.push_back(rec.participant_id);
        table.matrix.push_back(rec.self_report);
    }
    refresh_totals(table);
    return table;
}

ScoreTable expert_table(const std::vector<EssayRecord>& corpus, const std::string& rater_id) {
    ScoreTable table;
    table.source = "expert:" + rater_id;
    for (const auto& rec : corpus) {
        for (const auto& ex : rec.expert_scores) {
            if (ex.rater_id == rater_id) {
                table.row_ids.push_back(rec.participant_id);
                table.matrix.push_back(ex.items);
                break;
            }
        }
    }
    refresh_totals(table);
    return table;
}

std::vector<std::string> expert_rater_ids(const std::vector<EssayRecord>& corpus) {
    std::set<std::string> ids;
    for (const auto& rec : corpus) {
        for (const auto& ex : rec.expert_scores) ids.insert(ex.rater_id);
    }
    return {ids.begin(), ids.end()};
}

void align_rows(ScoreTable& a, ScoreTable& b) {
    std::unordered_map<std::string, std::size_t> b_index;
    for (std::size_t i = 0; i < b.row_ids.size(); ++i) b_index.emplace(b.row_ids[i], i);

    ScoreTable na, nb;
    na.source = a.source;
    nb.source = b.source;
    bool keep_a_mask = a.has_mask();
    bool keep_b_mask = b.has_mask();
    for (std::size_t i = 0; i < a.row_ids.size(); ++i) {
        auto it = b_index.find(a.row_ids[i]);
        if (it == b_index.end()) continue;
        na.row_ids.push_back(a.row_ids[i]);
        na.matrix.push_back(a.matrix[i]);
        if (keep_a_mask) na.explicit_mask.push_back(a.explicit_mask[i]);
        nb.row_ids.push_back(b.row_ids[it->second]);
        nb.matrix.push_back(b.matrix[it->second]);
        if (keep_b_mask) nb.explicit_mask.push_back(b.explicit_mask[it->second]);
    }
    if (na.rows() == 0) {
        throw validation_error("tables '" + a.source + "' and '" + b.source + "' share no participants");
    }
    refresh_totals(na);
    refresh_totals(nb);
    a = std::move(na);
    b = std::move(nb);
}

} // namespace symscope
