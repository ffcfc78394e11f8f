#include "symscope/dla.hpp"

#include "symscope/csvio.hpp"
#include "symscope/errors.hpp"
#include "symscope/stats.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

namespace symscope {

namespace {

std::vector<std::string> to_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalpha(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

// First occurrence of `needle` as a contiguous subsequence, or -1.
int find_subsequence(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
    if (needle.empty() || haystack.size() < needle.size()) return -1;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        bool hit = true;
        for (std::size_t j = 0; j < needle.size(); ++j) {
            if (haystack[i + j] != needle[j]) {
                hit = false;
                break;
            }
        }
        if (hit) return static_cast<int>(i);
    }
    return -1;
}

double r_to_p(double r, std::size_t n) {
    if (n < 3) return 1.0;
    double denom = 1.0 - r * r;
    if (denom <= 0.0) return 0.0;
    double t = r * std::sqrt((static_cast<double>(n) - 2.0) / denom);
    return std::clamp(2.0 * (1.0 - students_t_cdf(std::abs(t), static_cast<double>(n) - 2.0)), 0.0, 1.0);
}

} // namespace

TokenStream tokenize(const std::string& essay, const std::vector<std::string>& spans) {
    TokenStream out;
    out.tokens = to_tokens(essay);
    out.in_span.assign(out.tokens.size(), false);
    for (const auto& span : spans) {
        auto span_tokens = to_tokens(span);
        int at = find_subsequence(out.tokens, span_tokens);
        if (at < 0) continue;  // unlocatable span labels nothing
        for (std::size_t j = 0; j < span_tokens.size(); ++j) {
            out.in_span[static_cast<std::size_t>(at) + j] = true;
        }
    }
    return out;
}

namespace {

struct GramAgg {
    int order = 0;
    // (participant slot, occurrences inside spans, total occurrences);
    // appended in participant order so the last row is the current one.
    std::vector<std::array<int, 3>> rows;
};

} // namespace

DlaResult differential_language_analysis(const std::vector<AssessmentRecord>& records,
                                         const std::vector<EssayRecord>& corpus, const DlaConfig& cfg) {
    if (cfg.max_order < 1 || cfg.max_order > 3) throw validation_error("n-gram order must be 1..3");
    DlaResult result;

    std::unordered_map<std::string, const EssayRecord*> essays;
    for (const auto& rec : corpus) essays.emplace(rec.participant_id, &rec);

    const int orders = cfg.max_order;
    std::map<std::string, GramAgg> grams;
    // Per participant and order: total n-gram positions and all-in positions.
    std::vector<std::array<long, 3>> total_positions, in_positions;
    std::vector<double> totals;

    int slot = 0;
    for (const auto& rec : records) {
        auto it = essays.find(rec.participant_id);
        if (it == essays.end()) continue;
        std::vector<std::string> spans;
        for (const auto& s : rec.symptoms) {
            for (const auto& span : s.spans) {
                spans.push_back(span);
                if (find_subsequence(to_tokens(it->second->essay_text), to_tokens(span)) < 0) {
                    result.warnings.push_back("participant '" + rec.participant_id + "': span not located: " +
                                              span);
                }
            }
        }
        TokenStream ts = tokenize(it->second->essay_text, spans);
        total_positions.push_back({0, 0, 0});
        in_positions.push_back({0, 0, 0});
        totals.push_back(static_cast<double>(rec.recomputed_total()));

        for (int k = 1; k <= orders; ++k) {
            if (ts.tokens.size() < static_cast<std::size_t>(k)) continue;
            const std::size_t stop = ts.tokens.size() - static_cast<std::size_t>(k) + 1;
            total_positions.back()[static_cast<std::size_t>(k - 1)] = static_cast<long>(stop);
            for (std::size_t i = 0; i < stop; ++i) {
                std::string g = ts.tokens[i];
                bool all_in = ts.in_span[i];
                for (int j = 1; j < k; ++j) {
                    g += ' ';
                    g += ts.tokens[i + static_cast<std::size_t>(j)];
                    all_in = all_in && ts.in_span[i + static_cast<std::size_t>(j)];
                }
                if (all_in) ++in_positions.back()[static_cast<std::size_t>(k - 1)];
                auto& agg = grams[g];
                agg.order = k;
                if (agg.rows.empty() || agg.rows.back()[0] != slot) agg.rows.push_back({slot, 0, 0});
                agg.rows.back()[1] += all_in ? 1 : 0;
                agg.rows.back()[2] += 1;
            }
        }
        ++slot;
    }

    const int n_participants = slot;
    result.vocabulary_size = static_cast<int>(grams.size());
    if (n_participants < cfg.min_users) return result;

    // Corpus-level denominators per order for PMI.
    std::array<long, 3> corpus_positions{}, corpus_in{};
    for (int p = 0; p < n_participants; ++p) {
        for (int k = 0; k < orders; ++k) {
            corpus_positions[static_cast<std::size_t>(k)] +=
                total_positions[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
            corpus_in[static_cast<std::size_t>(k)] +=
                in_positions[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
        }
    }

    bool totals_vary = false;
    for (double t : totals) {
        if (t != totals[0]) {
            totals_vary = true;
            break;
        }
    }

    for (const auto& [gram, agg] : grams) {
        if (static_cast<int>(agg.rows.size()) < cfg.min_users) continue;
        NGramStat stat;
        stat.ngram = gram;
        stat.order = agg.order;
        stat.users = static_cast<int>(agg.rows.size());
        const auto ok = static_cast<std::size_t>(agg.order - 1);

        std::vector<double> in_freqs(static_cast<std::size_t>(n_participants), 0.0);
        std::vector<double> out_freqs(static_cast<std::size_t>(n_participants), 0.0);
        std::vector<double> overall(static_cast<std::size_t>(n_participants), 0.0);
        long corpus_count = 0, corpus_count_in = 0;
        for (const auto& row : agg.rows) {
            const auto p = static_cast<std::size_t>(row[0]);
            const long in_pos = in_positions[p][ok];
            const long out_pos = total_positions[p][ok] - in_pos;
            if (in_pos > 0) in_freqs[p] = static_cast<double>(row[1]) / static_cast<double>(in_pos);
            if (out_pos > 0) {
                out_freqs[p] = static_cast<double>(row[2] - row[1]) / static_cast<double>(out_pos);
            }
            if (total_positions[p][ok] > 0) {
                overall[p] = static_cast<double>(row[2]) / static_cast<double>(total_positions[p][ok]);
            }
            corpus_count += row[2];
            corpus_count_in += row[1];
        }

        try {
            auto effect = cohens_d(in_freqs, out_freqs);
            stat.d = effect.d;
            stat.p = effect.p;
        } catch (const Error& e) {
            stat.note = e.what();
            stat.p = std::nan("");
        }
        stat.rel_freq_in = mean_of(in_freqs);
        stat.rel_freq_out = mean_of(out_freqs);

        const double t_k = static_cast<double>(corpus_positions[ok]);
        if (corpus_in[ok] == 0 || corpus_count_in == 0) {
            stat.pmi = -std::numeric_limits<double>::infinity();
            stat.pmi_pass = false;
        } else {
            stat.pmi = pmi(static_cast<double>(corpus_count_in) / t_k,
                           static_cast<double>(corpus_count) / t_k,
                           static_cast<double>(corpus_in[ok]) / t_k);
            stat.pmi_pass = stat.pmi >= cfg.pmi_threshold;
        }

        if (totals_vary && n_participants >= 10) {
            try {
                stat.severity_r = pearson(overall, totals);
                stat.severity_p = r_to_p(stat.severity_r, static_cast<std::size_t>(n_participants));
                stat.severity_defined = true;
            } catch (const Error& e) {
                stat.severity_defined = false;
                if (stat.note.empty()) stat.note = std::string("severity: ") + e.what();
            }
        }
        result.features.push_back(std::move(stat));
    }
    result.candidate_count = static_cast<int>(result.features.size());

    // BH families: effect p-values and severity p-values, each over the
    // features where the statistic is defined.
    std::vector<double> ps;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < result.features.size(); ++i) {
        if (!std::isnan(result.features[i].p)) {
            ps.push_back(result.features[i].p);
            idx.push_back(i);
        }
    }
    auto flags = bh_correct(ps, cfg.q);
    for (std::size_t i = 0; i < idx.size(); ++i) result.features[idx[i]].p_bh_reject = flags[i];

    ps.clear();
    idx.clear();
    for (std::size_t i = 0; i < result.features.size(); ++i) {
        if (result.features[i].severity_defined) {
            ps.push_back(result.features[i].severity_p);
            idx.push_back(i);
        }
    }
    flags = bh_correct(ps, cfg.q);
    for (std::size_t i = 0; i < idx.size(); ++i) result.features[idx[i]].severity_sig = flags[i];

    for (auto& f : result.features) {
        f.retained = f.users >= cfg.min_users && f.p_bh_reject && f.pmi_pass;
        if (f.retained) ++result.retained_count;
    }

    std::sort(result.features.begin(), result.features.end(), [](const NGramStat& a, const NGramStat& b) {
        double da = std::isnan(a.p) ? -1e300 : a.d;
        double db = std::isnan(b.p) ? -1e300 : b.d;
        if (da != db) return da > db;
        return a.ngram < b.ngram;
    });
    return result;
}

void write_dla_csv(const DlaResult& result, const std::string& path) {
    CsvWriter csv(path);
    csv.write_row({"ngram", "users", "d", "p", "p_bh_reject", "pmi", "severity_r", "severity_sig"});
    for (const auto& f : result.features) {
        bool effect_defined = !std::isnan(f.p);
        csv.write_row({f.ngram, std::to_string(f.users), effect_defined ? fmt_double(f.d) : "",
                       effect_defined ? fmt_double(f.p) : "", f.p_bh_reject ? "1" : "0",
                       std::isinf(f.pmi) ? "" : fmt_double(f.pmi),
                       f.severity_defined ? fmt_double(f.severity_r) : "", f.severity_sig ? "1" : "0"});
    }
    csv.close();
}

} // namespace symscope
