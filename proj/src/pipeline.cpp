#include "symscope/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "symscope/csvio.hpp"
#include "symscope/errors.hpp"
#include "symscope/psychometrics.hpp"
#include "symscope/rasch.hpp"
#include "symscope/schema.hpp"
#include "symscope/scoretable.hpp"
#include "symscope/symptoms.hpp"

namespace symscope {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string chomp(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

int to_int(const std::string& s, const std::string& where) {
    try {
        std::size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw parse_error(where + ": expected an integer, got '" + s + "'");
    }
}

std::vector<std::string> scores_csv_header() {
    std::vector<std::string> header = {"participant_id"};
    for (const auto& key : symptom_keys()) header.push_back(key);
    for (const auto& key : symptom_keys()) header.push_back(key + "_explicit");
    header.insert(header.end(),
                  {"total", "reported_total", "reported_category", "standard_category"});
    return header;
}

json parse_json_line(const std::string& line, const std::string& path, std::size_t lineno) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw parse_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
}

} // namespace

std::vector<AssessmentRecord> read_normalized_records(const std::string& scores_csv,
                                                      const std::string& spans_jsonl) {
    std::ifstream in(scores_csv);
    if (!in) throw io_error("normalized scores not found: " + scores_csv);
    std::string line;
    if (!std::getline(in, line)) throw parse_error(scores_csv + ": empty file");
    const auto expected = scores_csv_header();
    if (split_csv_line(chomp(line)) != expected) {
        throw parse_error(scores_csv + ": unexpected header");
    }

    std::vector<AssessmentRecord> records;
    std::map<std::string, std::size_t> index;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = chomp(line);
        if (line.empty()) continue;
        const std::string where = scores_csv + ":" + std::to_string(lineno);
        auto fields = split_csv_line(line);
        if (fields.size() != expected.size()) {
            throw parse_error(where + ": expected " + std::to_string(expected.size()) +
                              " fields, got " + std::to_string(fields.size()));
        }
        AssessmentRecord rec;
        rec.participant_id = fields[0];
        int total = 0;
        for (int i = 0; i < kNumSymptoms; ++i) {
            int score = to_int(fields[static_cast<std::size_t>(1 + i)], where);
            if (score < 0 || score > 3) {
                throw parse_error(where + ": score out of range: " + std::to_string(score));
            }
            rec.symptoms[static_cast<std::size_t>(i)].score = score;
            total += score;
        }
        for (int i = 0; i < kNumSymptoms; ++i) {
            const std::string& flag = fields[static_cast<std::size_t>(10 + i)];
            if (flag != "0" && flag != "1") {
                throw parse_error(where + ": explicit flag must be 0 or 1, got '" + flag + "'");
            }
            rec.symptoms[static_cast<std::size_t>(i)].is_explicit = (flag == "1");
        }
        if (to_int(fields[19], where) != total) {
            throw parse_error(where + ": total column disagrees with the item sum");
        }
        rec.combined_score_reported = to_int(fields[20], where);
        rec.category_reported = fields[21];
        if (!index.emplace(rec.participant_id, records.size()).second) {
            throw parse_error(where + ": duplicate participant '" + rec.participant_id + "'");
        }
        records.push_back(std::move(rec));
    }

    std::ifstream sp(spans_jsonl);
    if (!sp) throw io_error("normalized spans not found: " + spans_jsonl);
    lineno = 0;
    while (std::getline(sp, line)) {
        ++lineno;
        line = chomp(line);
        if (line.empty()) continue;
        const std::string where = spans_jsonl + ":" + std::to_string(lineno);
        json row = parse_json_line(line, spans_jsonl, lineno);
        const std::string pid = row.at("participant_id").get<std::string>();
        auto it = index.find(pid);
        if (it == index.end()) {
            throw parse_error(where + ": participant '" + pid + "' has no scores row");
        }
        AssessmentRecord& rec = records[it->second];
        for (const auto& entry : row.at("spans")) {
            const std::string name = entry.at("symptom").get<std::string>();
            auto lookup = resolve_symptom_name(name);
            if (!lookup || lookup->match != NameMatch::Canonical) {
                throw parse_error(where + ": unknown symptom '" + name + "'");
            }
            rec.symptoms[static_cast<std::size_t>(lookup->index)].spans.push_back(
                entry.at("text").get<std::string>());
        }
    }

    for (const auto& rec : records) {
        for (int i = 0; i < kNumSymptoms; ++i) {
            const auto& s = rec.symptoms[static_cast<std::size_t>(i)];
            if (s.is_explicit && s.spans.empty()) {
                throw parse_error("participant '" + rec.participant_id + "': explicit symptom '" +
                                  symptom_names()[static_cast<std::size_t>(i)] +
                                  "' has no cited spans in " + spans_jsonl);
            }
        }
    }
    return records;
}

RepairSummary read_repairs(const std::string& repairs_jsonl) {
    std::ifstream in(repairs_jsonl);
    if (!in) throw io_error("repair log not found: " + repairs_jsonl);
    RepairSummary summary;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = chomp(line);
        if (line.empty()) continue;
        json row = parse_json_line(line, repairs_jsonl, lineno);
        if (!row.at("parsed").get<bool>()) {
            ++summary.failures;
            continue;
        }
        ++summary.repaired_records;
        for (const auto& entry : row.at("repairs")) {
            std::string text = entry.get<std::string>();
            std::string tag = text.substr(0, text.find(':'));
            ++summary.tag_counts[tag];
        }
    }
    return summary;
}

namespace {

json validity_to_json(const ValidityResult& v) {
    json items = json::array();
    for (int i = 0; i < kNumSymptoms; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        json item;
        item["symptom"] = symptom_keys()[idx];
        item["name"] = symptom_names()[idx];
        item["defined"] = v.item_defined[idx];
        if (v.item_defined[idx]) {
            item["r"] = v.item_r[idx];
        } else {
            item["r"] = nullptr;
            item["note"] = v.item_note[idx];
        }
        items.push_back(std::move(item));
    }
    return json{{"total_r", v.total_r}, {"items", std::move(items)}};
}

} // namespace

json run_analyze(const AnalyzeInputs& inputs, const AnalysisKnobs& knobs) {
    auto corpus = load_corpus(inputs.corpus_path);
    if (!inputs.experts_path.empty()) load_expert_scores(inputs.experts_path, corpus);
    auto records = read_normalized_records(inputs.scores_csv, inputs.spans_jsonl);
    auto repairs = read_repairs(inputs.repairs_jsonl);

    std::map<std::string, const EssayRecord*> essays_by_id;
    for (const auto& essay : corpus) essays_by_id.emplace(essay.participant_id, &essay);
    for (const auto& rec : records) {
        if (!essays_by_id.count(rec.participant_id)) {
            throw validation_error("participant '" + rec.participant_id +
                                   "' from " + inputs.scores_csv + " is not in the corpus");
        }
    }

    fs::path out(inputs.out_dir);
    fs::create_directories(out);

    auto tab = tabulate(records);
    ScoreTable model = tab.table;
    ScoreTable self = self_report_table(corpus);
    align_rows(model, self);

    auto validity = convergent_validity(model, self);
    std::vector<std::pair<std::string, ValidityResult>> expert_panels;
    for (const auto& rater : expert_rater_ids(corpus)) {
        ScoreTable expert = expert_table(corpus, rater);
        ScoreTable model_sub = tab.table;
        align_rows(model_sub, expert);
        if (model_sub.rows() == 0) continue;
        expert_panels.emplace_back("model_vs_" + rater, convergent_validity(model_sub, expert));
    }
    write_validity_csv(validity, expert_panels, (out / "validity.csv").string());

    auto inter_model = intersymptom_matrix(model);
    auto inter_self = intersymptom_matrix(self);
    write_intersymptom_csv(inter_model, "model", (out / "intersymptom_model.csv").string());
    write_intersymptom_csv(inter_self, "self_report", (out / "intersymptom_self_report.csv").string());
    auto diff = matrix_difference_ci(model, self, knobs.trials, knobs.matrix_level, knobs.seed);
    write_diff_matrix_csv(diff, (out / "intersymptom_diff.csv").string());

    auto split = explicit_split_validity(model, self);
    write_split_validity_csv(split, (out / "split_validity.csv").string());

    std::vector<std::pair<std::string, Distribution>> dists = {
        {"model", score_distribution(model)}, {"self_report", score_distribution(self)}};
    write_distribution_csv(dists, (out / "distribution.csv").string());

    DichotomizeRule rule;
    rule.threshold = knobs.dichotomize_threshold;
    auto dif = dif_ranks(model, self, rule, knobs.trials, knobs.matrix_level, knobs.seed);
    write_rasch_csv(dif, "model", "self_report", (out / "rasch.csv").string());

    auto dla = differential_language_analysis(records, corpus, knobs.dla);
    write_dla_csv(dla, (out / "dla.csv").string());

    SchemaOptions sopts;
    sopts.trials = knobs.trials;
    sopts.level = knobs.schema_level;
    sopts.seed = knobs.seed;
    sopts.min_implicit_rows = knobs.schema_min_implicit_rows;
    auto estimates = fit_schema(model, sopts);
    auto edges = schema_graph(estimates);
    write_schema_csvs(estimates, (out / "schema_edges.csv").string(),
                      (out / "schema_full.csv").string());

    int span_exact = 0, span_normalized = 0, span_unmatched = 0;
    for (const auto& rec : records) {
        auto report = validate_against_essay(rec, *essays_by_id.at(rec.participant_id));
        span_exact += report.exact;
        span_normalized += report.normalized;
        span_unmatched += report.unmatched;
    }

    json summary;
    summary["config"] = {{"trials", knobs.trials},
                         {"matrix_level", knobs.matrix_level},
                         {"schema_level", knobs.schema_level},
                         {"seed", knobs.seed},
                         {"dichotomize_threshold", knobs.dichotomize_threshold},
                         {"schema_min_implicit_rows", knobs.schema_min_implicit_rows},
                         {"dla",
                          {{"min_users", knobs.dla.min_users},
                           {"q", knobs.dla.q},
                           {"pmi_threshold", knobs.dla.pmi_threshold},
                           {"max_order", knobs.dla.max_order}}}};

    const double denom = static_cast<double>(records.size() + static_cast<std::size_t>(repairs.failures));
    summary["corpus"] = {{"n_corpus", corpus.size()},
                        {"n_records", records.size()},
                        {"parse_failures", repairs.failures},
                        {"repaired_records", repairs.repaired_records},
                        {"repaired_fraction",
                         denom > 0 ? static_cast<double>(repairs.repaired_records) / denom : 0.0},
                        {"repair_counts", repairs.tag_counts},
                        {"total_mismatches", tab.total_mismatches},
                        {"category_mismatches", tab.category_mismatches}};

    summary["convergent_validity"] = validity_to_json(validity);
    json experts = json::array();
    for (const auto& [label, result] : expert_panels) {
        json panel = validity_to_json(result);
        panel["panel"] = label;
        experts.push_back(std::move(panel));
    }
    summary["expert_validity"] = std::move(experts);

    json explicit_items = json::array();
    double mean_rate_pct = 0.0;
    for (int i = 0; i < kNumSymptoms; ++i) {
        int count = 0;
        for (std::size_t r = 0; r < model.rows(); ++r) {
            if (model.explicit_mask[r][static_cast<std::size_t>(i)]) ++count;
        }
        double pct = model.rows() > 0
                         ? 100.0 * static_cast<double>(count) / static_cast<double>(model.rows())
                         : 0.0;
        mean_rate_pct += pct;
        explicit_items.push_back({{"symptom", symptom_keys()[static_cast<std::size_t>(i)]},
                                  {"count", count},
                                  {"rate_pct", pct}});
    }
    mean_rate_pct /= kNumSymptoms;
    summary["explicit"] = {{"items", std::move(explicit_items)},
                           {"mean_rate_pct", mean_rate_pct},
                           {"split",
                            {{"mean_r_explicit", split.mean_r_explicit},
                             {"mean_r_implicit", split.mean_r_implicit},
                             {"mean_pct_explicit", split.mean_pct_explicit}}}};

    json sig_cells = json::array();
    for (int i = 0; i < kNumSymptoms; ++i) {
        for (int j = i + 1; j < kNumSymptoms; ++j) {
            const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
            if (diff.significant[a][b]) {
                sig_cells.push_back({{"a", symptom_keys()[a]},
                                     {"b", symptom_keys()[b]},
                                     {"delta", diff.delta[a][b]}});
            }
        }
    }
    summary["intersymptom"] = {{"mean_offdiag_model", inter_model.mean_offdiag},
                               {"mean_offdiag_self", inter_self.mean_offdiag},
                               {"significant_diff_cells", std::move(sig_cells)},
                               {"redrawn_resamples", diff.redrawn_resamples}};

    json rasch_items = json::array();
    for (int i = 0; i < kNumSymptoms; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        rasch_items.push_back({{"symptom", symptom_keys()[idx]},
                               {"loc_model", dif.loc_a[idx]},
                               {"loc_self", dif.loc_b[idx]},
                               {"rank_model", dif.rank_a[idx]},
                               {"rank_self", dif.rank_b[idx]},
                               {"rank_diff", dif.rank_diff[idx]},
                               {"significant", dif.diff_significant[idx]}});
    }
    summary["rasch"] = {{"items", std::move(rasch_items)},
                        {"dichotomization", rule.tag()},
                        {"failed_trials", dif.failed_trials}};

    json dla_features = json::array();
    for (const auto& stat : dla.features) {
        if (!stat.retained) continue;
        dla_features.push_back({{"ngram", stat.ngram},
                                {"users", stat.users},
                                {"d", stat.d},
                                {"pmi", stat.pmi},
                                {"severity_r", stat.severity_defined ? json(stat.severity_r) : json()},
                                {"severity_sig", stat.severity_sig}});
        if (dla_features.size() >= 25) break;
    }
    summary["dla"] = {{"vocabulary_size", dla.vocabulary_size},
                      {"candidates", dla.candidate_count},
                      {"retained", dla.retained_count},
                      {"retained_features", std::move(dla_features)},
                      {"warnings", dla.warnings.size()}};

    json schema_edges = json::array();
    int negative_edges = 0;
    for (const auto& edge : edges) {
        if (edge.negative) ++negative_edges;
        schema_edges.push_back({{"source", symptom_keys()[static_cast<std::size_t>(edge.source)]},
                                {"target", symptom_keys()[static_cast<std::size_t>(edge.target)]},
                                {"beta", edge.beta},
                                {"ci", {edge.ci_low, edge.ci_high}},
                                {"negative", edge.negative}});
    }
    json schema_skipped = json::object();
    for (const auto& est : estimates) {
        if (est.skipped) {
            schema_skipped[symptom_keys()[static_cast<std::size_t>(est.target)]] = est.skip_reason;
        }
    }
    summary["schema"] = {{"n_edges", edges.size()},
                         {"n_negative", negative_edges},
                         {"edges", std::move(schema_edges)},
                         {"skipped", std::move(schema_skipped)}};

    summary["spans"] = {{"exact", span_exact},
                        {"normalized", span_normalized},
                        {"unmatched", span_unmatched}};

    write_text_file(out / "summary.json", summary.dump(2) + "\n");
    return summary;
}

namespace {

std::string fmt(double v, int places = 3) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(places) << v;
    return out.str();
}

std::string fmt_json_number(const json& v, int places = 3) {
    if (v.is_null()) return "n/a";
    return fmt(v.get<double>(), places);
}

} // namespace

std::string render_report(const json& summary) {
    std::ostringstream md;
    md << "# Assessment analysis report\n\n";

    if (summary.contains("corpus")) {
        const auto& c = summary["corpus"];
        md << "## Corpus\n\n";
        md << "- Essays in corpus: " << c.value("n_corpus", 0) << "\n";
        md << "- Replies analyzed: " << c.value("n_records", 0) << " ("
           << c.value("parse_failures", 0) << " parse failures)\n";
        md << "- Replies repaired: " << c.value("repaired_records", 0) << " ("
           << fmt(100.0 * c.value("repaired_fraction", 0.0), 1) << "%)\n";
        md << "- Reported-total mismatches: " << c.value("total_mismatches", 0)
           << "; category mismatches: " << c.value("category_mismatches", 0) << "\n\n";
    }

    if (summary.contains("convergent_validity")) {
        const auto& v = summary["convergent_validity"];
        md << "## Convergent validity (model vs self-report)\n\n";
        md << "- Total score: r = " << fmt_json_number(v["total_r"]) << "\n\n";
        md << "| Symptom | r |\n|---|---|\n";
        for (const auto& item : v["items"]) {
            md << "| " << item["name"].get<std::string>() << " | "
               << fmt_json_number(item["r"]) << " |\n";
        }
        md << "\n";
        if (summary.contains("expert_validity")) {
            for (const auto& panel : summary["expert_validity"]) {
                md << "- " << panel["panel"].get<std::string>()
                   << ": total r = " << fmt_json_number(panel["total_r"]) << "\n";
            }
            if (!summary["expert_validity"].empty()) md << "\n";
        }
    }

    if (summary.contains("explicit")) {
        const auto& e = summary["explicit"];
        md << "## Explicit evidence\n\n";
        md << "- Mean explicit rate: " << fmt(e.value("mean_rate_pct", 0.0), 1) << "%\n";
        if (e.contains("split")) {
            md << "- Mean item validity when explicit: "
               << fmt(e["split"].value("mean_r_explicit", 0.0)) << "; when implicit: "
               << fmt(e["split"].value("mean_r_implicit", 0.0)) << "\n";
        }
        md << "\n| Symptom | explicit % |\n|---|---|\n";
        for (const auto& item : e["items"]) {
            md << "| " << item["symptom"].get<std::string>() << " | "
               << fmt(item["rate_pct"].get<double>(), 1) << " |\n";
        }
        md << "\n";
    }

    if (summary.contains("intersymptom")) {
        const auto& is = summary["intersymptom"];
        md << "## Inter-symptom structure\n\n";
        double mm = 0.0, ms = 0.0;
        for (const auto& v : is["mean_offdiag_model"]) mm += v.get<double>();
        for (const auto& v : is["mean_offdiag_self"]) ms += v.get<double>();
        md << "- Mean off-diagonal r: model " << fmt(mm / kNumSymptoms) << ", self-report "
           << fmt(ms / kNumSymptoms) << "\n";
        md << "- Significantly different cells: " << is["significant_diff_cells"].size() << "\n";
        for (const auto& cell : is["significant_diff_cells"]) {
            md << "  - " << cell["a"].get<std::string>() << " / " << cell["b"].get<std::string>()
               << ": delta = " << fmt(cell["delta"].get<double>()) << "\n";
        }
        md << "\n";
    }

    if (summary.contains("rasch")) {
        const auto& ra = summary["rasch"];
        md << "## Item difficulty (" << ra.value("dichotomization", std::string("score_ge_1"))
           << ")\n\n";
        md << "| Symptom | model rank | self rank | diff | significant |\n";
        md << "|---|---|---|---|---|\n";
        for (const auto& item : ra["items"]) {
            md << "| " << item["symptom"].get<std::string>() << " | "
               << item["rank_model"].get<int>() << " | " << item["rank_self"].get<int>() << " | "
               << item["rank_diff"].get<int>() << " | "
               << (item["significant"].get<bool>() ? "yes" : "no") << " |\n";
        }
        md << "\n";
    }

    if (summary.contains("dla")) {
        const auto& d = summary["dla"];
        md << "## Differential language features\n\n";
        md << "- Candidates: " << d.value("candidates", 0) << "; retained: "
           << d.value("retained", 0) << "\n\n";
        if (d.contains("retained_features") && !d["retained_features"].empty()) {
            md << "| n-gram | users | d | PMI | severity r |\n|---|---|---|---|---|\n";
            for (const auto& f : d["retained_features"]) {
                md << "| " << f["ngram"].get<std::string>() << " | " << f["users"].get<int>()
                   << " | " << fmt(f["d"].get<double>(), 2) << " | "
                   << fmt(f["pmi"].get<double>(), 2) << " | " << fmt_json_number(f["severity_r"], 2)
                   << " |\n";
            }
            md << "\n";
        }
    }

    if (summary.contains("schema")) {
        const auto& s = summary["schema"];
        md << "## Score schema\n\n";
        md << "- Significant edges: " << s.value("n_edges", 0) << " ("
           << s.value("n_negative", 0) << " negative)\n";
        for (const auto& edge : s["edges"]) {
            md << "  - " << edge["source"].get<std::string>() << " -> "
               << edge["target"].get<std::string>() << ": beta = "
               << fmt(edge["beta"].get<double>(), 2) << "\n";
        }
        if (s.contains("skipped") && !s["skipped"].empty()) {
            md << "- Skipped targets:\n";
            for (const auto& [key, reason] : s["skipped"].items()) {
                md << "  - " << key << ": " << reason.get<std::string>() << "\n";
            }
        }
        md << "\n";
    }

    if (summary.contains("spans")) {
        const auto& sp = summary["spans"];
        md << "## Citation spans\n\n";
        md << "- Exact matches: " << sp.value("exact", 0) << "\n";
        md << "- Matched after normalization: " << sp.value("normalized", 0) << "\n";
        md << "- Unmatched: " << sp.value("unmatched", 0) << "\n";
    }

    return md.str();
}

CachedReplies replies_from_cache(const std::vector<EssayRecord>& corpus, ResponseCache& cache,
                                 const std::string& model_id, const DecodingConfig& cfg) {
    CachedReplies out;
    for (const auto& essay : corpus) {
        auto fp = request_fingerprint(build_prompt(essay).render(), cfg, model_id);
        auto entry = cache.get(fp);
        if (entry) {
            out.replies[essay.participant_id] = entry->raw_reply;
        } else {
            out.missing.push_back(essay.participant_id);
        }
    }
    return out;
}

namespace {

Matrix9 matrix_from_json(const json& rows) {
    Matrix9 m{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        for (int j = 0; j < kNumSymptoms; ++j) {
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j)).get<double>();
        }
    }
    return m;
}

double max_offdiag_abs_err(const Matrix9& a, const Matrix9& b) {
    double worst = 0.0;
    for (int i = 0; i < kNumSymptoms; ++i) {
        for (int j = 0; j < kNumSymptoms; ++j) {
            if (i == j) continue;
            worst = std::max(worst, std::abs(a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                                             b[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]));
        }
    }
    return worst;
}

} // namespace

json run_replicate(const ReplicateOptions& opts) {
    WorldSpec spec = preset_paper_world(opts.n, opts.seed);
    World world = generate_world(spec);
    fs::path out(opts.out_dir);
    fs::create_directories(out);
    write_world(world, (out / "world").string());

    auto corpus = load_corpus((out / "world" / "corpus.jsonl").string());
    load_expert_scores((out / "world" / "experts.csv").string(), corpus);

    ResponseCache cache(out / "cache");
    MockTransport transport(world);
    Clock epoch_clock = [] { return std::string("1970-01-01T00:00:00Z"); };
    Sleeper no_sleep = [](std::chrono::milliseconds) {};
    Assessor assessor(cache, &transport, epoch_clock, no_sleep);

    AssessOptions aopts;
    aopts.model_id = spec.model_id;
    aopts.endpoint = "mock://world";
    aopts.parallelism = opts.parallelism;
    auto report = assessor.assess_corpus(corpus, aopts);
    if (!report.errors.empty()) {
        throw network_error("replicate: " + std::to_string(report.errors.size()) +
                            " assessment failures; first: " + report.errors.begin()->second);
    }

    auto outcome = normalize_replies(corpus, report.replies);
    auto tab = tabulate(outcome.records);
    fs::path norm = out / "normalized";
    fs::create_directories(norm);
    write_scores_csv(tab, (norm / "scores.csv").string());
    write_spans_jsonl(outcome.records, corpus, (norm / "spans.jsonl").string());
    write_repairs_jsonl(outcome.records, outcome.failures, (norm / "repairs.jsonl").string());

    AnalyzeInputs ain;
    ain.corpus_path = (out / "world" / "corpus.jsonl").string();
    ain.experts_path = (out / "world" / "experts.csv").string();
    ain.scores_csv = (norm / "scores.csv").string();
    ain.spans_jsonl = (norm / "spans.jsonl").string();
    ain.repairs_jsonl = (norm / "repairs.jsonl").string();
    ain.out_dir = (out / "analysis").string();
    run_analyze(ain, opts.knobs);

    const json& manifest = world.manifest;
    const json& truth = manifest.at("truth");
    const json& tol = manifest.at("tolerances");

    json checks = json::array();
    bool all_pass = true;
    auto add_exact = [&](const std::string& name, const json& expected, const json& actual) {
        bool pass = (expected == actual);
        checks.push_back(
            {{"check", name}, {"expected", expected}, {"actual", actual}, {"pass", pass}});
        all_pass = all_pass && pass;
    };
    auto add_tol = [&](const std::string& name, double expected, double actual, double tolerance) {
        bool pass = std::isfinite(actual) && std::abs(expected - actual) <= tolerance;
        checks.push_back({{"check", name},
                          {"expected", expected},
                          {"actual", actual},
                          {"tolerance", tolerance},
                          {"pass", pass}});
        all_pass = all_pass && pass;
    };

    add_exact("corpus_n", manifest.at("corpus").at("n"), corpus.size());
    add_exact("corpus_id_checksum", manifest.at("corpus").at("id_checksum"),
              corpus_id_checksum(corpus));
    add_exact("parse_failures", truth.at("parse_failures"), outcome.failures.size());
    add_exact("repaired_records", truth.at("repaired_records"), outcome.repaired_count);
    for (const auto& [tag, expected] : truth.at("repair_counts").items()) {
        int count = 0;
        for (const auto& rec : outcome.records) {
            if (has_repair(rec, tag)) ++count;
        }
        add_exact("repair_count_" + tag, expected, count);
    }

    for (int i = 0; i < kNumSymptoms; ++i) {
        int count = 0;
        for (std::size_t r = 0; r < tab.table.rows(); ++r) {
            if (tab.table.explicit_mask[r][static_cast<std::size_t>(i)]) ++count;
        }
        add_exact("explicit_count_" + symptom_keys()[static_cast<std::size_t>(i)],
                  truth.at("explicit_counts").at(static_cast<std::size_t>(i)), count);
    }

    add_exact("total_mismatches", 0, tab.total_mismatches);
    add_exact("category_mismatches", 0, tab.category_mismatches);

    int unmatched = 0;
    {
        std::map<std::string, const EssayRecord*> by_id;
        for (const auto& essay : corpus) by_id.emplace(essay.participant_id, &essay);
        for (const auto& rec : outcome.records) {
            unmatched += validate_against_essay(rec, *by_id.at(rec.participant_id)).unmatched;
        }
    }
    add_exact("unmatched_spans", truth.at("fabricated_span_count"), unmatched);

    ScoreTable model = tab.table;
    ScoreTable self = self_report_table(corpus);
    align_rows(model, self);
    auto inter_model = intersymptom_matrix(model);
    auto inter_self = intersymptom_matrix(self);
    const double r_tol = tol.at("ordinal_corr_abs").get<double>();
    add_tol("model_ordinal_corr_max_err", 0.0,
            max_offdiag_abs_err(inter_model.r, matrix_from_json(truth.at("model_ordinal_corr"))),
            r_tol);
    add_tol("self_ordinal_corr_max_err", 0.0,
            max_offdiag_abs_err(inter_self.r, matrix_from_json(truth.at("self_ordinal_corr"))),
            r_tol);

    auto validity = convergent_validity(model, self);
    double worst_item = 0.0;
    bool items_defined = true;
    for (int i = 0; i < kNumSymptoms; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        items_defined = items_defined && validity.item_defined[idx];
        if (!validity.item_defined[idx]) continue;
        worst_item = std::max(
            worst_item, std::abs(validity.item_r[idx] - truth.at("cross_item_r").at(idx).get<double>()));
    }
    add_tol("cross_item_r_max_err", 0.0, items_defined ? worst_item
                                                       : std::numeric_limits<double>::infinity(),
            r_tol);
    add_tol("cross_total_r", truth.at("cross_total_r").get<double>(), validity.total_r,
            tol.at("cross_total_r_abs").get<double>());

    auto dist = score_distribution(model);
    double worst_cell = 0.0;
    for (int i = 0; i < kNumSymptoms; ++i) {
        for (int s = 0; s < 4; ++s) {
            double expected = truth.at("model_score_distribution")
                                  .at(static_cast<std::size_t>(i))
                                  .at(static_cast<std::size_t>(s))
                                  .get<double>();
            double actual = dist[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)] / 100.0;
            worst_cell = std::max(worst_cell, std::abs(actual - expected));
        }
    }
    add_tol("model_score_distribution_max_err", 0.0, worst_cell,
            tol.at("model_distribution_abs").get<double>());

    json report_doc;
    report_doc["n"] = opts.n;
    report_doc["seed"] = opts.seed;
    report_doc["checks"] = std::move(checks);
    report_doc["all_pass"] = all_pass;
    write_text_file(out / "replicate_report.json", report_doc.dump(2) + "\n");
    return report_doc;
}

} // namespace symscope
