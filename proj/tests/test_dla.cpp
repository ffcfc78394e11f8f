#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "symscope/corpus.hpp"
#include "symscope/csvio.hpp"
#include "symscope/dla.hpp"
#include "symscope/normalizer.hpp"
#include "symscope/stats.hpp"
#include "symscope/synth.hpp"

using namespace symscope;
using testutil::TempDir;

namespace {

EssayRecord essay_row(const std::string& id, const std::string& text) {
    EssayRecord r;
    r.participant_id = id;
    r.essay_text = text;
    r.self_report = {0, 0, 0, 0, 0, 0, 0, 0, 0};
    return r;
}

AssessmentRecord record_row(const std::string& id, const std::string& sleep_span,
                            std::array<int, kNumSymptoms> scores) {
    AssessmentRecord rec;
    rec.participant_id = id;
    for (std::size_t j = 0; j < kNumSymptoms; ++j) {
        rec.symptoms[j].score = scores[j];
        rec.symptoms[j].is_explicit = false;
        rec.symptoms[j].rationale = "inferred";
    }
    if (!sleep_span.empty()) {
        rec.symptoms[2].is_explicit = true;
        rec.symptoms[2].spans = {sleep_span};
        rec.symptoms[2].rationale.clear();
    }
    rec.combined_score_reported = rec.recomputed_total();
    rec.category_reported = category_standard(rec.combined_score_reported);
    return rec;
}

const std::vector<bool> oracle_bh(const std::vector<double>& p, double q) {
    const std::size_t m = p.size();
    std::vector<double> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    double cutoff = -1.0;
    for (std::size_t k = m; k >= 1; --k) {
        if (sorted[k - 1] <= static_cast<double>(k) * q / static_cast<double>(m)) {
            cutoff = sorted[k - 1];
            break;
        }
    }
    std::vector<bool> out(m, false);
    if (cutoff >= 0.0) {
        for (std::size_t i = 0; i < m; ++i) out[i] = p[i] <= cutoff;
    }
    return out;
}

// Twelve ten-token essays: six "high" writers use 'gloom' twice inside a
// four-token span, six "low" writers once outside a two-token span. Every
// count below is small enough to tally by hand.
struct MicroWorld {
    std::vector<EssayRecord> corpus;
    std::vector<AssessmentRecord> records;
};

MicroWorld micro_world() {
    MicroWorld w;
    for (int i = 0; i < 6; ++i) {
        auto id = "hi" + std::to_string(i);
        w.corpus.push_back(essay_row(id, "gloom gloom dark words filler one two three four five"));
        std::array<int, kNumSymptoms> scores = {3, 3, 2, 2, 2, 2, 2, 2, 2};  // total 20
        if (i == 5) scores[0] = 2;                                           // one 19 keeps r off 1
        w.records.push_back(record_row(id, "gloom gloom dark words", scores));
    }
    for (int i = 0; i < 6; ++i) {
        auto id = "lo" + std::to_string(i);
        w.corpus.push_back(essay_row(id, "words dark gloom filler calm one two three four five"));
        w.records.push_back(record_row(id, "words dark", {1, 1, 1, 1, 1, 0, 0, 0, 0}));  // total 5
    }
    return w;
}

const NGramStat* find_feature(const DlaResult& result, const std::string& ngram) {
    for (const auto& f : result.features) {
        if (f.ngram == ngram) return &f;
    }
    return nullptr;
}

}  // namespace

TEST_SUITE("dla") {

TEST_CASE("tokenizer lowercases, splits on non-letters, and marks spans") {
    auto ts = tokenize("Hello, WORLD! Don't stop.", {});
    CHECK(ts.tokens == std::vector<std::string>{"hello", "world", "don", "t", "stop"});
    CHECK(ts.in_span == std::vector<bool>(5, false));

    auto marked = tokenize("I feel sad today", {"feel sad"});
    CHECK(marked.tokens == std::vector<std::string>{"i", "feel", "sad", "today"});
    CHECK(marked.in_span == std::vector<bool>{false, true, true, false});

    // Only the first occurrence of a span is attributed.
    auto twice = tokenize("sad days and sad nights", {"sad"});
    CHECK(twice.in_span == std::vector<bool>{true, false, false, false, false});

    auto missing = tokenize("calm seas", {"storm"});
    CHECK(missing.in_span == std::vector<bool>{false, false});
}

TEST_CASE("micro-world statistics match hand tallies") {
    auto w = micro_world();
    DlaConfig cfg;  // min_users 10, q 0.05, pmi threshold 4, orders 1..3
    auto result = differential_language_analysis(w.records, w.corpus, cfg);
    CHECK(result.warnings.empty());

    // Nine shared unigrams, four shared bigrams, three shared trigrams;
    // 'calm' and its neighbors sit below the 10-user floor.
    CHECK(result.candidate_count == 16);
    CHECK(result.vocabulary_size > 16);
    CHECK(find_feature(result, "calm") == nullptr);
    CHECK(find_feature(result, "one two") != nullptr);
    CHECK(find_feature(result, "one two three") != nullptr);

    const auto* gloom = find_feature(result, "gloom");
    REQUIRE(gloom != nullptr);
    CHECK(gloom->users == 12);
    CHECK(gloom->order == 1);

    // High writers: 2 of 4 in-span positions; low: 1 of 8 out-span positions.
    std::vector<double> in_freqs, out_freqs;
    for (int i = 0; i < 6; ++i) {
        in_freqs.push_back(0.5);
        out_freqs.push_back(0.0);
    }
    for (int i = 0; i < 6; ++i) {
        in_freqs.push_back(0.0);
        out_freqs.push_back(1.0 / 8.0);
    }
    CHECK(gloom->rel_freq_in == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(gloom->rel_freq_out == doctest::Approx(0.0625).epsilon(1e-12));
    auto effect = cohens_d(in_freqs, out_freqs);
    CHECK(gloom->d == doctest::Approx(effect.d).epsilon(1e-12));
    CHECK(gloom->p == doctest::Approx(effect.p).epsilon(1e-12));

    // Corpus tallies: 120 unigram positions, 36 in spans; 18 'gloom'
    // occurrences of which 12 inside.
    CHECK(gloom->pmi == doctest::Approx(pmi(12.0 / 120.0, 18.0 / 120.0, 36.0 / 120.0)).epsilon(1e-12));
    CHECK(gloom->pmi == doctest::Approx(std::log2(20.0 / 9.0)).epsilon(1e-12));
    CHECK_FALSE(gloom->pmi_pass);
    CHECK_FALSE(gloom->retained);

    // Severity correlates per-essay overall frequency with the total.
    std::vector<double> overall, totals;
    for (int i = 0; i < 6; ++i) {
        overall.push_back(0.2);
        totals.push_back(i == 5 ? 19.0 : 20.0);
    }
    for (int i = 0; i < 6; ++i) {
        overall.push_back(0.1);
        totals.push_back(5.0);
    }
    REQUIRE(gloom->severity_defined);
    CHECK(gloom->severity_r == doctest::Approx(pearson(overall, totals)).epsilon(1e-12));
    CHECK(gloom->severity_r > 0.99);

    // 'dark' appears once per essay, always inside a span.
    const auto* dark = find_feature(result, "dark");
    REQUIRE(dark != nullptr);
    CHECK(dark->rel_freq_in == doctest::Approx((6 * 0.25 + 6 * 0.5) / 12.0).epsilon(1e-12));
    CHECK(dark->rel_freq_out == doctest::Approx(0.0).epsilon(1e-12));

    // The BH family over defined effect p-values matches enumeration.
    std::vector<double> ps;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < result.features.size(); ++i) {
        if (!std::isnan(result.features[i].p)) {
            ps.push_back(result.features[i].p);
            idx.push_back(i);
        }
    }
    auto want = oracle_bh(ps, cfg.q);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        CHECK(result.features[idx[i]].p_bh_reject == want[i]);
    }

    // Features arrive sorted by descending effect size.
    for (std::size_t i = 1; i < result.features.size(); ++i) {
        double prev = std::isnan(result.features[i - 1].d) ? -1e9 : result.features[i - 1].d;
        double cur = std::isnan(result.features[i].d) ? -1e9 : result.features[i].d;
        CHECK(prev >= cur);
    }
}

TEST_CASE("pmi retention is inclusive at the threshold") {
    // joint 1/8, p_x 1/2, p_y 1/64 gives exactly 4 bits.
    CHECK(pmi(0.125, 0.5, 1.0 / 64.0) == doctest::Approx(4.0));

    auto w = micro_world();
    DlaConfig cfg;
    auto base = differential_language_analysis(w.records, w.corpus, cfg);
    const auto* gloom = find_feature(base, "gloom");
    REQUIRE(gloom != nullptr);

    DlaConfig at = cfg;
    at.pmi_threshold = gloom->pmi;  // equality must pass
    auto hit = differential_language_analysis(w.records, w.corpus, at);
    CHECK(find_feature(hit, "gloom")->pmi_pass);

    DlaConfig above = cfg;
    above.pmi_threshold = std::nextafter(gloom->pmi, 1e9);
    auto miss = differential_language_analysis(w.records, w.corpus, above);
    CHECK_FALSE(find_feature(miss, "gloom")->pmi_pass);
}

TEST_CASE("users below the floor never become candidates") {
    std::vector<EssayRecord> corpus;
    std::vector<AssessmentRecord> records;
    for (int i = 0; i < 12; ++i) {
        auto id = "u" + std::to_string(i);
        corpus.push_back(essay_row(id, i < 9 ? "alpha beta" : "alpha"));
        records.push_back(record_row(id, "", {1, 0, 0, 0, 0, 0, 0, 0, 0}));
    }
    DlaConfig cfg;
    auto result = differential_language_analysis(records, corpus, cfg);
    REQUIRE(result.features.size() == 1);
    CHECK(result.features[0].ngram == "alpha");
    CHECK(result.features[0].users == 12);
    // Identical totals leave severity undefined.
    CHECK_FALSE(result.features[0].severity_defined);
    CHECK(find_feature(result, "beta") == nullptr);

    DlaConfig strict = cfg;
    strict.min_users = 13;
    auto nothing = differential_language_analysis(records, corpus, strict);
    CHECK(nothing.candidate_count == 0);
    CHECK(nothing.features.empty());
    CHECK(nothing.vocabulary_size > 0);
}

TEST_CASE("spans that cannot be located in the essay are reported") {
    std::vector<EssayRecord> corpus = {essay_row("p1", "ten calm words " + std::string("again and again and again"))};
    std::vector<AssessmentRecord> records = {record_row("p1", "sleepless nights", {1, 0, 1, 0, 0, 0, 0, 0, 0})};
    DlaConfig cfg;
    cfg.min_users = 1;
    auto result = differential_language_analysis(records, corpus, cfg);
    REQUIRE_FALSE(result.warnings.empty());
    CHECK(result.warnings[0].find("p1") != std::string::npos);
    CHECK(result.warnings[0].find("sleepless nights") != std::string::npos);
}

TEST_CASE("a planted marker survives every retention gate") {
    auto world = make_dla_planted_world(120, 3);
    CHECK(world.true_d == doctest::Approx(0.8).epsilon(0.02));
    CHECK(world.true_pmi > 4.0);
    REQUIRE_FALSE(world.planted_ngram.empty());

    DlaConfig cfg;
    auto result = differential_language_analysis(world.records, world.corpus, cfg);
    const auto* planted = find_feature(result, world.planted_ngram);
    REQUIRE(planted != nullptr);
    CHECK(planted->retained);
    CHECK(planted->p_bh_reject);
    CHECK(planted->pmi_pass);
    CHECK(planted->pmi >= 4.0);
    CHECK(std::abs(planted->d - world.true_d) < 0.25);
    CHECK(result.retained_count >= 1);
}

TEST_CASE("a null world retains nothing") {
    auto world = make_dla_null_world(60, 4);
    DlaConfig cfg;
    auto result = differential_language_analysis(world.records, world.corpus, cfg);
    CHECK(result.retained_count == 0);
    CHECK(result.candidate_count > 0);
}

TEST_CASE("dla csv lists the feature battery") {
    auto w = micro_world();
    DlaConfig cfg;
    auto result = differential_language_analysis(w.records, w.corpus, cfg);
    TempDir dir("dla_csv");
    write_dla_csv(result, dir.sub("dla.csv"));
    auto text = read_text_file(dir.sub("dla.csv"));
    CHECK(text.find("ngram,users,d,p,p_bh_reject,pmi,severity_r,severity_sig") == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + result.candidate_count);
    CHECK(text.find("gloom") != std::string::npos);
}

}  // TEST_SUITE
