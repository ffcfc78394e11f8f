#include "symscope/synth.hpp"

#include "symscope/csvio.hpp"
#include "symscope/errors.hpp"
#include "symscope/rng.hpp"
#include "symscope/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

namespace symscope {

namespace {

constexpr double kThresholdClamp = 8.2;

using Thresh = std::array<double, 3>;

Matrix9 matmul(const Matrix9& a, const Matrix9& b) {
    Matrix9 c{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        for (int j = 0; j < kNumSymptoms; ++j) {
            double acc = 0.0;
            for (int k = 0; k < kNumSymptoms; ++k) {
                acc += a[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
                       b[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
            }
            c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = acc;
        }
    }
    return c;
}

std::array<double, kNumSymptoms> matvec(const Matrix9& a, const std::array<double, kNumSymptoms>& v) {
    std::array<double, kNumSymptoms> out{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        double acc = 0.0;
        for (int k = 0; k < kNumSymptoms; ++k) {
            acc += a[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * v[static_cast<std::size_t>(k)];
        }
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

int cut_score(double z, const Thresh& t) {
    int s = 0;
    for (double cut : t) {
        if (z > cut) ++s;
    }
    return s;
}

std::array<Thresh, kNumSymptoms> thresholds_for(const MarginalSet& marginals) {
    std::array<Thresh, kNumSymptoms> out{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        out[static_cast<std::size_t>(i)] = thresholds_from_marginal(marginals[static_cast<std::size_t>(i)]);
    }
    return out;
}

std::string zero_pad(long value, int width) {
    std::string digits = std::to_string(value);
    while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
    return digits;
}

std::string participant_id(int idx) { return "p" + zero_pad(idx + 1, 5); }

// Alphabetic participant tag ('a'=0 .. 'j'=9 per decimal digit) so every
// essay stays letters-only yet unique.
std::string idword(int idx) {
    std::string word = "subject";
    for (char c : std::to_string(idx + 1)) word.push_back(static_cast<char>('a' + (c - '0')));
    return word;
}

struct Marker {
    const char* sentence;
    const char* span;
};

const std::array<Marker, kNumSymptoms>& markers() {
    static const std::array<Marker, kNumSymptoms> m = {{
        {"i have lost interest in things i used to enjoy", "lost interest in things i used to enjoy"},
        {"i have been feeling down and hopeless most days", "feeling down and hopeless"},
        {"i barely sleep at night and lie awake for hours", "barely sleep at night"},
        {"i feel tired all the time with no energy left", "tired all the time with no energy"},
        {"my appetite is gone and i keep skipping meals", "my appetite is gone"},
        {"i feel worthless and keep blaming myself for everything", "worthless and keep blaming myself"},
        {"i cannot focus on reading or even short tasks", "cannot focus on reading"},
        {"i have been restless and pacing around the house", "restless and pacing"},
        {"sometimes i think about ending it all", "think about ending it all"},
    }};
    return m;
}

const std::array<std::string, kNumSymptoms>& implicit_rationales() {
    static const std::array<std::string, kNumSymptoms> r = {
        "No explicit mention, but the overall tone suggests diminished interest is possible",
        "No explicit mention, the general mood of the text informs this estimate",
        "No explicit mention, stress of this kind can disturb sleep patterns",
        "No explicit mention, sustained strain often brings low energy",
        "No explicit mention, appetite changes frequently accompany this picture",
        "No explicit mention, self-critical themes were not directly stated",
        "No explicit mention, concentration was not directly described",
        "No explicit mention, no observable agitation or slowing was described",
        "No explicit mention of suicidal thoughts or self-harm",
    };
    return r;
}

const std::array<const char*, 4>& frequency_phrases() {
    static const std::array<const char*, 4> f = {
        "hardly at all", "on several days", "more than half the days", "nearly every day"};
    return f;
}

const std::vector<std::string>& filler_sentences() {
    static const std::vector<std::string> fillers = {
        "the weather has been changing a lot lately",
        "my neighbor waved at me from across the street",
        "we cooked pasta for dinner on sunday evening",
        "the bus was late again this morning",
        "i watched a documentary about the ocean floor",
        "my sister called to talk about her garden",
        "work has kept a steady pace this month",
        "the park near my house reopened last week",
    };
    return fillers;
}

std::string build_essay(int idx, const AssessmentRecord& truth, Rng& rng) {
    std::vector<std::string> sentences;
    sentences.push_back("my reference word is " + idword(idx));
    for (int i = 0; i < kNumSymptoms; ++i) {
        const auto& s = truth.symptoms[static_cast<std::size_t>(i)];
        if (!s.is_explicit) continue;
        sentences.push_back(std::string(markers()[static_cast<std::size_t>(i)].sentence) +
                            " and this has been happening " +
                            frequency_phrases()[static_cast<std::size_t>(s.score)]);
    }
    // Two to four filler sentences, drawn without replacement.
    std::vector<std::size_t> pool(filler_sentences().size());
    std::iota(pool.begin(), pool.end(), 0u);
    std::size_t want = 2 + static_cast<std::size_t>(rng.uniform_int(3));
    for (std::size_t k = 0; k < want; ++k) {
        std::size_t pick = k + static_cast<std::size_t>(rng.uniform_int(pool.size() - k));
        std::swap(pool[k], pool[pick]);
        sentences.push_back(filler_sentences()[pool[k]]);
    }
    std::string essay;
    for (std::size_t k = 0; k < sentences.size(); ++k) {
        if (k) essay += ". ";
        essay += sentences[k];
    }
    essay += ".";
    return essay;
}

// Fixed-size record subsets per corruption so realized counts are exact.
std::set<int> pick_records(double rate, const std::vector<int>& candidates, std::uint64_t seed,
                           const std::string& tag) {
    std::set<int> chosen;
    auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(candidates.size())));
    k = std::min(k, candidates.size());
    if (k == 0) return chosen;
    std::vector<int> order = candidates;
    Rng rng(derive_seed(seed, "inject_" + tag, 0));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(i))]);
    }
    chosen.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    return chosen;
}

int first_explicit(const AssessmentRecord& rec) {
    for (int i = 0; i < kNumSymptoms; ++i) {
        if (rec.symptoms[static_cast<std::size_t>(i)].is_explicit) return i;
    }
    return -1;
}

int last_explicit(const AssessmentRecord& rec) {
    for (int i = kNumSymptoms - 1; i >= 0; --i) {
        if (rec.symptoms[static_cast<std::size_t>(i)].is_explicit) return i;
    }
    return -1;
}

void rename_key(nlohmann::json& root, const std::string& from, const std::string& to) {
    for (const char* step : {"STEP 1", "STEP 2"}) {
        auto& obj = root[step];
        if (auto it = obj.find(from); it != obj.end()) {
            obj[to] = *it;
            obj.erase(from);
            return;
        }
    }
    throw validation_error("key '" + from + "' not present in reply to corrupt");
}

struct CorruptionPlan {
    std::set<int> alias, aspect, merged, prose, non_phq9, unbalanced, fabricated;
};

std::string corrupt_reply(const AssessmentRecord& truth, int idx, const CorruptionPlan& plan) {
    nlohmann::json root = nlohmann::json::parse(render_reply(truth));
    // Span-level corruptions look entries up by canonical name, so they must
    // run before any key rename.
    if (plan.unbalanced.count(idx)) {
        int target = first_explicit(truth);
        auto& entry = root["STEP 1"][symptom_names()[static_cast<std::size_t>(target)]];
        std::string reason = entry[0].get<std::string>();
        entry[0] = reason.substr(0, reason.size() - 1);  // drop the closing quote
    }
    if (plan.fabricated.count(idx)) {
        int target = last_explicit(truth);
        auto& entry = root["STEP 1"][symptom_names()[static_cast<std::size_t>(target)]];
        entry.insert(entry.end() - 1, "'my assessment notes say otherwise'");
    }
    if (plan.alias.count(idx)) {
        rename_key(root, symptom_names()[static_cast<std::size_t>(Symptom::SuicidalIdeation)],
                   "Suicidal Thoughts");
    }
    if (plan.aspect.count(idx)) {
        rename_key(root, symptom_names()[static_cast<std::size_t>(Symptom::Sleep)], "Insomnia");
    }
    if (plan.non_phq9.count(idx)) {
        root["STEP 2"]["Loneliness"] =
            nlohmann::json::array({"The essay hints at time spent alone", 1});
    }
    std::string body;
    if (plan.merged.count(idx)) {
        nlohmann::json first, second;
        first["STEP 1"] = root["STEP 1"];
        second["STEP 2"] = root["STEP 2"];
        second["STEP 3"] = root["STEP 3"];
        body = first.dump(2) + "\n" + second.dump(2);
    } else {
        body = root.dump(2);
    }
    if (plan.prose.count(idx)) {
        body = "Here is the structured assessment you asked for.\n" + body +
               "\nLet me know if anything needs a second pass.";
    }
    return body;
}

nlohmann::json to_json(const Matrix9& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : m) rows.push_back(row);
    return rows;
}

nlohmann::json to_json(const MarginalSet& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : m) rows.push_back(row);
    return rows;
}

} // namespace

std::array<double, 3> thresholds_from_marginal(const Marginal& probs) {
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0 || !std::isfinite(p)) {
            throw validation_error("marginal probabilities must be finite and non-negative");
        }
        sum += p;
    }
    if (sum <= 0.0) throw validation_error("marginal probabilities sum to zero");
    Thresh t{};
    double cum = 0.0;
    for (int a = 0; a < 3; ++a) {
        cum += probs[static_cast<std::size_t>(a)] / sum;
        double q;
        if (cum <= 1e-12) {
            q = -kThresholdClamp;
        } else if (cum >= 1.0 - 1e-12) {
            q = kThresholdClamp;
        } else {
            q = std::clamp(normal_quantile(cum), -kThresholdClamp, kThresholdClamp);
        }
        t[static_cast<std::size_t>(a)] = q;
    }
    return t;
}

double ordinal_mean(const std::array<double, 3>& t) {
    double m = 0.0;
    for (double cut : t) m += 1.0 - normal_cdf(cut);
    return m;
}

double ordinal_variance(const std::array<double, 3>& t) {
    // E[X^2] = sum over a>=1 of (2a-1) P(X>=a).
    double ex2 = 0.0;
    for (int a = 1; a <= 3; ++a) {
        ex2 += (2.0 * a - 1.0) * (1.0 - normal_cdf(t[static_cast<std::size_t>(a - 1)]));
    }
    double m = ordinal_mean(t);
    return ex2 - m * m;
}

double ordinal_covariance(const std::array<double, 3>& ta, const std::array<double, 3>& tb,
                          double latent_r) {
    // E[XY] = sum over a,b>=1 of P(Z1 > t_a, Z2 > s_b).
    double exy = 0.0;
    for (double a : ta) {
        for (double b : tb) exy += bivariate_normal_survival(a, b, latent_r);
    }
    return exy - ordinal_mean(ta) * ordinal_mean(tb);
}

double analytic_ordinal_correlation(const Marginal& a, const Marginal& b, double latent_r) {
    Thresh ta = thresholds_from_marginal(a);
    Thresh tb = thresholds_from_marginal(b);
    double va = ordinal_variance(ta);
    double vb = ordinal_variance(tb);
    if (va <= 0.0 || vb <= 0.0) {
        throw numeric_error("degenerate marginal: ordinal variance is zero");
    }
    return ordinal_covariance(ta, tb, latent_r) / std::sqrt(va * vb);
}

double latent_r_for_ordinal_r(const Marginal& a, const Marginal& b, double target_ordinal_r) {
    double lo = -0.9999, hi = 0.9999;
    double flo = analytic_ordinal_correlation(a, b, lo);
    double fhi = analytic_ordinal_correlation(a, b, hi);
    if (target_ordinal_r < flo || target_ordinal_r > fhi) {
        throw validation_error("ordinal correlation " + fmt_double(target_ordinal_r) +
                               " is unreachable for these marginals (range " + fmt_double(flo) +
                               ".." + fmt_double(fhi) + ")");
    }
    for (int iter = 0; iter < 80; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (analytic_ordinal_correlation(a, b, mid) < target_ordinal_r) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

Matrix9 analytic_ordinal_matrix(const MarginalSet& marginals, const Matrix9& latent) {
    Matrix9 out{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        out[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
        for (int j = i + 1; j < kNumSymptoms; ++j) {
            double r = analytic_ordinal_correlation(
                marginals[static_cast<std::size_t>(i)], marginals[static_cast<std::size_t>(j)],
                latent[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = r;
            out[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = r;
        }
    }
    return out;
}

Matrix9 matrix_sqrt_psd(const Matrix9& m, const std::string& what) {
    Eigen::Matrix<double, 9, 9> em;
    for (int i = 0; i < kNumSymptoms; ++i) {
        for (int j = 0; j < kNumSymptoms; ++j) {
            em(i, j) = m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> solver(em);
    if (solver.info() != Eigen::Success) throw numeric_error(what + ": eigendecomposition failed");
    Eigen::Matrix<double, 9, 1> vals = solver.eigenvalues();
    for (int i = 0; i < kNumSymptoms; ++i) {
        if (vals(i) < -1e-10) {
            throw validation_error(what + " is not positive semidefinite (eigenvalue " +
                                   fmt_double(vals(i)) + ")");
        }
        vals(i) = std::max(vals(i), 0.0);
    }
    Eigen::Matrix<double, 9, 9> root =
        solver.eigenvectors() * vals.cwiseSqrt().asDiagonal() * solver.eigenvectors().transpose();
    Matrix9 out{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        for (int j = 0; j < kNumSymptoms; ++j) {
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = root(i, j);
        }
    }
    return out;
}

World generate_world(const WorldSpec& spec) {
    if (spec.n < 1) throw validation_error("world size must be at least 1");
    for (double rate : {spec.rate_alias, spec.rate_aspect, spec.rate_merged, spec.rate_prose,
                        spec.rate_non_phq9, spec.rate_unbalanced, spec.rate_fabricated_span}) {
        if (rate < 0.0 || rate > 1.0) throw validation_error("corruption rates must lie in [0,1]");
    }
    for (double rate : spec.explicit_rates) {
        if (rate < 0.0 || rate > 1.0) throw validation_error("explicit rates must lie in [0,1]");
    }
    if (std::abs(spec.cross_rho) > 1.0) throw validation_error("cross_rho must lie in [-1,1]");

    const auto n = spec.n;
    auto t_self = thresholds_for(spec.self_marginals);
    auto t_model = thresholds_for(spec.model_marginals);
    Matrix9 a_root = matrix_sqrt_psd(spec.self_latent, "self latent correlation");
    Matrix9 b_root = matrix_sqrt_psd(spec.model_latent, "model latent correlation");
    const double rho = spec.cross_rho;
    const double resid = std::sqrt(std::max(0.0, 1.0 - rho * rho));

    // Latent draws: channel A sees g1, channel B sees the rho-coupled mix.
    std::vector<std::array<int, kNumSymptoms>> self_scores(static_cast<std::size_t>(n));
    std::vector<std::array<int, kNumSymptoms>> model_scores(static_cast<std::size_t>(n));
    Rng draws(derive_seed(spec.seed, "latent_draws", 0));
    for (int r = 0; r < n; ++r) {
        std::array<double, kNumSymptoms> g1{}, g2{};
        for (auto& g : g1) g = draws.normal();
        for (auto& g : g2) g = draws.normal();
        auto z1 = matvec(a_root, g1);
        std::array<double, kNumSymptoms> mix{};
        for (int i = 0; i < kNumSymptoms; ++i) {
            mix[static_cast<std::size_t>(i)] =
                rho * g1[static_cast<std::size_t>(i)] + resid * g2[static_cast<std::size_t>(i)];
        }
        auto z2 = matvec(b_root, mix);
        for (int i = 0; i < kNumSymptoms; ++i) {
            self_scores[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
                cut_score(z1[static_cast<std::size_t>(i)], t_self[static_cast<std::size_t>(i)]);
            model_scores[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)] =
                cut_score(z2[static_cast<std::size_t>(i)], t_model[static_cast<std::size_t>(i)]);
        }
    }

    // Explicit flags: exactly round(rate*n) records per symptom, so the
    // manifest can state realized rates with zero tolerance.
    std::vector<std::array<bool, kNumSymptoms>> mask(static_cast<std::size_t>(n));
    std::array<int, kNumSymptoms> explicit_counts{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        auto k = static_cast<int>(std::llround(spec.explicit_rates[static_cast<std::size_t>(i)] * n));
        k = std::clamp(k, 0, n);
        explicit_counts[static_cast<std::size_t>(i)] = k;
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(spec.seed, "explicit_" + symptom_keys()[static_cast<std::size_t>(i)], 0));
        for (std::size_t x = order.size(); x > 1; --x) {
            std::swap(order[x - 1], order[static_cast<std::size_t>(rng.uniform_int(x))]);
        }
        for (int x = 0; x < k; ++x) {
            mask[static_cast<std::size_t>(order[static_cast<std::size_t>(x)])][static_cast<std::size_t>(i)] = true;
        }
    }

    World world;
    world.spec = spec;
    world.corpus.reserve(static_cast<std::size_t>(n));
    world.truth.reserve(static_cast<std::size_t>(n));

    std::vector<int> all_records, spanful_records;
    for (int r = 0; r < n; ++r) {
        AssessmentRecord rec;
        rec.participant_id = participant_id(r);
        int total = 0;
        for (int i = 0; i < kNumSymptoms; ++i) {
            auto& s = rec.symptoms[static_cast<std::size_t>(i)];
            s.score = model_scores[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
            s.is_explicit = mask[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
            if (s.is_explicit) {
                s.spans = {markers()[static_cast<std::size_t>(i)].span};
            } else {
                s.rationale = implicit_rationales()[static_cast<std::size_t>(i)];
            }
            total += s.score;
        }
        rec.combined_score_reported = total;
        rec.category_reported = category_standard(total);

        EssayRecord essay;
        essay.participant_id = rec.participant_id;
        Rng essay_rng(derive_seed(spec.seed, "essay", static_cast<std::uint64_t>(r)));
        essay.essay_text = build_essay(r, rec, essay_rng);
        essay.self_report = self_scores[static_cast<std::size_t>(r)];

        all_records.push_back(r);
        if (first_explicit(rec) >= 0) spanful_records.push_back(r);
        world.truth.push_back(std::move(rec));
        world.corpus.push_back(std::move(essay));
    }

    CorruptionPlan plan;
    plan.alias = pick_records(spec.rate_alias, all_records, spec.seed, kRepairAlias);
    plan.aspect = pick_records(spec.rate_aspect, all_records, spec.seed, kRepairAspect);
    plan.merged = pick_records(spec.rate_merged, all_records, spec.seed, kRepairMergedSiblings);
    plan.prose = pick_records(spec.rate_prose, all_records, spec.seed, kRepairStrippedProse);
    plan.non_phq9 = pick_records(spec.rate_non_phq9, all_records, spec.seed, kRepairNonPhq9);
    plan.unbalanced = pick_records(spec.rate_unbalanced, spanful_records, spec.seed, kRepairUnbalancedQuotes);
    plan.fabricated = pick_records(spec.rate_fabricated_span, spanful_records, spec.seed, "fabricated_span");

    for (int r = 0; r < n; ++r) {
        world.replies[world.truth[static_cast<std::size_t>(r)].participant_id] =
            corrupt_reply(world.truth[static_cast<std::size_t>(r)], r, plan);
    }

    // Expert channel: two raters over a fixed subsample, each a clamped
    // self-report perturbation. Manifest marks expert statistics sampling-only.
    int subsample = std::min(spec.expert_subsample, n);
    if (subsample > 0 && spec.expert_raters > 0) {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(spec.seed, "experts", 0));
        for (std::size_t x = order.size(); x > 1; --x) {
            std::swap(order[x - 1], order[static_cast<std::size_t>(rng.uniform_int(x))]);
        }
        for (int x = 0; x < subsample; ++x) {
            auto& essay = world.corpus[static_cast<std::size_t>(order[static_cast<std::size_t>(x)])];
            for (int rater = 0; rater < spec.expert_raters; ++rater) {
                ExpertScores expert;
                expert.rater_id = "expert_" + std::string(1, static_cast<char>('a' + rater));
                for (int i = 0; i < kNumSymptoms; ++i) {
                    int delta = 0;
                    double u = rng.uniform01();
                    if (u < 0.15) {
                        delta = -1;
                    } else if (u > 0.85) {
                        delta = 1;
                    }
                    expert.items[static_cast<std::size_t>(i)] =
                        std::clamp(essay.self_report[static_cast<std::size_t>(i)] + delta, 0, 3);
                }
                essay.expert_scores.push_back(std::move(expert));
            }
        }
    }

    // Analytic ground truth. Cross-channel latent correlation is
    // rho * sqrt(R_A) * sqrt(R_B) by construction.
    Matrix9 cross_latent = matmul(a_root, b_root);
    for (auto& row : cross_latent) {
        for (auto& v : row) v *= rho;
    }
    Matrix9 self_ordinal = analytic_ordinal_matrix(spec.self_marginals, spec.self_latent);
    Matrix9 model_ordinal = analytic_ordinal_matrix(spec.model_marginals, spec.model_latent);

    std::array<double, kNumSymptoms> cross_item{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        cross_item[static_cast<std::size_t>(i)] = analytic_ordinal_correlation(
            spec.self_marginals[static_cast<std::size_t>(i)], spec.model_marginals[static_cast<std::size_t>(i)],
            cross_latent[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)]);
    }
    double var_self = 0.0, var_model = 0.0, cov_cross = 0.0;
    for (int i = 0; i < kNumSymptoms; ++i) {
        var_self += ordinal_variance(t_self[static_cast<std::size_t>(i)]);
        var_model += ordinal_variance(t_model[static_cast<std::size_t>(i)]);
        for (int j = 0; j < kNumSymptoms; ++j) {
            if (j > i) {
                var_self += 2.0 * ordinal_covariance(
                                      t_self[static_cast<std::size_t>(i)], t_self[static_cast<std::size_t>(j)],
                                      spec.self_latent[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
                var_model += 2.0 * ordinal_covariance(
                                       t_model[static_cast<std::size_t>(i)], t_model[static_cast<std::size_t>(j)],
                                       spec.model_latent[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
            }
            cov_cross += ordinal_covariance(
                t_self[static_cast<std::size_t>(i)], t_model[static_cast<std::size_t>(j)],
                cross_latent[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        }
    }
    double cross_total_r = cov_cross / std::sqrt(var_self * var_model);

    MarginalSet model_dist{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        const auto& t = t_model[static_cast<std::size_t>(i)];
        double c0 = normal_cdf(t[0]), c1 = normal_cdf(t[1]), c2 = normal_cdf(t[2]);
        model_dist[static_cast<std::size_t>(i)] = {c0, c1 - c0, c2 - c1, 1.0 - c2};
    }

    nlohmann::json manifest;
    manifest["format"] = "symscope-world-manifest-v1";
    auto& sj = manifest["spec"];
    sj["n"] = spec.n;
    sj["seed"] = spec.seed;
    sj["model_id"] = spec.model_id;
    sj["cross_rho"] = spec.cross_rho;
    sj["self_latent"] = to_json(spec.self_latent);
    sj["model_latent"] = to_json(spec.model_latent);
    sj["self_marginals"] = to_json(spec.self_marginals);
    sj["model_marginals"] = to_json(spec.model_marginals);
    sj["explicit_rates"] = spec.explicit_rates;
    sj["repair_rates"] = {{kRepairAlias, spec.rate_alias},
                          {kRepairAspect, spec.rate_aspect},
                          {kRepairMergedSiblings, spec.rate_merged},
                          {kRepairStrippedProse, spec.rate_prose},
                          {kRepairNonPhq9, spec.rate_non_phq9},
                          {kRepairUnbalancedQuotes, spec.rate_unbalanced}};
    sj["fabricated_span_rate"] = spec.rate_fabricated_span;
    sj["expert_raters"] = spec.expert_raters;
    sj["expert_subsample"] = subsample;

    manifest["corpus"] = {{"n", spec.n}, {"id_checksum", corpus_id_checksum(world.corpus)}};

    auto& truth = manifest["truth"];
    std::array<double, kNumSymptoms> realized{};
    double realized_mean = 0.0;
    for (int i = 0; i < kNumSymptoms; ++i) {
        realized[static_cast<std::size_t>(i)] =
            static_cast<double>(explicit_counts[static_cast<std::size_t>(i)]) / static_cast<double>(n);
        realized_mean += realized[static_cast<std::size_t>(i)];
    }
    realized_mean /= kNumSymptoms;
    truth["explicit_counts"] = explicit_counts;
    truth["explicit_rates_realized"] = realized;
    truth["explicit_rate_mean_realized"] = realized_mean;
    truth["self_ordinal_corr"] = to_json(self_ordinal);
    truth["model_ordinal_corr"] = to_json(model_ordinal);
    truth["cross_item_r"] = cross_item;
    truth["cross_total_r"] = cross_total_r;
    truth["model_score_distribution"] = to_json(model_dist);
    truth["repair_counts"] = {{kRepairAlias, plan.alias.size()},
                              {kRepairAspect, plan.aspect.size()},
                              {kRepairMergedSiblings, plan.merged.size()},
                              {kRepairStrippedProse, plan.prose.size()},
                              {kRepairNonPhq9, plan.non_phq9.size()},
                              {kRepairUnbalancedQuotes, plan.unbalanced.size()}};
    std::set<int> repaired;
    for (const auto* s : {&plan.alias, &plan.aspect, &plan.merged, &plan.prose, &plan.non_phq9,
                          &plan.unbalanced}) {
        repaired.insert(s->begin(), s->end());
    }
    truth["repaired_records"] = repaired.size();
    truth["fabricated_span_count"] = plan.fabricated.size();
    truth["parse_failures"] = 0;

    double rootn = std::sqrt(static_cast<double>(n));
    manifest["tolerances"] = {{"ordinal_corr_abs", 2.6 / rootn},
                              {"cross_total_r_abs", 1.8 / rootn},
                              {"explicit_counts", 0},
                              {"model_distribution_abs", 1.5 / rootn},
                              {"repair_counts", 0}};
    manifest["sampling_only"] = {"dif_ranks", "dla_features", "expert_validity", "rasch_locations",
                                 "schema_beta", "explicit_split_validity"};
    world.manifest = std::move(manifest);
    return world;
}

void write_world(const World& world, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::filesystem::path base(dir);
    write_corpus(base / "corpus.jsonl", world.corpus);
    write_expert_scores(base / "experts.csv", world.corpus);
    std::string lines;
    for (const auto& [pid, reply] : world.replies) {
        nlohmann::json row = {{"participant_id", pid}, {"reply", reply}};
        lines += row.dump();
        lines += "\n";
    }
    write_text_file((base / "replies.jsonl").string(), lines);
    write_text_file((base / "manifest.json").string(), world.manifest.dump(2) + "\n");
}

std::map<std::string, std::string> load_replies(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open replies file: " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw parse_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!row.contains("participant_id") || !row.contains("reply")) {
            throw parse_error(path + ":" + std::to_string(lineno) +
                              ": expected participant_id and reply fields");
        }
        out[row["participant_id"].get<std::string>()] = row["reply"].get<std::string>();
    }
    return out;
}

MockTransport::MockTransport(const World& world) {
    std::map<std::string, const std::string*> essay_by_pid;
    for (const auto& rec : world.corpus) essay_by_pid[rec.participant_id] = &rec.essay_text;
    for (const auto& [pid, reply] : world.replies) {
        auto it = essay_by_pid.find(pid);
        if (it == essay_by_pid.end()) {
            throw validation_error("reply for unknown participant '" + pid + "'");
        }
        by_essay_[*it->second] = reply;
    }
}

MockTransport::MockTransport(std::map<std::string, std::string> replies_by_essay)
    : by_essay_(std::move(replies_by_essay)) {}

void MockTransport::push_failure(int status, const std::string& body) {
    failure_queue_.emplace_back(status, body);
}

TransportReply MockTransport::send(const std::string&, const std::string& request_body) {
    ++calls_;
    if (!failure_queue_.empty()) {
        auto [status, body] = failure_queue_.front();
        failure_queue_.erase(failure_queue_.begin());
        return TransportReply{status, body, "scripted failure"};
    }
    std::string prompt;
    try {
        nlohmann::json req = nlohmann::json::parse(request_body);
        prompt = req.at("messages").at(0).at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        return TransportReply{400, "", "malformed request body"};
    }
    // The prompt ends with: Text: "<essay>"
    const std::string needle = "\nText: \"";
    auto pos = prompt.rfind(needle);
    if (pos == std::string::npos || prompt.empty() || prompt.back() != '"') {
        return TransportReply{400, "", "prompt does not carry an essay"};
    }
    std::string essay = prompt.substr(pos + needle.size(), prompt.size() - (pos + needle.size()) - 1);
    auto it = by_essay_.find(essay);
    if (it == by_essay_.end()) {
        return TransportReply{404, "{\"error\":\"unknown essay\"}", "no reply scripted for essay"};
    }
    nlohmann::json message = {{"role", "assistant"}, {"content", it->second}};
    nlohmann::json choice = {{"message", message}, {"finish_reason", "stop"}};
    nlohmann::json body;
    body["choices"] = nlohmann::json::array({choice});
    return TransportReply{200, body.dump(), ""};
}

Matrix9 preset_latent_corr() {
    // One-factor structure; off-diagonals span roughly .40-.74, inside the
    // published self-report band.
    static const std::array<double, kNumSymptoms> loading = {0.84, 0.88, 0.70, 0.80, 0.64,
                                                             0.74, 0.72, 0.62, 0.66};
    Matrix9 m{};
    for (int i = 0; i < kNumSymptoms; ++i) {
        for (int j = 0; j < kNumSymptoms; ++j) {
            m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                i == j ? 1.0
                       : loading[static_cast<std::size_t>(i)] * loading[static_cast<std::size_t>(j)];
        }
    }
    return m;
}

MarginalSet preset_self_marginals() {
    return MarginalSet{{{0.243, 0.325, 0.244, 0.188},
                        {0.238, 0.321, 0.220, 0.222},
                        {0.251, 0.238, 0.211, 0.300},
                        {0.154, 0.272, 0.227, 0.346},
                        {0.306, 0.259, 0.191, 0.244},
                        {0.294, 0.254, 0.230, 0.222},
                        {0.280, 0.309, 0.241, 0.169},
                        {0.555, 0.232, 0.150, 0.064},
                        {0.603, 0.214, 0.100, 0.083}}};
}

MarginalSet preset_model_marginals() {
    return MarginalSet{{{0.285, 0.434, 0.265, 0.017},
                        {0.250, 0.246, 0.440, 0.065},
                        {0.352, 0.544, 0.101, 0.004},
                        {0.293, 0.509, 0.194, 0.004},
                        {0.572, 0.400, 0.027, 0.001},
                        {0.433, 0.375, 0.183, 0.009},
                        {0.360, 0.583, 0.057, 0.000},
                        {0.533, 0.453, 0.014, 0.000},
                        {0.879, 0.088, 0.023, 0.011}}};
}

std::array<double, kNumSymptoms> preset_explicit_rates() {
    return {0.5372, 0.9644, 0.1131, 0.2513, 0.0503, 0.2419, 0.0942, 0.0335, 0.0555};
}

double preset_cross_rho() { return 0.7352963604; }

WorldSpec preset_paper_world(int n, std::uint64_t seed) {
    WorldSpec spec;
    spec.n = n;
    spec.seed = seed;
    spec.self_latent = preset_latent_corr();
    spec.model_latent = preset_latent_corr();
    spec.cross_rho = preset_cross_rho();
    spec.self_marginals = preset_self_marginals();
    spec.model_marginals = preset_model_marginals();
    spec.explicit_rates = preset_explicit_rates();
    spec.rate_alias = 0.015;
    spec.rate_aspect = 0.012;
    spec.rate_merged = 0.010;
    spec.rate_prose = 0.010;
    spec.rate_non_phq9 = 0.008;
    spec.rate_unbalanced = 0.006;
    spec.rate_fabricated_span = 0.02;
    return spec;
}

MatrixPairSpec preset_matrix_pair_spec() {
    MatrixPairSpec spec;
    spec.latent_base = preset_latent_corr();
    spec.marginals = preset_self_marginals();
    spec.bump_i = 7;
    spec.bump_j = 8;
    spec.ordinal_delta = 0.30;
    spec.cross_rho = 0.75;
    return spec;
}

MatrixPairWorld make_matrix_pair_world(const MatrixPairSpec& spec, int n, std::uint64_t seed) {
    if (n < 3) throw validation_error("matrix pair world needs at least 3 rows");
    if (spec.bump_i == spec.bump_j || spec.bump_i < 0 || spec.bump_j < 0 ||
        spec.bump_i >= kNumSymptoms || spec.bump_j >= kNumSymptoms) {
        throw validation_error("bumped cell must be a distinct symptom pair");
    }
    auto si = static_cast<std::size_t>(spec.bump_i);
    auto sj = static_cast<std::size_t>(spec.bump_j);

    MatrixPairWorld world;
    world.ordinal_a = analytic_ordinal_matrix(spec.marginals, spec.latent_base);
    double target = world.ordinal_a[si][sj] + spec.ordinal_delta;
    double bumped_latent = latent_r_for_ordinal_r(spec.marginals[si], spec.marginals[sj], target);
    Matrix9 latent_b = spec.latent_base;
    latent_b[si][sj] = bumped_latent;
    latent_b[sj][si] = bumped_latent;
    world.ordinal_b = analytic_ordinal_matrix(spec.marginals, latent_b);

    Matrix9 a_root = matrix_sqrt_psd(spec.latent_base, "baseline latent correlation");
    Matrix9 b_root = matrix_sqrt_psd(latent_b, "bumped latent correlation");
    auto thresholds = thresholds_for(spec.marginals);
    const double rho = spec.cross_rho;
    const double resid = std::sqrt(std::max(0.0, 1.0 - rho * rho));

    world.a.source = "self_report";
    world.b.source = "model";
    Rng rng(derive_seed(seed, "matrix_pair", 0));
    for (int r = 0; r < n; ++r) {
        std::array<double, kNumSymptoms> g1{}, g2{}, mix{};
        for (auto& g : g1) g = rng.normal();
        for (auto& g : g2) g = rng.normal();
        for (int i = 0; i < kNumSymptoms; ++i) {
            mix[static_cast<std::size_t>(i)] =
                rho * g1[static_cast<std::size_t>(i)] + resid * g2[static_cast<std::size_t>(i)];
        }
        auto z1 = matvec(a_root, g1);
        auto z2 = matvec(b_root, mix);
        std::array<int, kNumSymptoms> row_a{}, row_b{};
        for (int i = 0; i < kNumSymptoms; ++i) {
            row_a[static_cast<std::size_t>(i)] =
                cut_score(z1[static_cast<std::size_t>(i)], thresholds[static_cast<std::size_t>(i)]);
            row_b[static_cast<std::size_t>(i)] =
                cut_score(z2[static_cast<std::size_t>(i)], thresholds[static_cast<std::size_t>(i)]);
        }
        std::string id = "s" + zero_pad(r + 1, 5);
        world.a.row_ids.push_back(id);
        world.b.row_ids.push_back(id);
        world.a.matrix.push_back(row_a);
        world.b.matrix.push_back(row_b);
    }
    refresh_totals(world.a);
    refresh_totals(world.b);
    return world;
}

ScoreTable simulate_rasch(const std::array<double, kNumSymptoms>& locations, int n,
                          std::uint64_t seed) {
    if (n < 1) throw validation_error("simulated response set must be non-empty");
    ScoreTable table;
    table.source = "model";
    Rng rng(derive_seed(seed, "rasch_sim", 0));
    for (int r = 0; r < n; ++r) {
        double theta = rng.normal();
        std::array<int, kNumSymptoms> row{};
        for (int j = 0; j < kNumSymptoms; ++j) {
            double p = 1.0 / (1.0 + std::exp(-(theta - locations[static_cast<std::size_t>(j)])));
            row[static_cast<std::size_t>(j)] = rng.bernoulli(p) ? 1 : 0;
        }
        table.row_ids.push_back("r" + zero_pad(r + 1, 5));
        table.matrix.push_back(row);
    }
    refresh_totals(table);
    return table;
}

Matrix9 preset_schema_beta() {
    Matrix9 b{};
    auto set = [&](Symptom target, Symptom source, double v) {
        b[static_cast<std::size_t>(target)][static_cast<std::size_t>(source)] = v;
    };
    set(Symptom::Anhedonia, Symptom::DepressedMood, 0.50);
    set(Symptom::Anhedonia, Symptom::Fatigue, 0.20);
    set(Symptom::DepressedMood, Symptom::Anhedonia, 0.60);
    set(Symptom::DepressedMood, Symptom::WorthlessnessGuilt, 0.25);
    set(Symptom::Sleep, Symptom::Fatigue, 0.35);
    set(Symptom::Sleep, Symptom::DepressedMood, 0.20);
    set(Symptom::Fatigue, Symptom::Sleep, 0.30);
    set(Symptom::Fatigue, Symptom::Anhedonia, 0.25);
    set(Symptom::Appetite, Symptom::DepressedMood, 0.30);
    set(Symptom::Appetite, Symptom::WorthlessnessGuilt, -0.15);
    set(Symptom::WorthlessnessGuilt, Symptom::DepressedMood, 0.45);
    set(Symptom::Concentration, Symptom::Fatigue, 0.30);
    set(Symptom::Concentration, Symptom::Anhedonia, 0.20);
    set(Symptom::Psychomotor, Symptom::Fatigue, 0.35);
    set(Symptom::SuicidalIdeation, Symptom::DepressedMood, 0.40);
    set(Symptom::SuicidalIdeation, Symptom::WorthlessnessGuilt, 0.30);
    return b;
}

LinearSchemaWorld make_linear_schema_world(int n, std::uint64_t seed, double noise_sd) {
    if (n < 40) throw validation_error("linear schema world needs at least 40 rows");
    if (noise_sd < 0.0) throw validation_error("noise level must be non-negative");

    LinearSchemaWorld world;
    world.beta = preset_schema_beta();
    world.intercepts = {0.5, 0.3, 0.6, 0.4, 0.2, 0.5, 0.3, 0.6, 0.4};
    world.noise_sd = noise_sd;
    const std::array<double, kNumSymptoms> rates = {0.55, 0.80, 0.45, 0.60, 0.50,
                                                    0.55, 0.50, 0.45, 0.40};

    Rng rng(derive_seed(seed, "schema_world", 0));
    auto un = static_cast<std::size_t>(n);
    world.data.scores.assign(un, {});
    world.data.mask.assign(un, {});
    std::vector<std::array<double, kNumSymptoms>> noise(un);
    for (std::size_t r = 0; r < un; ++r) {
        for (int i = 0; i < kNumSymptoms; ++i) {
            auto ui = static_cast<std::size_t>(i);
            world.data.mask[r][ui] = rng.bernoulli(rates[ui]);
            if (world.data.mask[r][ui]) {
                world.data.scores[r][ui] = rng.uniform01() * 3.0;
            }
            noise[r][ui] = noise_sd > 0.0 ? rng.normal() * noise_sd : 0.0;
        }
    }

    // Implicit cells are a deterministic function of the explicit cells and
    // the imputation means; iterate the means to their fixed point so the
    // analyzer's design reproduces the generator's exactly.
    std::array<double, kNumSymptoms> means{};
    {
        // Start from explicit-cell means.
        std::array<double, kNumSymptoms> sums{};
        std::array<int, kNumSymptoms> counts{};
        for (std::size_t r = 0; r < un; ++r) {
            for (int i = 0; i < kNumSymptoms; ++i) {
                auto ui = static_cast<std::size_t>(i);
                if (world.data.mask[r][ui]) {
                    sums[ui] += world.data.scores[r][ui];
                    ++counts[ui];
                }
            }
        }
        for (int i = 0; i < kNumSymptoms; ++i) {
            auto ui = static_cast<std::size_t>(i);
            means[ui] = counts[ui] > 0 ? sums[ui] / counts[ui] : 1.5;
        }
    }
    for (int iter = 0; iter < 500; ++iter) {
        for (std::size_t r = 0; r < un; ++r) {
            for (int i = 0; i < kNumSymptoms; ++i) {
                auto ui = static_cast<std::size_t>(i);
                if (world.data.mask[r][ui]) continue;
                double y = world.intercepts[ui] + noise[r][ui];
                for (int j = 0; j < kNumSymptoms; ++j) {
                    if (j == i) continue;
                    auto uj = static_cast<std::size_t>(j);
                    double x = world.data.mask[r][uj] ? world.data.scores[r][uj] : means[uj];
                    y += world.beta[ui][uj] * x;
                }
                world.data.scores[r][ui] = y;
            }
        }
        std::array<double, kNumSymptoms> next{};
        for (std::size_t r = 0; r < un; ++r) {
            for (int i = 0; i < kNumSymptoms; ++i) {
                next[static_cast<std::size_t>(i)] += world.data.scores[r][static_cast<std::size_t>(i)];
            }
        }
        double shift = 0.0;
        for (int i = 0; i < kNumSymptoms; ++i) {
            auto ui = static_cast<std::size_t>(i);
            next[ui] /= static_cast<double>(n);
            shift = std::max(shift, std::abs(next[ui] - means[ui]));
            means[ui] = next[ui];
        }
        if (shift < 1e-13) break;
    }
    world.means = means;
    return world;
}

namespace {

const std::vector<std::string>& dla_vocab() {
    static const std::vector<std::string> vocab = {
        "the",  "a",    "and",  "to",     "of",    "in",    "it",    "was",   "for",  "on",
        "with", "at",   "by",   "from",   "as",    "that",  "this",  "day",   "week", "home",
        "work", "life", "time", "people", "thing", "place", "lunch", "coffee", "walk", "book"};
    return vocab;
}

constexpr int kDlaTokens = 100;
constexpr int kDlaSpanTokens = 4;
constexpr double kPlantInRate = 0.075;
constexpr double kPlantOutRate = 0.0005;

DlaWorld make_dla_world(int n, std::uint64_t seed, bool planted) {
    if (n < 1) throw validation_error("language world must be non-empty");
    DlaWorld world;
    const std::string marker = "hopeless";
    Rng rng(derive_seed(seed, planted ? "dla_planted" : "dla_null", 0));
    for (int p = 0; p < n; ++p) {
        std::vector<std::string> tokens(kDlaTokens);
        for (auto& t : tokens) t = dla_vocab()[static_cast<std::size_t>(rng.uniform_int(dla_vocab().size()))];
        if (planted) {
            for (int slot = 0; slot < kDlaTokens; ++slot) {
                double rate = slot < kDlaSpanTokens ? kPlantInRate : kPlantOutRate;
                if (rng.bernoulli(rate)) tokens[static_cast<std::size_t>(slot)] = marker;
            }
        }
        std::string essay;
        for (int t = 0; t < kDlaTokens; ++t) {
            if (t) essay += " ";
            essay += tokens[static_cast<std::size_t>(t)];
        }
        std::string span;
        for (int t = 0; t < kDlaSpanTokens; ++t) {
            if (t) span += " ";
            span += tokens[static_cast<std::size_t>(t)];
        }

        EssayRecord essay_rec;
        essay_rec.participant_id = "d" + zero_pad(p + 1, 4);
        essay_rec.essay_text = essay;
        for (auto& s : essay_rec.self_report) s = static_cast<int>(rng.uniform_int(4));

        AssessmentRecord rec;
        rec.participant_id = essay_rec.participant_id;
        int total = 0;
        for (int i = 0; i < kNumSymptoms; ++i) {
            auto& s = rec.symptoms[static_cast<std::size_t>(i)];
            s.score = static_cast<int>(rng.uniform_int(4));
            if (i == static_cast<int>(Symptom::DepressedMood)) {
                s.is_explicit = true;
                s.spans = {span};
            } else {
                s.rationale = implicit_rationales()[static_cast<std::size_t>(i)];
            }
            total += s.score;
        }
        rec.combined_score_reported = total;
        rec.category_reported = category_standard(total);
        world.corpus.push_back(std::move(essay_rec));
        world.records.push_back(std::move(rec));
    }
    if (planted) {
        world.planted_ngram = marker;
        double diff = kPlantInRate - kPlantOutRate;
        double v_in = kPlantInRate * (1.0 - kPlantInRate) / kDlaSpanTokens;
        double v_out = kPlantOutRate * (1.0 - kPlantOutRate) / (kDlaTokens - kDlaSpanTokens);
        world.true_d = diff / std::sqrt(0.5 * (v_in + v_out));
        double e_in = kPlantInRate * kDlaSpanTokens;
        double e_all = e_in + kPlantOutRate * (kDlaTokens - kDlaSpanTokens);
        double p_in_frac = static_cast<double>(kDlaSpanTokens) / kDlaTokens;
        world.true_pmi = std::log2((e_in / e_all) / p_in_frac);
    }
    return world;
}

} // namespace

DlaWorld make_dla_null_world(int n, std::uint64_t seed) { return make_dla_world(n, seed, false); }

DlaWorld make_dla_planted_world(int n, std::uint64_t seed) { return make_dla_world(n, seed, true); }

} // namespace symscope
