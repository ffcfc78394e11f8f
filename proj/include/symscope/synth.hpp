#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "symscope/assessor.hpp"
#include "symscope/corpus.hpp"
#include "symscope/normalizer.hpp"
#include "symscope/psychometrics.hpp"
#include "symscope/schema.hpp"
#include "symscope/scoretable.hpp"

#include <nlohmann/json.hpp>

namespace symscope {

using Marginal = std::array<double, 4>;
using MarginalSet = std::array<Marginal, kNumSymptoms>;

// Gaussian-copula machinery. Scores are latent normals cut at fixed
// thresholds, so every ordinal moment below has a closed form in terms of
// bivariate normal orthant masses.
std::array<double, 3> thresholds_from_marginal(const Marginal& probs);
double ordinal_mean(const std::array<double, 3>& t);
double ordinal_variance(const std::array<double, 3>& t);
double ordinal_covariance(const std::array<double, 3>& ta, const std::array<double, 3>& tb,
                          double latent_r);
double analytic_ordinal_correlation(const Marginal& a, const Marginal& b, double latent_r);
// Inverts analytic_ordinal_correlation over latent_r (monotone) by bisection.
double latent_r_for_ordinal_r(const Marginal& a, const Marginal& b, double target_ordinal_r);
Matrix9 analytic_ordinal_matrix(const MarginalSet& marginals, const Matrix9& latent);

// Symmetric PSD square root via eigendecomposition; eigenvalues below
// -1e-10 are rejected, small negatives clamped to zero.
Matrix9 matrix_sqrt_psd(const Matrix9& m, const std::string& what);

struct WorldSpec {
    int n = 955;
    std::uint64_t seed = 7;
    std::string model_id = "mock-appraiser-1";
    Matrix9 self_latent{};
    Matrix9 model_latent{};
    double cross_rho = 0.78;
    MarginalSet self_marginals{};
    MarginalSet model_marginals{};
    std::array<double, kNumSymptoms> explicit_rates{};
    // Reply corruptions, as fractions of records; counts are rounded and
    // assigned to fixed record subsets so the manifest can state them exactly.
    double rate_alias = 0.02;
    double rate_aspect = 0.02;
    double rate_merged = 0.015;
    double rate_prose = 0.015;
    double rate_non_phq9 = 0.01;
    double rate_unbalanced = 0.01;
    double rate_fabricated_span = 0.02;
    int expert_raters = 2;
    int expert_subsample = 209;
};

struct World {
    WorldSpec spec;
    std::vector<EssayRecord> corpus;
    // Ground-truth model-channel records, pre-corruption.
    std::vector<AssessmentRecord> truth;
    // participant_id -> corrupted raw reply text.
    std::map<std::string, std::string> replies;
    nlohmann::json manifest;
};

World generate_world(const WorldSpec& spec);
// Writes corpus.jsonl, experts.csv, replies.jsonl, manifest.json under dir.
void write_world(const World& world, const std::string& dir);
std::map<std::string, std::string> load_replies(const std::string& path);

// Chat-completion stand-in: replies are keyed by the essay embedded in the
// request prompt. Scripted failures are consumed before any success.
class MockTransport : public Transport {
  public:
    explicit MockTransport(const World& world);
    MockTransport(std::map<std::string, std::string> replies_by_essay);
    void push_failure(int status, const std::string& body = "");
    TransportReply send(const std::string& endpoint, const std::string& request_body) override;
    int calls() const { return calls_; }

  private:
    std::map<std::string, std::string> by_essay_;
    std::vector<std::pair<int, std::string>> failure_queue_;
    int calls_ = 0;
};

// Paper-shaped presets.
Matrix9 preset_latent_corr();
MarginalSet preset_self_marginals();
MarginalSet preset_model_marginals();
std::array<double, kNumSymptoms> preset_explicit_rates();
WorldSpec preset_paper_world(int n = 955, std::uint64_t seed = 7);
// Channel coupling frozen so the preset's analytic total-score correlation
// lands on 0.70; a test re-derives it.
double preset_cross_rho();

// Two aligned score tables whose analytic ordinal matrices are equal except
// one planted cell, for difference-matrix power checks.
struct MatrixPairSpec {
    Matrix9 latent_base{};
    MarginalSet marginals{};
    int bump_i = 7;
    int bump_j = 8;
    double ordinal_delta = 0.30;
    double cross_rho = 0.75;
};
struct MatrixPairWorld {
    ScoreTable a;
    ScoreTable b;
    Matrix9 ordinal_a{};
    Matrix9 ordinal_b{};
};
MatrixPairSpec preset_matrix_pair_spec();
MatrixPairWorld make_matrix_pair_world(const MatrixPairSpec& spec, int n, std::uint64_t seed);

// Dichotomous responses from known item locations under the 1-PL model.
ScoreTable simulate_rasch(const std::array<double, kNumSymptoms>& locations, int n,
                          std::uint64_t seed);

// Linear world whose imputation fixed point makes the analyzer's design
// matrix identical to the generator's, so noiseless recovery is exact.
struct LinearSchemaWorld {
    SchemaData data;
    Matrix9 beta{};
    std::array<double, kNumSymptoms> intercepts{};
    std::array<double, kNumSymptoms> means{};
    double noise_sd = 0.0;
};
Matrix9 preset_schema_beta();
LinearSchemaWorld make_linear_schema_world(int n, std::uint64_t seed, double noise_sd);

// Token-level worlds for the language-analysis gates.
struct DlaWorld {
    std::vector<EssayRecord> corpus;
    std::vector<AssessmentRecord> records;
    std::string planted_ngram;
    double true_d = 0.0;
    double true_pmi = 0.0;
};
DlaWorld make_dla_null_world(int n, std::uint64_t seed);
DlaWorld make_dla_planted_world(int n, std::uint64_t seed);

} // namespace symscope
