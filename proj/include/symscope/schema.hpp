#pragma once

#include "symscope/scoretable.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace symscope {

// Scores as reals plus the explicitness mask; the entry point for fitting.
// Integer tables convert losslessly.
struct SchemaData {
    std::vector<std::array<double, kNumSymptoms>> scores;
    std::vector<std::array<bool, kNumSymptoms>> mask;  // true = explicit
};

SchemaData to_schema_data(const ScoreTable& table);

struct SchemaOptions {
    int trials = 500;
    double level = 0.90;
    std::uint64_t seed = 0;
    bool intercept = true;
    int min_implicit_rows = 30;
};

// Regression of one target symptom's implicit scores on the other eight.
// beta[target] is unused and zero.
struct SchemaEstimate {
    int target = 0;
    bool skipped = false;
    std::string skip_reason;
    int n_rows = 0;  // implicit rows used
    double intercept = 0.0;
    std::array<double, kNumSymptoms> beta{};
    std::array<double, kNumSymptoms> ci_low{};
    std::array<double, kNumSymptoms> ci_high{};
    std::array<bool, kNumSymptoms> significant{};       // CI excludes 0
    std::array<double, kNumSymptoms> imputation_means{};  // full-column means
};

// For each target: restrict to rows where the target is implicit, build
// predictors from explicit scores (column mean imputed where implicit),
// solve least squares, and bootstrap percentile CIs over the implicit-row
// set. Targets with too few implicit rows are skipped with a reason.
std::vector<SchemaEstimate> fit_schema(const SchemaData& data, const SchemaOptions& opts = {});
std::vector<SchemaEstimate> fit_schema(const ScoreTable& table, const SchemaOptions& opts = {});

struct SchemaEdge {
    int source = 0;  // predictor symptom
    int target = 0;
    double beta = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool negative = false;
};

// Significant coefficients as a directed weighted edge list.
std::vector<SchemaEdge> schema_graph(const std::vector<SchemaEstimate>& estimates);

void write_schema_csvs(const std::vector<SchemaEstimate>& estimates, const std::string& edges_path,
                       const std::string& full_path);

} // namespace symscope
