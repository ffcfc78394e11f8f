#include "symscope/schema.hpp"

#include "symscope/csvio.hpp"
#include "symscope/errors.hpp"
#include "symscope/rng.hpp"
#include "symscope/stats.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace symscope {

namespace {

// Predictor indices for a target: the other eight symptoms, ascending.
std::vector<int> predictors_of(int target) {
    std::vector<int> out;
    for (int j = 0; j < kNumSymptoms; ++j) {
        if (j != target) out.push_back(j);
    }
    return out;
}

// Design matrix over the given rows; intercept column first when enabled.
Eigen::MatrixXd build_design(const SchemaData& data, const std::vector<std::size_t>& rows,
                             const std::vector<int>& preds,
                             const std::array<double, kNumSymptoms>& means, bool intercept) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(preds.size()) + (intercept ? 1 : 0);
    Eigen::MatrixXd design(n, p);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::Index c = 0;
        if (intercept) design(r, c++) = 1.0;
        const std::size_t row = rows[static_cast<std::size_t>(r)];
        for (int j : preds) {
            auto sj = static_cast<std::size_t>(j);
            design(r, c++) = data.mask[row][sj] ? data.scores[row][sj] : means[sj];
        }
    }
    return design;
}

// Names the offending predictors when the design loses rank: constant
// columns first, then exactly collinear pairs, then a generic rank report.
std::string collinear_diagnosis(const Eigen::MatrixXd& design, const std::vector<int>& preds,
                                bool intercept, Eigen::Index rank) {
    const Eigen::Index first = intercept ? 1 : 0;
    std::string names;
    for (Eigen::Index c = first; c < design.cols(); ++c) {
        Eigen::VectorXd col = design.col(c);
        if ((col.array() - col(0)).abs().maxCoeff() < 1e-12) {
            if (!names.empty()) names += ", ";
            names += symptom_names()[static_cast<std::size_t>(
                preds[static_cast<std::size_t>(c - first)])];
        }
    }
    if (!names.empty()) return "constant predictor column(s): " + names;
    for (Eigen::Index a = first; a < design.cols(); ++a) {
        for (Eigen::Index b = a + 1; b < design.cols(); ++b) {
            Eigen::VectorXd ca = design.col(a).array() - design.col(a).mean();
            Eigen::VectorXd cb = design.col(b).array() - design.col(b).mean();
            double na = ca.norm(), nb = cb.norm();
            if (na < 1e-12 || nb < 1e-12) continue;
            double r = ca.dot(cb) / (na * nb);
            if (std::abs(r) > 1.0 - 1e-10) {
                return std::string("collinear predictors: ") +
                       symptom_names()[static_cast<std::size_t>(preds[static_cast<std::size_t>(a - first)])] +
                       " and " +
                       symptom_names()[static_cast<std::size_t>(preds[static_cast<std::size_t>(b - first)])];
            }
        }
    }
    return "design matrix rank " + std::to_string(rank) + " < " + std::to_string(design.cols());
}

struct OlsSolution {
    bool ok = false;
    Eigen::VectorXd coef;
    Eigen::Index rank = 0;
};

OlsSolution solve_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
    OlsSolution out;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    out.rank = qr.rank();
    if (out.rank < design.cols()) return out;
    out.coef = qr.solve(y);
    out.ok = true;
    return out;
}

} // namespace

SchemaData to_schema_data(const ScoreTable& table) {
    if (!table.has_mask()) {
        throw validation_error("schema inference needs a table with an explicitness mask");
    }
    SchemaData data;
    data.scores.reserve(table.rows());
    for (const auto& row : table.matrix) {
        std::array<double, kNumSymptoms> real{};
        for (int j = 0; j < kNumSymptoms; ++j) {
            real[static_cast<std::size_t>(j)] = static_cast<double>(row[static_cast<std::size_t>(j)]);
        }
        data.scores.push_back(real);
    }
    data.mask = table.explicit_mask;
    return data;
}

std::vector<SchemaEstimate> fit_schema(const ScoreTable& table, const SchemaOptions& opts) {
    return fit_schema(to_schema_data(table), opts);
}

std::vector<SchemaEstimate> fit_schema(const SchemaData& data, const SchemaOptions& opts) {
    const std::size_t n = data.scores.size();
    if (n == 0 || data.mask.size() != n) {
        throw validation_error("schema data empty or mask misaligned");
    }
    if (opts.trials < 50) throw validation_error("schema CIs need at least 50 trials");

    // Imputation value: mean of the full column, explicit and implicit rows
    // alike.
    std::array<double, kNumSymptoms> means{};
    for (const auto& row : data.scores) {
        for (int j = 0; j < kNumSymptoms; ++j) means[static_cast<std::size_t>(j)] += row[static_cast<std::size_t>(j)];
    }
    for (auto& m : means) m /= static_cast<double>(n);

    std::vector<SchemaEstimate> estimates;
    for (int target = 0; target < kNumSymptoms; ++target) {
        SchemaEstimate est;
        est.target = target;
        est.imputation_means = means;

        std::vector<std::size_t> rows;
        for (std::size_t r = 0; r < n; ++r) {
            if (!data.mask[r][static_cast<std::size_t>(target)]) rows.push_back(r);
        }
        est.n_rows = static_cast<int>(rows.size());
        if (est.n_rows < opts.min_implicit_rows) {
            est.skipped = true;
            est.skip_reason = "only " + std::to_string(est.n_rows) + " implicit rows (need " +
                              std::to_string(opts.min_implicit_rows) + ")";
            estimates.push_back(std::move(est));
            continue;
        }

        auto preds = predictors_of(target);
        Eigen::MatrixXd design = build_design(data, rows, preds, means, opts.intercept);
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            y(static_cast<Eigen::Index>(r)) = data.scores[rows[r]][static_cast<std::size_t>(target)];
        }

        auto point = solve_ols(design, y);
        if (!point.ok) {
            throw numeric_error("target '" + symptom_names()[static_cast<std::size_t>(target)] +
                                "': " + collinear_diagnosis(design, preds, opts.intercept, point.rank));
        }
        const int base = opts.intercept ? 1 : 0;
        if (opts.intercept) est.intercept = point.coef(0);
        for (std::size_t k = 0; k < preds.size(); ++k) {
            est.beta[static_cast<std::size_t>(preds[k])] = point.coef(static_cast<Eigen::Index>(k) + base);
        }

        // Percentile CIs from resamples of the implicit-row set.
        std::array<std::vector<double>, kNumSymptoms> samples;
        for (int j : preds) samples[static_cast<std::size_t>(j)].reserve(static_cast<std::size_t>(opts.trials));
        std::vector<std::size_t> draw(rows.size());
        const std::string label = "schema:" + symptom_keys()[static_cast<std::size_t>(target)];
        for (int trial = 0; trial < opts.trials; ++trial) {
            Rng rng(derive_seed(opts.seed, label, static_cast<std::uint64_t>(trial)));
            int attempts = 0;
            while (true) {
                for (auto& d : draw) d = rows[rng.uniform_int(rows.size())];
                Eigen::MatrixXd bx = build_design(data, draw, preds, means, opts.intercept);
                Eigen::VectorXd by(static_cast<Eigen::Index>(draw.size()));
                for (std::size_t r = 0; r < draw.size(); ++r) {
                    by(static_cast<Eigen::Index>(r)) = data.scores[draw[r]][static_cast<std::size_t>(target)];
                }
                auto sol = solve_ols(bx, by);
                if (sol.ok) {
                    for (std::size_t k = 0; k < preds.size(); ++k) {
                        samples[static_cast<std::size_t>(preds[k])].push_back(
                            sol.coef(static_cast<Eigen::Index>(k) + base));
                    }
                    break;
                }
                if (++attempts > 200) {
                    throw numeric_error("target '" + symptom_names()[static_cast<std::size_t>(target)] +
                                        "': bootstrap cannot draw a full-rank resample");
                }
            }
        }
        for (int j : preds) {
            auto sj = static_cast<std::size_t>(j);
            Ci ci = percentile_ci(samples[sj], opts.level);
            est.ci_low[sj] = ci.low;
            est.ci_high[sj] = ci.high;
            est.significant[sj] = ci.excludes_zero();
        }
        estimates.push_back(std::move(est));
    }
    return estimates;
}

std::vector<SchemaEdge> schema_graph(const std::vector<SchemaEstimate>& estimates) {
    std::vector<SchemaEdge> edges;
    for (const auto& est : estimates) {
        if (est.skipped) continue;
        for (int j = 0; j < kNumSymptoms; ++j) {
            if (j == est.target) continue;
            auto sj = static_cast<std::size_t>(j);
            if (!est.significant[sj]) continue;
            SchemaEdge edge;
            edge.source = j;
            edge.target = est.target;
            edge.beta = est.beta[sj];
            edge.ci_low = est.ci_low[sj];
            edge.ci_high = est.ci_high[sj];
            edge.negative = est.beta[sj] < 0.0;
            edges.push_back(edge);
        }
    }
    return edges;
}

void write_schema_csvs(const std::vector<SchemaEstimate>& estimates, const std::string& edges_path,
                       const std::string& full_path) {
    {
        CsvWriter csv(edges_path);
        csv.write_row({"source", "target", "beta", "ci_low", "ci_high", "significant", "negative"});
        for (const auto& edge : schema_graph(estimates)) {
            csv.write_row({symptom_keys()[static_cast<std::size_t>(edge.source)],
                           symptom_keys()[static_cast<std::size_t>(edge.target)], fmt_double(edge.beta),
                           fmt_double(edge.ci_low), fmt_double(edge.ci_high), "1",
                           edge.negative ? "1" : "0"});
        }
        csv.close();
    }
    {
        CsvWriter csv(full_path);
        csv.write_row({"target", "predictor", "beta", "ci_low", "ci_high", "significant", "n_rows",
                       "intercept", "skipped", "skip_reason"});
        for (const auto& est : estimates) {
            const auto& target_key = symptom_keys()[static_cast<std::size_t>(est.target)];
            if (est.skipped) {
                csv.write_row({target_key, "", "", "", "", "", std::to_string(est.n_rows), "", "1",
                               est.skip_reason});
                continue;
            }
            for (int j = 0; j < kNumSymptoms; ++j) {
                if (j == est.target) continue;
                auto sj = static_cast<std::size_t>(j);
                csv.write_row({target_key, symptom_keys()[sj], fmt_double(est.beta[sj]),
                               fmt_double(est.ci_low[sj]), fmt_double(est.ci_high[sj]),
                               est.significant[sj] ? "1" : "0", std::to_string(est.n_rows),
                               fmt_double(est.intercept), "0", ""});
            }
        }
        csv.close();
    }
}

} // namespace symscope
