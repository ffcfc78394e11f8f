#include "symscope/rasch.hpp"

#include "symscope/csvio.hpp"
#include "symscope/errors.hpp"
#include "symscope/rng.hpp"
#include "symscope/stats.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace symscope {

namespace {

constexpr int kQuadNodes = 21;
constexpr int kMaxIterations = 500;
constexpr double kGradTol = 1e-6;

// Nodes/weights for E[f(theta)] with theta ~ N(0,1), from the Hermite
// Jacobi matrix (Golub-Welsch). Weights sum to 1.
void gauss_hermite_normal(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        double beta = std::sqrt(static_cast<double>(i) / 2.0);
        jacobi(i, i - 1) = beta;
        jacobi(i - 1, i) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    nodes.resize(static_cast<std::size_t>(n));
    weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i) * std::sqrt(2.0);
        double v0 = solver.eigenvectors()(0, i);
        weights[static_cast<std::size_t>(i)] = v0 * v0;
    }
}

double log_sigmoid(double z) { return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

// Binary response patterns with multiplicities; the E-step cost then
// scales with distinct patterns, not with N.
struct PatternCounts {
    std::vector<std::uint16_t> patterns;
    std::vector<int> counts;
    int n = 0;
};

PatternCounts count_patterns(const std::vector<std::uint16_t>& rows) {
    std::array<int, 1 << kNumSymptoms> table{};
    for (std::uint16_t r : rows) ++table[r];
    PatternCounts pc;
    pc.n = static_cast<int>(rows.size());
    for (int p = 0; p < (1 << kNumSymptoms); ++p) {
        if (table[static_cast<std::size_t>(p)] > 0) {
            pc.patterns.push_back(static_cast<std::uint16_t>(p));
            pc.counts.push_back(table[static_cast<std::size_t>(p)]);
        }
    }
    return pc;
}

void check_items_mixed(const PatternCounts& pc, const std::string& context) {
    std::array<int, kNumSymptoms> endorsed{};
    for (std::size_t i = 0; i < pc.patterns.size(); ++i) {
        for (int j = 0; j < kNumSymptoms; ++j) {
            if (pc.patterns[i] & (1u << j)) endorsed[static_cast<std::size_t>(j)] += pc.counts[i];
        }
    }
    for (int j = 0; j < kNumSymptoms; ++j) {
        int e = endorsed[static_cast<std::size_t>(j)];
        if (e == 0 || e == pc.n) {
            throw numeric_error("item '" + symptom_names()[static_cast<std::size_t>(j)] + "' is all-" +
                                (e == 0 ? "0" : "1") + " after dichotomization (" + context + ")");
        }
    }
}

struct EStep {
    double ll = 0.0;
    std::array<double, kQuadNodes> n_k{};                          // expected examinees per node
    std::array<std::array<double, kQuadNodes>, kNumSymptoms> r{};  // expected endorsements
};

EStep e_step(const PatternCounts& pc, const std::vector<double>& nodes, const std::vector<double>& weights,
             const std::array<double, kNumSymptoms>& b) {
    std::array<std::array<double, kQuadNodes>, kNumSymptoms> log_p, log_q;
    for (int j = 0; j < kNumSymptoms; ++j) {
        for (int k = 0; k < kQuadNodes; ++k) {
            double z = nodes[static_cast<std::size_t>(k)] - b[static_cast<std::size_t>(j)];
            log_p[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = log_sigmoid(z);
            log_q[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = log_sigmoid(-z);
        }
    }
    EStep out;
    std::array<double, kQuadNodes> log_joint;
    for (std::size_t i = 0; i < pc.patterns.size(); ++i) {
        const std::uint16_t y = pc.patterns[i];
        const double count = pc.counts[i];
        double max_log = -1e300;
        for (int k = 0; k < kQuadNodes; ++k) {
            double acc = std::log(weights[static_cast<std::size_t>(k)]);
            for (int j = 0; j < kNumSymptoms; ++j) {
                acc += (y & (1u << j)) ? log_p[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]
                                       : log_q[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
            }
            log_joint[static_cast<std::size_t>(k)] = acc;
            max_log = std::max(max_log, acc);
        }
        double denom = 0.0;
        for (int k = 0; k < kQuadNodes; ++k) {
            log_joint[static_cast<std::size_t>(k)] = std::exp(log_joint[static_cast<std::size_t>(k)] - max_log);
            denom += log_joint[static_cast<std::size_t>(k)];
        }
        out.ll += count * (max_log + std::log(denom));
        for (int k = 0; k < kQuadNodes; ++k) {
            double post = count * log_joint[static_cast<std::size_t>(k)] / denom;
            out.n_k[static_cast<std::size_t>(k)] += post;
            if (post == 0.0) continue;
            for (int j = 0; j < kNumSymptoms; ++j) {
                if (y & (1u << j)) out.r[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] += post;
            }
        }
    }
    return out;
}

// Gradient of the marginal log-likelihood at b given converged posteriors
// (Fisher's identity: equals the expected complete-data gradient).
double grad_norm_at(const EStep& e, const std::vector<double>& nodes,
                    const std::array<double, kNumSymptoms>& b) {
    double norm2 = 0.0;
    for (int j = 0; j < kNumSymptoms; ++j) {
        double g = 0.0;
        for (int k = 0; k < kQuadNodes; ++k) {
            double sigma = 1.0 / (1.0 + std::exp(-(nodes[static_cast<std::size_t>(k)] -
                                                   b[static_cast<std::size_t>(j)])));
            g += e.n_k[static_cast<std::size_t>(k)] * sigma -
                 e.r[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        }
        norm2 += g * g;
    }
    return std::sqrt(norm2);
}

struct MmlFit {
    std::array<double, kNumSymptoms> b{};
    int iterations = 0;
    double ll = 0.0;
    double grad_norm = 0.0;
    std::vector<double> ll_trace;
};

MmlFit mml_fit(const PatternCounts& pc, const std::vector<double>& nodes,
               const std::vector<double>& weights, const std::array<double, kNumSymptoms>* warm_start) {
    MmlFit fit;
    if (warm_start != nullptr) {
        fit.b = *warm_start;
    } else {
        // Start from the endorsement rates: theta - logistic noise has
        // standard deviation sqrt(1 + pi^2/3).
        std::array<double, kNumSymptoms> endorsed{};
        for (std::size_t i = 0; i < pc.patterns.size(); ++i) {
            for (int j = 0; j < kNumSymptoms; ++j) {
                if (pc.patterns[i] & (1u << j)) endorsed[static_cast<std::size_t>(j)] += pc.counts[i];
            }
        }
        const double spread = std::sqrt(1.0 + M_PI * M_PI / 3.0);
        for (int j = 0; j < kNumSymptoms; ++j) {
            double p = endorsed[static_cast<std::size_t>(j)] / static_cast<double>(pc.n);
            fit.b[static_cast<std::size_t>(j)] = -spread * normal_quantile(p);
        }
    }

    EStep e = e_step(pc, nodes, weights, fit.b);
    fit.ll_trace.push_back(e.ll);
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        // Newton update per item on the expected complete-data likelihood:
        // b_new = b + sum_k(n_k sigma_k - r_jk) / sum_k n_k sigma_k (1 - sigma_k)
        std::array<double, kNumSymptoms> delta{};
        for (int j = 0; j < kNumSymptoms; ++j) {
            double g = 0.0, h = 0.0;
            for (int k = 0; k < kQuadNodes; ++k) {
                double sigma = 1.0 / (1.0 + std::exp(-(nodes[static_cast<std::size_t>(k)] -
                                                       fit.b[static_cast<std::size_t>(j)])));
                g += e.n_k[static_cast<std::size_t>(k)] * sigma -
                     e.r[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
                h += e.n_k[static_cast<std::size_t>(k)] * sigma * (1.0 - sigma);
            }
            double d = h > 0.0 ? g / h : 0.0;
            delta[static_cast<std::size_t>(j)] = std::clamp(d, -2.0, 2.0);
        }

        // Step-halve until the marginal likelihood does not decrease, so
        // the ll trace ascends monotonically.
        double step = 1.0;
        std::array<double, kNumSymptoms> b_try;
        EStep e_try;
        while (true) {
            for (int j = 0; j < kNumSymptoms; ++j) {
                b_try[static_cast<std::size_t>(j)] =
                    fit.b[static_cast<std::size_t>(j)] + step * delta[static_cast<std::size_t>(j)];
            }
            e_try = e_step(pc, nodes, weights, b_try);
            if (e_try.ll >= e.ll - 1e-12) break;
            step /= 2.0;
            if (step < 1e-6) break;
        }

        fit.b = b_try;
        e = e_try;
        fit.ll_trace.push_back(e.ll);
        fit.iterations = iter + 1;
        fit.grad_norm = grad_norm_at(e, nodes, fit.b);
        if (fit.grad_norm < kGradTol) break;
    }

    fit.ll = e.ll;
    if (fit.grad_norm >= kGradTol) {
        throw numeric_error("latent-trait fit did not converge: " + std::to_string(fit.iterations) +
                            " iterations, gradient norm " + fmt_double(fit.grad_norm, 9));
    }
    return fit;
}

std::vector<std::uint16_t> dichotomize(const ScoreTable& t, const DichotomizeRule& rule) {
    std::vector<std::uint16_t> rows;
    rows.reserve(t.rows());
    for (const auto& row : t.matrix) {
        std::uint16_t bits = 0;
        for (int j = 0; j < kNumSymptoms; ++j) {
            if (row[static_cast<std::size_t>(j)] >= rule.threshold) bits |= (1u << j);
        }
        rows.push_back(bits);
    }
    return rows;
}

} // namespace

std::array<int, kNumSymptoms> ranks_from_locations(const std::array<double, kNumSymptoms>& locations) {
    std::array<int, kNumSymptoms> order{};
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (locations[static_cast<std::size_t>(a)] != locations[static_cast<std::size_t>(b)]) {
            return locations[static_cast<std::size_t>(a)] < locations[static_cast<std::size_t>(b)];
        }
        return a < b;
    });
    std::array<int, kNumSymptoms> ranks{};
    for (int pos = 0; pos < kNumSymptoms; ++pos) {
        ranks[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = pos + 1;
    }
    return ranks;
}

RaschFit fit_rasch(const ScoreTable& t, DichotomizeRule rule) {
    if (t.rows() < 10) throw validation_error("latent-trait fit needs at least 10 rows");
    auto rows = dichotomize(t, rule);
    auto pc = count_patterns(rows);
    check_items_mixed(pc, "source " + t.source);

    RaschFit out;
    gauss_hermite_normal(kQuadNodes, out.latent_nodes, out.latent_weights);
    auto fit = mml_fit(pc, out.latent_nodes, out.latent_weights, nullptr);
    out.locations = fit.b;
    out.ranks = ranks_from_locations(fit.b);
    out.dichotomization = rule.tag();
    out.iterations = fit.iterations;
    out.log_likelihood = fit.ll;
    out.final_grad_norm = fit.grad_norm;
    out.ll_trace = std::move(fit.ll_trace);
    return out;
}

DifRanks dif_ranks(const ScoreTable& a, const ScoreTable& b, DichotomizeRule rule, int trials,
                   double level, std::uint64_t seed) {
    if (a.rows() != b.rows() || a.row_ids != b.row_ids) {
        throw validation_error("location-rank comparison needs row-aligned tables");
    }
    if (trials < 50) throw validation_error("rank CIs need at least 50 trials");

    std::vector<double> nodes, weights;
    gauss_hermite_normal(kQuadNodes, nodes, weights);

    auto rows_a = dichotomize(a, rule);
    auto rows_b = dichotomize(b, rule);
    auto pc_a = count_patterns(rows_a);
    auto pc_b = count_patterns(rows_b);
    check_items_mixed(pc_a, "source " + a.source);
    check_items_mixed(pc_b, "source " + b.source);

    auto point_a = mml_fit(pc_a, nodes, weights, nullptr);
    auto point_b = mml_fit(pc_b, nodes, weights, nullptr);

    DifRanks out;
    out.trials = trials;
    out.level = level;
    out.seed = seed;
    out.loc_a = point_a.b;
    out.loc_b = point_b.b;
    out.rank_a = ranks_from_locations(point_a.b);
    out.rank_b = ranks_from_locations(point_b.b);
    for (int j = 0; j < kNumSymptoms; ++j) {
        out.rank_diff[static_cast<std::size_t>(j)] =
            out.rank_a[static_cast<std::size_t>(j)] - out.rank_b[static_cast<std::size_t>(j)];
    }

    const std::size_t n = rows_a.size();
    std::array<std::vector<double>, kNumSymptoms> samples_a, samples_b, samples_diff;
    for (int j = 0; j < kNumSymptoms; ++j) {
        samples_a[static_cast<std::size_t>(j)].reserve(static_cast<std::size_t>(trials));
        samples_b[static_cast<std::size_t>(j)].reserve(static_cast<std::size_t>(trials));
        samples_diff[static_cast<std::size_t>(j)].reserve(static_cast<std::size_t>(trials));
    }

    std::vector<std::uint16_t> draw_a(n), draw_b(n);
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, "dif_ranks", static_cast<std::uint64_t>(trial)));
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t k = rng.uniform_int(n);  // paired: same individuals in both sources
            draw_a[i] = rows_a[k];
            draw_b[i] = rows_b[k];
        }
        try {
            auto fa = mml_fit(count_patterns(draw_a), nodes, weights, &point_a.b);
            auto fb = mml_fit(count_patterns(draw_b), nodes, weights, &point_b.b);
            auto ra = ranks_from_locations(fa.b);
            auto rb = ranks_from_locations(fb.b);
            for (int j = 0; j < kNumSymptoms; ++j) {
                auto sj = static_cast<std::size_t>(j);
                samples_a[sj].push_back(static_cast<double>(ra[sj]));
                samples_b[sj].push_back(static_cast<double>(rb[sj]));
                samples_diff[sj].push_back(static_cast<double>(ra[sj] - rb[sj]));
            }
        } catch (const Error&) {
            ++out.failed_trials;
            if (out.failed_trials * 10 > trials) {
                throw numeric_error("more than 10% of bootstrap refits failed (" +
                                    std::to_string(out.failed_trials) + "/" + std::to_string(trial + 1) +
                                    ")");
            }
        }
    }

    // Rank CIs are reported on the integer scale: percentile endpoints are
    // rounded outward.
    for (int j = 0; j < kNumSymptoms; ++j) {
        auto sj = static_cast<std::size_t>(j);
        Ci ca = percentile_ci(samples_a[sj], level);
        Ci cb = percentile_ci(samples_b[sj], level);
        Ci cd = percentile_ci(samples_diff[sj], level);
        out.a_ci_low[sj] = std::floor(ca.low);
        out.a_ci_high[sj] = std::ceil(ca.high);
        out.b_ci_low[sj] = std::floor(cb.low);
        out.b_ci_high[sj] = std::ceil(cb.high);
        out.diff_ci_low[sj] = std::floor(cd.low);
        out.diff_ci_high[sj] = std::ceil(cd.high);
        out.diff_significant[sj] = out.diff_ci_low[sj] > 0.0 || out.diff_ci_high[sj] < 0.0;
    }
    return out;
}

void write_rasch_csv(const DifRanks& result, const std::string& source_a, const std::string& source_b,
                     const std::string& path) {
    CsvWriter csv(path);
    csv.write_row({"item", "source_a", "loc_a", "rank_a", "rank_a_ci_low", "rank_a_ci_high", "source_b",
                   "loc_b", "rank_b", "rank_b_ci_low", "rank_b_ci_high", "rank_diff", "diff_ci_low",
                   "diff_ci_high", "significant"});
    for (int j = 0; j < kNumSymptoms; ++j) {
        auto sj = static_cast<std::size_t>(j);
        csv.write_row({symptom_keys()[sj], source_a, fmt_double(result.loc_a[sj]),
                       std::to_string(result.rank_a[sj]), fmt_double(result.a_ci_low[sj], 0),
                       fmt_double(result.a_ci_high[sj], 0), source_b, fmt_double(result.loc_b[sj]),
                       std::to_string(result.rank_b[sj]), fmt_double(result.b_ci_low[sj], 0),
                       fmt_double(result.b_ci_high[sj], 0), std::to_string(result.rank_diff[sj]),
                       fmt_double(result.diff_ci_low[sj], 0), fmt_double(result.diff_ci_high[sj], 0),
                       result.diff_significant[sj] ? "1" : "0"});
    }
    csv.close();
}

} // namespace symscope
