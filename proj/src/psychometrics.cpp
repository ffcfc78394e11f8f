#include "symscope/psychometrics.hpp"

#include "symscope/csvio.hpp"
#include "symscope/errors.hpp"
#include "symscope/rng.hpp"

#include <cmath>

namespace symscope {

namespace {

void require_aligned(const ScoreTable& a, const ScoreTable& b) {
    if (a.rows() != b.rows() || a.row_ids != b.row_ids) {
        throw validation_error("tables '" + a.source + "' and '" + b.source +
                               "' are not row-aligned; align_rows them first");
    }
    if (a.rows() < 3) throw validation_error("need at least 3 aligned rows");
}

// Correlation matrix of a resampled table; false when any selected column
// is constant (the caller redraws).
bool matrix_of_resample(const ScoreTable& t, const std::vector<std::size_t>& idx, Matrix9& out) {
    std::array<std::vector<double>, kNumSymptoms> cols;
    for (int j = 0; j < kNumSymptoms; ++j) {
        auto& col = cols[static_cast<std::size_t>(j)];
        col.reserve(idx.size());
        for (std::size_t r : idx) col.push_back(static_cast<double>(t.matrix[r][static_cast<std::size_t>(j)]));
        double first = col[0];
        bool constant = true;
        for (double v : col) {
            if (v != first) {
                constant = false;
                break;
            }
        }
        if (constant) return false;
    }
    for (int j = 0; j < kNumSymptoms; ++j) {
        out[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] = 1.0;
        for (int l = j + 1; l < kNumSymptoms; ++l) {
            double r = pearson(cols[static_cast<std::size_t>(j)], cols[static_cast<std::size_t>(l)]);
            out[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)] = r;
            out[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] = r;
        }
    }
    return true;
}

} // namespace

ValidityResult convergent_validity(const ScoreTable& a, const ScoreTable& b) {
    require_aligned(a, b);
    ValidityResult out{};
    for (int j = 0; j < kNumSymptoms; ++j) {
        auto sj = static_cast<std::size_t>(j);
        try {
            out.item_r[sj] = pearson(a.column(j), b.column(j));
            out.item_defined[sj] = true;
        } catch (const Error& e) {
            out.item_r[sj] = std::nan("");
            out.item_defined[sj] = false;
            out.item_note[sj] = e.what();
        }
    }
    out.total_r = pearson(a.totals_real(), b.totals_real());
    return out;
}

IntersymptomResult intersymptom_matrix(const ScoreTable& t) {
    if (t.rows() < 3) throw validation_error("inter-symptom matrix needs at least 3 rows");
    IntersymptomResult out{};
    for (int j = 0; j < kNumSymptoms; ++j) {
        out.r[static_cast<std::size_t>(j)][static_cast<std::size_t>(j)] = 1.0;
        for (int l = j + 1; l < kNumSymptoms; ++l) {
            double r = pearson(t.column(j), t.column(l));
            out.r[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)] = r;
            out.r[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] = r;
        }
    }
    for (int j = 0; j < kNumSymptoms; ++j) {
        double sum = 0.0;
        for (int l = 0; l < kNumSymptoms; ++l) {
            if (l != j) sum += out.r[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)];
        }
        out.mean_offdiag[static_cast<std::size_t>(j)] = sum / (kNumSymptoms - 1);
    }
    return out;
}

MatrixDiffResult matrix_difference_ci(const ScoreTable& a, const ScoreTable& b, int trials,
                                      double level, std::uint64_t seed) {
    require_aligned(a, b);
    if (trials < 50) {
        throw validation_error("matrix difference CI needs at least 50 trials, got " +
                               std::to_string(trials));
    }
    MatrixDiffResult out{};
    out.trials = trials;
    out.level = level;
    out.seed = seed;
    out.redrawn_resamples = 0;

    auto point_a = intersymptom_matrix(a).r;
    auto point_b = intersymptom_matrix(b).r;
    for (int j = 0; j < kNumSymptoms; ++j) {
        for (int l = 0; l < kNumSymptoms; ++l) {
            out.delta[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)] =
                point_a[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)] -
                point_b[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)];
        }
    }

    const std::size_t n = a.rows();
    // deltas[j][l] collects one difference per trial.
    std::array<std::array<std::vector<double>, kNumSymptoms>, kNumSymptoms> deltas;
    for (auto& row : deltas) {
        for (auto& cell : row) cell.reserve(static_cast<std::size_t>(trials));
    }

    for (int trial = 0; trial < trials; ++trial) {
        // Per-trial stream: trial results do not depend on scheduling or on
        // how many redraws earlier trials consumed.
        Rng rng(derive_seed(seed, "diff_matrix", static_cast<std::uint64_t>(trial)));
        Matrix9 ra, rb;
        std::vector<std::size_t> idx(n);
        int attempts = 0;
        while (true) {
            for (std::size_t i = 0; i < n; ++i) idx[i] = rng.uniform_int(n);
            if (matrix_of_resample(a, idx, ra) && matrix_of_resample(b, idx, rb)) break;
            ++out.redrawn_resamples;
            if (++attempts > 200) {
                throw numeric_error("bootstrap trial " + std::to_string(trial) +
                                    " cannot draw a nondegenerate resample");
            }
        }
        for (int j = 0; j < kNumSymptoms; ++j) {
            for (int l = 0; l < kNumSymptoms; ++l) {
                deltas[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)].push_back(
                    ra[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)] -
                    rb[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)]);
            }
        }
    }

    for (int j = 0; j < kNumSymptoms; ++j) {
        for (int l = 0; l < kNumSymptoms; ++l) {
            auto sj = static_cast<std::size_t>(j), sl = static_cast<std::size_t>(l);
            if (j == l) {
                out.ci_low[sj][sl] = 0.0;
                out.ci_high[sj][sl] = 0.0;
                out.significant[sj][sl] = false;
                continue;
            }
            Ci ci = percentile_ci(deltas[sj][sl], level);
            out.ci_low[sj][sl] = ci.low;
            out.ci_high[sj][sl] = ci.high;
            out.significant[sj][sl] = ci.excludes_zero();
        }
    }
    return out;
}

RDiffResult paired_r_difference_ci(const std::vector<double>& x, const std::vector<double>& y1,
                                   const std::vector<double>& y2, int trials, double level,
                                   std::uint64_t seed) {
    if (x.size() != y1.size() || x.size() != y2.size()) {
        throw validation_error("paired r difference needs equal-length vectors");
    }
    if (trials < 50) throw validation_error("paired r difference needs at least 50 trials");
    RDiffResult out{};
    out.trials = trials;
    out.level = level;
    out.delta = pearson(x, y1) - pearson(x, y2);

    const std::size_t n = x.size();
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(trials));
    std::vector<double> bx(n), b1(n), b2(n);
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, "r_diff", static_cast<std::uint64_t>(trial)));
        int attempts = 0;
        while (true) {
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t k = rng.uniform_int(n);
                bx[i] = x[k];
                b1[i] = y1[k];
                b2[i] = y2[k];
            }
            try {
                samples.push_back(pearson(bx, b1) - pearson(bx, b2));
                break;
            } catch (const Error&) {
                if (++attempts > 200) {
                    throw numeric_error("paired bootstrap cannot draw a nondegenerate resample");
                }
            }
        }
    }
    out.ci = percentile_ci(samples, level);
    out.significant = out.ci.excludes_zero();
    return out;
}

SplitValidity explicit_split_validity(const ScoreTable& model, const ScoreTable& self_report,
                                      int min_rows) {
    require_aligned(model, self_report);
    if (!model.has_mask()) {
        throw validation_error("explicit split needs a model table with an explicitness mask");
    }
    SplitValidity out{};
    double sum_re = 0.0, sum_ri = 0.0, sum_pct = 0.0;
    int n_re = 0, n_ri = 0;
    for (int j = 0; j < kNumSymptoms; ++j) {
        auto sj = static_cast<std::size_t>(j);
        std::vector<double> me, se, mi, si;
        for (std::size_t r = 0; r < model.rows(); ++r) {
            double mv = static_cast<double>(model.matrix[r][sj]);
            double sv = static_cast<double>(self_report.matrix[r][sj]);
            if (model.explicit_mask[r][sj]) {
                me.push_back(mv);
                se.push_back(sv);
            } else {
                mi.push_back(mv);
                si.push_back(sv);
            }
        }
        out.pct_explicit[sj] = 100.0 * static_cast<double>(me.size()) / static_cast<double>(model.rows());
        sum_pct += out.pct_explicit[sj];

        auto split_r = [&](std::vector<double>& m, std::vector<double>& s, double& r_out, bool& defined,
                           std::string& note, const char* which) {
            if (m.size() < static_cast<std::size_t>(min_rows)) {
                defined = false;
                r_out = std::nan("");
                note = std::string(which) + " split has only " + std::to_string(m.size()) + " rows";
                return;
            }
            try {
                r_out = pearson(m, s);
                defined = true;
            } catch (const Error& e) {
                defined = false;
                r_out = std::nan("");
                note = e.what();
            }
        };
        split_r(me, se, out.r_explicit[sj], out.explicit_defined[sj], out.explicit_note[sj], "explicit");
        split_r(mi, si, out.r_implicit[sj], out.implicit_defined[sj], out.implicit_note[sj], "implicit");
        if (out.explicit_defined[sj]) {
            sum_re += out.r_explicit[sj];
            ++n_re;
        }
        if (out.implicit_defined[sj]) {
            sum_ri += out.r_implicit[sj];
            ++n_ri;
        }
    }
    out.mean_r_explicit = n_re > 0 ? sum_re / n_re : std::nan("");
    out.mean_r_implicit = n_ri > 0 ? sum_ri / n_ri : std::nan("");
    out.mean_pct_explicit = sum_pct / kNumSymptoms;
    return out;
}

Distribution score_distribution(const ScoreTable& t) {
    if (t.rows() == 0) throw validation_error("score distribution of an empty table");
    Distribution out{};
    for (int j = 0; j < kNumSymptoms; ++j) {
        std::array<int, 4> counts{};
        for (const auto& row : t.matrix) ++counts[static_cast<std::size_t>(row[static_cast<std::size_t>(j)])];
        for (int s = 0; s < 4; ++s) {
            out[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)] =
                100.0 * static_cast<double>(counts[static_cast<std::size_t>(s)]) /
                static_cast<double>(t.rows());
        }
    }
    return out;
}

void write_validity_csv(const ValidityResult& model_vs_self,
                        const std::vector<std::pair<std::string, ValidityResult>>& expert_panels,
                        const std::string& path) {
    CsvWriter csv(path);
    csv.write_row({"pair", "item", "r", "defined", "note"});
    auto emit = [&](const std::string& pair, const ValidityResult& v) {
        for (int j = 0; j < kNumSymptoms; ++j) {
            auto sj = static_cast<std::size_t>(j);
            csv.write_row({pair, symptom_keys()[sj], v.item_defined[sj] ? fmt_double(v.item_r[sj]) : "",
                           v.item_defined[sj] ? "1" : "0", v.item_note[sj]});
        }
        csv.write_row({pair, "total", fmt_double(v.total_r), "1", ""});
    };
    emit("model_vs_self_report", model_vs_self);
    for (const auto& [name, panel] : expert_panels) emit(name, panel);
    csv.close();
}

void write_intersymptom_csv(const IntersymptomResult& result, const std::string& source,
                            const std::string& path) {
    CsvWriter csv(path);
    std::vector<std::string> header = {"source", "item"};
    for (const auto& key : symptom_keys()) header.push_back(key);
    header.push_back("mean_offdiag");
    csv.write_row(header);
    for (int j = 0; j < kNumSymptoms; ++j) {
        auto sj = static_cast<std::size_t>(j);
        std::vector<std::string> row = {source, symptom_keys()[sj]};
        for (int l = 0; l < kNumSymptoms; ++l) {
            row.push_back(fmt_double(result.r[sj][static_cast<std::size_t>(l)]));
        }
        row.push_back(fmt_double(result.mean_offdiag[sj]));
        csv.write_row(row);
    }
    csv.close();
}

void write_diff_matrix_csv(const MatrixDiffResult& result, const std::string& path) {
    CsvWriter csv(path);
    csv.write_row({"item_a", "item_b", "delta", "ci_low", "ci_high", "significant"});
    for (int j = 0; j < kNumSymptoms; ++j) {
        for (int l = j + 1; l < kNumSymptoms; ++l) {
            auto sj = static_cast<std::size_t>(j), sl = static_cast<std::size_t>(l);
            csv.write_row({symptom_keys()[sj], symptom_keys()[sl], fmt_double(result.delta[sj][sl]),
                           fmt_double(result.ci_low[sj][sl]), fmt_double(result.ci_high[sj][sl]),
                           result.significant[sj][sl] ? "1" : "0"});
        }
    }
    csv.close();
}

void write_split_validity_csv(const SplitValidity& split, const std::string& path) {
    CsvWriter csv(path);
    csv.write_row({"item", "pct_explicit", "r_explicit", "r_implicit", "explicit_note", "implicit_note"});
    for (int j = 0; j < kNumSymptoms; ++j) {
        auto sj = static_cast<std::size_t>(j);
        csv.write_row({symptom_keys()[sj], fmt_double(split.pct_explicit[sj]),
                       split.explicit_defined[sj] ? fmt_double(split.r_explicit[sj]) : "",
                       split.implicit_defined[sj] ? fmt_double(split.r_implicit[sj]) : "",
                       split.explicit_note[sj], split.implicit_note[sj]});
    }
    csv.write_row({"mean", fmt_double(split.mean_pct_explicit),
                   std::isnan(split.mean_r_explicit) ? "" : fmt_double(split.mean_r_explicit),
                   std::isnan(split.mean_r_implicit) ? "" : fmt_double(split.mean_r_implicit), "", ""});
    csv.close();
}

void write_distribution_csv(const std::vector<std::pair<std::string, Distribution>>& per_source,
                            const std::string& path) {
    CsvWriter csv(path);
    csv.write_row({"source", "item", "pct_0", "pct_1", "pct_2", "pct_3"});
    for (const auto& [source, dist] : per_source) {
        for (int j = 0; j < kNumSymptoms; ++j) {
            auto sj = static_cast<std::size_t>(j);
            csv.write_row({source, symptom_keys()[sj], fmt_double(dist[sj][0]), fmt_double(dist[sj][1]),
                           fmt_double(dist[sj][2]), fmt_double(dist[sj][3])});
        }
    }
    csv.close();
}

} // namespace symscope
