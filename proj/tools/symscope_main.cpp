#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include "symscope/assessor.hpp"
#include "symscope/cache.hpp"
#include "symscope/csvio.hpp"
#include "symscope/errors.hpp"
#include "symscope/normalizer.hpp"
#include "symscope/pipeline.hpp"
#include "symscope/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Every flag default below matches the reference study configuration; the
// help text states the value so `--help` is the provenance record.
void add_decoding_flags(CLI::App* sub, symscope::DecodingConfig& cfg) {
    sub->add_option("--temperature", cfg.temperature, "Sampling temperature (study default 0.0)")
        ->capture_default_str();
    sub->add_option("--frequency-penalty", cfg.frequency_penalty,
                    "Frequency penalty (study default 0.1)")
        ->capture_default_str();
    sub->add_option("--presence-penalty", cfg.presence_penalty,
                    "Presence penalty (study default 0.0)")
        ->capture_default_str();
    sub->add_option("--top-p", cfg.top_p, "Nucleus sampling mass (study default 1.0)")
        ->capture_default_str();
    sub->add_option("--max-tokens", cfg.max_tokens, "Reply token budget (study default 450)")
        ->capture_default_str();
}

void add_knob_flags(CLI::App* sub, symscope::AnalysisKnobs& knobs) {
    sub->add_option("--trials", knobs.trials, "Bootstrap trials (study default 500)")
        ->capture_default_str();
    sub->add_option("--matrix-level", knobs.matrix_level,
                    "Confidence level for matrix and rank CIs (study default 0.95)")
        ->capture_default_str();
    sub->add_option("--schema-level", knobs.schema_level,
                    "Confidence level for schema coefficient CIs (study default 0.90)")
        ->capture_default_str();
    sub->add_option("--seed", knobs.seed,
                    "Top-level seed; each analysis derives its own stream by label")
        ->capture_default_str();
    sub->add_option("--pmi-threshold", knobs.dla.pmi_threshold,
                    "PMI retention bound for language features (study default 4.0)")
        ->capture_default_str();
    sub->add_option("--min-users", knobs.dla.min_users,
                    "Distinct participants an n-gram must reach (study default 10)")
        ->capture_default_str();
    sub->add_option("--q", knobs.dla.q,
                    "Benjamini-Hochberg false-discovery level (study default 0.05)")
        ->capture_default_str();
    sub->add_option("--max-order", knobs.dla.max_order, "Longest n-gram order (default 3)")
        ->capture_default_str();
    sub->add_option("--dichotomize-threshold", knobs.dichotomize_threshold,
                    "Item counts as endorsed when score >= this (default 1)")
        ->capture_default_str();
    sub->add_option("--min-implicit-rows", knobs.schema_min_implicit_rows,
                    "Implicit rows required to fit a schema target (default 30)")
        ->capture_default_str();
}

struct SynthCli {
    int n = 955;
    std::uint64_t seed = 7;
    std::string out;
};

int run_synth(const SynthCli& o) {
    auto world = symscope::generate_world(symscope::preset_paper_world(o.n, o.seed));
    symscope::write_world(world, o.out);
    std::cout << "synthetic world written to " << o.out << " (n=" << o.n << ", seed=" << o.seed
              << ")\n";
    return 0;
}

struct AssessCli {
    std::string corpus;
    std::string cache_dir;
    std::string model_id;
    std::string endpoint;
    std::string replies;
    std::string out;
    int parallelism = 1;
    int rpm = 0;
    symscope::DecodingConfig cfg;
};

int run_assess(const AssessCli& o) {
    auto corpus = symscope::load_corpus(o.corpus);
    symscope::ResponseCache cache(o.cache_dir);

    std::unique_ptr<symscope::Transport> transport;
    std::string endpoint = o.endpoint;
    if (!o.replies.empty()) {
        auto by_pid = symscope::load_replies(o.replies);
        std::map<std::string, std::string> by_essay;
        for (const auto& essay : corpus) {
            auto it = by_pid.find(essay.participant_id);
            if (it != by_pid.end()) by_essay[essay.essay_text] = it->second;
        }
        transport = std::make_unique<symscope::MockTransport>(std::move(by_essay));
        if (endpoint.empty()) endpoint = "replay://local";
    } else {
        if (endpoint.empty()) {
            throw symscope::config_error("--endpoint is required unless --replies is given");
        }
        const char* key = std::getenv(symscope::kApiKeyEnvVar);
        if (key == nullptr || *key == '\0') {
            throw symscope::config_error(std::string("environment variable ") +
                                         symscope::kApiKeyEnvVar + " is not set");
        }
        transport = std::make_unique<symscope::HttpTransport>(key, o.rpm);
    }

    symscope::Assessor assessor(cache, transport.get());
    symscope::AssessOptions opts;
    opts.model_id = o.model_id;
    opts.cfg = o.cfg;
    opts.endpoint = endpoint;
    opts.parallelism = o.parallelism;
    auto report = assessor.assess_corpus(corpus, opts);

    fs::create_directories(o.out);
    std::string lines;
    for (const auto& essay : corpus) {
        auto it = report.replies.find(essay.participant_id);
        if (it == report.replies.end()) continue;
        json row = {{"participant_id", it->first}, {"reply", it->second}};
        lines += row.dump();
        lines += "\n";
    }
    symscope::write_text_file(fs::path(o.out) / "replies.jsonl", lines);
    std::string errs;
    for (const auto& [pid, msg] : report.errors) {
        json row = {{"participant_id", pid}, {"error", msg}};
        errs += row.dump();
        errs += "\n";
    }
    symscope::write_text_file(fs::path(o.out) / "errors.jsonl", errs);

    std::cout << report.replies.size() << " replies (" << report.errors.size()
              << " failures) cached under " << o.cache_dir << "\n";
    return report.errors.empty() ? 0 : 1;
}

struct NormalizeCli {
    std::string corpus;
    std::string cache_dir;
    std::string model_id;
    std::string replies;
    std::string out;
    symscope::DecodingConfig cfg;
};

int run_normalize(const NormalizeCli& o) {
    auto corpus = symscope::load_corpus(o.corpus);

    std::map<std::string, std::string> replies;
    std::map<std::string, std::string> failures;
    if (!o.replies.empty()) {
        replies = symscope::load_replies(o.replies);
    } else if (!o.cache_dir.empty()) {
        if (o.model_id.empty()) {
            throw symscope::config_error("--model is required when reading from --cache");
        }
        symscope::ResponseCache cache(o.cache_dir);
        auto pulled = symscope::replies_from_cache(corpus, cache, o.model_id, o.cfg);
        if (pulled.replies.empty() && !corpus.empty()) {
            throw symscope::config_error("no cached replies for model '" + o.model_id + "' under " +
                                         o.cache_dir +
                                         " (check --model and the decoding flags)");
        }
        replies = std::move(pulled.replies);
        for (const auto& pid : pulled.missing) {
            failures[pid] = "no cached reply for this participant";
        }
    } else {
        throw symscope::config_error("one of --cache or --replies is required");
    }

    auto outcome = symscope::normalize_replies(corpus, replies);
    for (const auto& [pid, msg] : outcome.failures) failures[pid] = msg;
    auto tab = symscope::tabulate(outcome.records);

    fs::create_directories(o.out);
    symscope::write_scores_csv(tab, (fs::path(o.out) / "scores.csv").string());
    symscope::write_spans_jsonl(outcome.records, corpus, (fs::path(o.out) / "spans.jsonl").string());
    symscope::write_repairs_jsonl(outcome.records, failures,
                                  (fs::path(o.out) / "repairs.jsonl").string());

    std::cout << outcome.records.size() << " replies normalized (" << outcome.repaired_count
              << " repaired, " << failures.size() << " failures) -> " << o.out << "\n";
    return 0;
}

struct AnalyzeCli {
    std::string corpus;
    std::string experts;
    std::string normalized = "normalized";
    std::string out;
    symscope::AnalysisKnobs knobs;
};

int run_analyze_cmd(const AnalyzeCli& o) {
    symscope::AnalyzeInputs inputs;
    inputs.corpus_path = o.corpus;
    inputs.experts_path = o.experts;
    fs::path norm(o.normalized);
    inputs.scores_csv = (norm / "scores.csv").string();
    inputs.spans_jsonl = (norm / "spans.jsonl").string();
    inputs.repairs_jsonl = (norm / "repairs.jsonl").string();
    inputs.out_dir = o.out;
    json summary = symscope::run_analyze(inputs, o.knobs);
    std::cout << "analysis written to " << o.out << "\n";
    const auto& v = summary["convergent_validity"]["total_r"];
    if (v.is_number()) {
        std::cout << "model vs self-report total score: r = " << v.get<double>() << "\n";
    }
    return 0;
}

struct ReportCli {
    std::string summary;
    std::string out;
};

int run_report(const ReportCli& o) {
    json summary;
    try {
        summary = json::parse(symscope::read_text_file(o.summary));
    } catch (const json::parse_error& e) {
        throw symscope::parse_error(o.summary + ": " + e.what());
    }
    std::string md = symscope::render_report(summary);
    if (o.out.empty()) {
        std::cout << md;
    } else {
        symscope::write_text_file(o.out, md);
        std::cout << "report written to " << o.out << "\n";
    }
    return 0;
}

struct ReplicateCli {
    symscope::ReplicateOptions opts;
};

int run_replicate_cmd(const ReplicateCli& o) {
    json report = symscope::run_replicate(o.opts);
    int passed = 0, total = 0;
    for (const auto& check : report["checks"]) {
        ++total;
        if (check["pass"].get<bool>()) {
            ++passed;
        } else {
            std::cout << "FAIL " << check["check"].get<std::string>() << ": expected "
                      << check["expected"].dump() << ", got " << check["actual"].dump() << "\n";
        }
    }
    bool all_pass = report["all_pass"].get<bool>();
    std::cout << "replicate: " << passed << "/" << total << " checks passed -> "
              << o.opts.out_dir << "\n";
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"symscope: administer a structured symptom-assessment prompt to a chat-completion "
                 "model, normalize the replies into scored items with cited evidence, and run the "
                 "psychometric battery"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "symscope 1.0.0");
    int exit_code = 0;

    SynthCli synth_opts;
    auto* synth = app.add_subcommand(
        "synth", "Generate a synthetic corpus with canned replies and a ground-truth manifest");
    synth->add_option("--n", synth_opts.n, "Number of participants (study corpus size 955)")
        ->capture_default_str();
    synth->add_option("--seed", synth_opts.seed, "World seed")->capture_default_str();
    synth->add_option("--out", synth_opts.out, "Output directory")->required();
    synth->callback([&] { exit_code = run_synth(synth_opts); });

    AssessCli assess_opts;
    auto* assess =
        app.add_subcommand("assess", "Administer the assessment prompt to every corpus essay");
    assess->add_option("--corpus", assess_opts.corpus, "Corpus JSONL file")->required();
    assess->add_option("--cache", assess_opts.cache_dir, "Response cache directory")->required();
    assess->add_option("--model", assess_opts.model_id, "Model id (e.g. gpt-4-0125, gpt-5)")
        ->required();
    assess->add_option("--endpoint", assess_opts.endpoint,
                       "Chat-completions endpoint URL (bearer token from $SYMSCOPE_API_KEY)");
    assess->add_option("--replies", assess_opts.replies,
                       "Replay canned replies from this JSONL instead of calling an endpoint");
    assess->add_option("--out", assess_opts.out, "Directory for replies.jsonl / errors.jsonl")
        ->required();
    assess->add_option("--parallelism", assess_opts.parallelism, "Concurrent requests (default 1)")
        ->capture_default_str();
    assess->add_option("--rpm", assess_opts.rpm,
                       "Client-side requests-per-minute cap (0 = unlimited)")
        ->capture_default_str();
    add_decoding_flags(assess, assess_opts.cfg);
    assess->callback([&] { exit_code = run_assess(assess_opts); });

    NormalizeCli norm_opts;
    auto* normalize = app.add_subcommand(
        "normalize", "Parse raw replies into scored items, evidence spans and a repair log");
    normalize->add_option("--corpus", norm_opts.corpus, "Corpus JSONL file")->required();
    normalize->add_option("--cache", norm_opts.cache_dir,
                          "Response cache directory to read replies from");
    normalize->add_option("--model", norm_opts.model_id,
                          "Model id the cached replies were produced with");
    normalize->add_option("--replies", norm_opts.replies,
                          "Read raw replies from this JSONL instead of the cache");
    normalize->add_option("--out", norm_opts.out, "Output directory")->required();
    add_decoding_flags(normalize, norm_opts.cfg);
    normalize->callback([&] { exit_code = run_normalize(norm_opts); });

    AnalyzeCli analyze_opts;
    auto* analyze = app.add_subcommand(
        "analyze", "Run the psychometric battery over normalized scores and write all artifacts");
    analyze->add_option("--corpus", analyze_opts.corpus, "Corpus JSONL file")->required();
    analyze->add_option("--experts", analyze_opts.experts, "Expert ratings CSV (optional)");
    analyze->add_option("--normalized", analyze_opts.normalized,
                        "Directory holding scores.csv, spans.jsonl, repairs.jsonl")
        ->capture_default_str();
    analyze->add_option("--out", analyze_opts.out, "Output directory")->required();
    add_knob_flags(analyze, analyze_opts.knobs);
    analyze->callback([&] { exit_code = run_analyze_cmd(analyze_opts); });

    ReportCli report_opts;
    auto* report =
        app.add_subcommand("report", "Render a markdown digest from an analysis summary.json");
    report->add_option("--summary", report_opts.summary, "Path to summary.json")->required();
    report->add_option("--out", report_opts.out, "Markdown output path (default: stdout)");
    report->callback([&] { exit_code = run_report(report_opts); });

    ReplicateCli repl_opts;
    repl_opts.opts.knobs.seed = repl_opts.opts.seed;  // one --seed drives world and analyses
    auto* replicate = app.add_subcommand(
        "replicate",
        "Full pipeline against a synthetic world, checked against its ground-truth manifest");
    replicate->add_option("--n", repl_opts.opts.n, "Number of participants (study corpus size 955)")
        ->capture_default_str();
    replicate->add_option("--out", repl_opts.opts.out_dir, "Output directory")->required();
    replicate
        ->add_option("--parallelism", repl_opts.opts.parallelism,
                     "Concurrent mock requests (default 1)")
        ->capture_default_str();
    add_knob_flags(replicate, repl_opts.opts.knobs);
    replicate->callback([&] {
        repl_opts.opts.seed = repl_opts.opts.knobs.seed;
        exit_code = run_replicate_cmd(repl_opts);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const symscope::Error& e) {
        json line = {{"error", symscope::to_string(e.kind())}, {"message", e.what()}};
        std::cerr << line.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        json line = {{"error", "internal"}, {"message", e.what()}};
        std::cerr << line.dump() << "\n";
        return 1;
    }
    return exit_code;
}
