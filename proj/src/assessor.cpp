#include "symscope/assessor.hpp"

#include "symscope/csvio.hpp"
#include "symscope/errors.hpp"
#include "symscope/rng.hpp"
#include "symscope/symptoms.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <ctime>
#include <mutex>
#include <sstream>
#include <thread>

namespace symscope {

namespace {

// One-line summaries shown under each item name in the instruction. The
// appetite item carries no summary; its name is self-describing.
const char* const kItemDescriptions[kNumSymptoms] = {
    "Little interest or pleasure in doing things",
    "Feeling down, depressed, or hopeless",
    "Trouble falling or staying asleep, or sleeping too much",
    "Feeling tired or having little energy",
    "",
    "Feeling bad about yourself or that you are a failure or have let yourself or your family down",
    "Trouble concentrating on things",
    "Moving or speaking so slowly that other people could have noticed, or being so fidgety or "
    "restless that you have been moving around a lot more than usual",
    "Thoughts that you would be better off dead, or of hurting yourself",
};

std::string make_task_description() {
    std::ostringstream out;
    out << "Your task is to conduct an in-depth analysis of a provided written text, with the "
           "goal of mirroring the psychological state of the author to accurately fill out the "
           "Patient Health Questionnaire (PHQ9). The PHQ9 consists of 9 items that are designed "
           "to identify symptoms of depression:\n";
    const auto& names = symptom_names();
    for (int i = 0; i < kNumSymptoms; ++i) {
        out << "\n- " << names[i];
        if (kItemDescriptions[i][0] != '\0') out << ": " << kItemDescriptions[i];
    }
    return out.str();
}

const char* const kTaskSteps =
    "The text should be scrutinized carefully and the following steps should be strictly "
    "followed:\n"
    "STEP 1: Pinpoint and record only the PHQ9 items that are clearly stated in the text, "
    "assigning each a severity score between 0-3. At this stage, refrain from evaluating or "
    "recording items that are not explicitly mentioned. Enclose the text spans indicative of "
    "respective symptoms inside single quotes. If multiple spans are present, separate them "
    "using comma.\n"
    "STEP 2: For the remaining PHQ9 items not explicitly mentioned in the text, assign an "
    "estimated score. This estimation should be based on what you would expect it to be while "
    "factoring the severity score of the symptoms already identified.\n"
    "STEP 3: Combine the scores from the previous steps and present the total PHQ9 score as "
    "\"Combined Score:\". Categorize this score into only one of the following: None, Mild, "
    "Moderate, Moderately Severe, and Severe, and present it as \"Category:\". This will "
    "signify the completion of the task.";

const char* const kOutputFormat =
    "To ensure clarity and easy readability, format your output into a nested JSON. The first "
    "level should contain the step number as key ('STEP #'), and the value should be a JSON "
    "containing the items as keys and a list containing reason(s) and the estimated severity "
    "score as values. The final step's JSON should contain 'Final' as the key and a list "
    "containing the summed score and the evaluated category as the value. Here's the "
    "abstracted format of the JSON, with elements inside the angle brackets being placeholders "
    "for the actual values:\n"
    "\n"
    "{\n"
    "    \"STEP 1\": {\n"
    "        \"<Item a>\": [\"<Reason>\", \"<Severity Score a>\"],\n"
    "        \"<Item b>\": [\"<Reason>\", \"<Severity Score b>\"],\n"
    "        ...\n"
    "    },\n"
    "    \"STEP 2\": {\n"
    "        \"<Item x>\": [\"<Reason>\", \"<Severity Score x>\"],\n"
    "        \"<Item y>\": [\"<Reason>\", \"<Severity Score y>\"],\n"
    "        ...\n"
    "    },\n"
    "    \"STEP 3\": {\n"
    "        \"Final\": [\"Combined Score: <score>\", \"Category: <category>\"]\n"
    "    }\n"
    "}\n"
    "\n"
    "Keep in mind, a score of 0 indicates that the symptom was not experienced, while a score "
    "of 3 signifies a high severity level of the specific symptom.";

bool is_retryable(const TransportReply& reply) {
    if (reply.status == 0) return true;
    if (reply.status == 408 || reply.status == 429) return true;
    return reply.status >= 500 && reply.status <= 599;
}

} // namespace

std::string DecodingConfig::canonical_string() const {
    std::ostringstream out;
    out << "temperature=" << fmt_double(temperature, 6)
        << ";frequency_penalty=" << fmt_double(frequency_penalty, 6)
        << ";presence_penalty=" << fmt_double(presence_penalty, 6)
        << ";top_p=" << fmt_double(top_p, 6)
        << ";max_tokens=" << max_tokens;
    return out.str();
}

std::string AssessmentPrompt::render() const {
    std::ostringstream out;
    out << task_description << "\n\n" << task_steps << "\n\n" << output_format << "\n\n"
        << "Text: \"" << essay_text << "\"";
    return out.str();
}

AssessmentPrompt build_prompt(const EssayRecord& essay) {
    if (essay.essay_text.empty()) {
        throw validation_error("cannot build prompt for participant '" + essay.participant_id +
                               "': essay text is empty");
    }
    AssessmentPrompt prompt;
    prompt.task_description = make_task_description();
    prompt.task_steps = kTaskSteps;
    prompt.output_format = kOutputFormat;
    prompt.essay_text = essay.essay_text;
    return prompt;
}

std::string request_fingerprint(const std::string& prompt_text, const DecodingConfig& cfg,
                                const std::string& model_id) {
    std::string material = "model=" + model_id + "\n" + cfg.canonical_string() + "\n" + prompt_text;
    return to_hex16(fnv1a64(material));
}

Clock system_clock_utc() {
    return [] {
        std::time_t now = std::time(nullptr);
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
        return std::string(buf);
    };
}

Sleeper thread_sleeper() {
    return [](std::chrono::milliseconds ms) { std::this_thread::sleep_for(ms); };
}

// -------------------------------------------------------------------------
// HTTP transport

struct HttpTransport::Impl {
    std::string api_key;
    int requests_per_minute = 0;

    std::mutex bucket_mutex;
    double tokens = 0.0;
    std::chrono::steady_clock::time_point last_refill = std::chrono::steady_clock::now();

    // Blocks until the bucket grants one request. Capacity equals the
    // per-minute budget so idle time cannot bank more than one minute.
    void acquire() {
        if (requests_per_minute <= 0) return;
        const double rate = requests_per_minute / 60.0;
        while (true) {
            std::chrono::milliseconds wait{0};
            {
                std::lock_guard<std::mutex> lock(bucket_mutex);
                auto now = std::chrono::steady_clock::now();
                double elapsed = std::chrono::duration<double>(now - last_refill).count();
                last_refill = now;
                tokens = std::min(static_cast<double>(requests_per_minute), tokens + elapsed * rate);
                if (tokens >= 1.0) {
                    tokens -= 1.0;
                    return;
                }
                wait = std::chrono::milliseconds(static_cast<long>((1.0 - tokens) / rate * 1000.0) + 1);
            }
            std::this_thread::sleep_for(wait);
        }
    }
};

HttpTransport::HttpTransport(std::string api_key, int requests_per_minute) : impl_(new Impl) {
    impl_->api_key = std::move(api_key);
    impl_->requests_per_minute = requests_per_minute;
    impl_->tokens = requests_per_minute > 0 ? static_cast<double>(requests_per_minute) : 0.0;
}

HttpTransport::~HttpTransport() = default;

} // namespace symscope

// httplib is included from exactly one translation unit to keep build times
// sane; OpenSSL support is toggled by the build.
#ifdef SYMSCOPE_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

namespace symscope {

TransportReply HttpTransport::send(const std::string& endpoint, const std::string& request_body) {
    // Split scheme://host[:port]/path by hand; httplib wants base and path
    // separately.
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw config_error("endpoint URL '" + endpoint + "' has no scheme");
    }
    auto path_start = endpoint.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? endpoint : endpoint.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);

#ifndef SYMSCOPE_HAVE_OPENSSL
    if (endpoint.rfind("https://", 0) == 0) {
        throw config_error("endpoint '" + endpoint + "' needs TLS but this build lacks OpenSSL");
    }
#endif

    impl_->acquire();

    httplib::Client client(base);
    client.set_connection_timeout(120, 0);
    client.set_read_timeout(120, 0);
    client.set_write_timeout(120, 0);
    httplib::Headers headers;
    if (!impl_->api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + impl_->api_key);
    }

    auto res = client.Post(path, headers, request_body, "application/json");
    TransportReply reply;
    if (!res) {
        reply.status = 0;
        reply.error = httplib::to_string(res.error());
        return reply;
    }
    reply.status = res->status;
    reply.body = res->body;
    return reply;
}

// -------------------------------------------------------------------------
// Assessment driver

Assessor::Assessor(ResponseCache& cache, Transport* transport, Clock clock, Sleeper sleeper)
    : cache_(cache), transport_(transport), clock_(std::move(clock)), sleeper_(std::move(sleeper)) {}

std::string Assessor::request_once(const std::string& endpoint, const std::string& request_body) {
    constexpr int kMaxAttempts = 5;
    TransportReply reply;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        if (attempt > 0) {
            // 250 ms doubling per retry, capped at 4 s.
            auto backoff = std::chrono::milliseconds(250) * (1 << (attempt - 1));
            if (backoff > std::chrono::milliseconds(4000)) backoff = std::chrono::milliseconds(4000);
            sleeper_(backoff);
        }
        reply = transport_->send(endpoint, request_body);
        if (reply.status >= 200 && reply.status < 300) return reply.body;
        if (!is_retryable(reply)) {
            throw network_error("endpoint returned status " + std::to_string(reply.status) +
                                " (not retryable): " + reply.body);
        }
    }
    std::string last = reply.status == 0 ? reply.error : "status " + std::to_string(reply.status);
    throw network_error("retries exhausted after " + std::to_string(kMaxAttempts) +
                        " attempts; last failure: " + last);
}

std::string Assessor::assess(const EssayRecord& essay, const std::string& model_id,
                             const DecodingConfig& cfg, const std::string& endpoint) {
    auto prompt = build_prompt(essay).render();
    auto fingerprint = request_fingerprint(prompt, cfg, model_id);

    if (auto cached = cache_.get(fingerprint)) {
        return cached->raw_reply;
    }
    if (transport_ == nullptr) {
        throw config_error("no reply cached for participant '" + essay.participant_id +
                           "' and no endpoint credentials; set " + std::string(kApiKeyEnvVar));
    }

    nlohmann::json request;
    request["model"] = model_id;
    request["messages"] = nlohmann::json::array({
        nlohmann::json{{"role", "user"}, {"content", prompt}},
    });
    request["temperature"] = cfg.temperature;
    request["frequency_penalty"] = cfg.frequency_penalty;
    request["presence_penalty"] = cfg.presence_penalty;
    request["top_p"] = cfg.top_p;
    request["max_tokens"] = cfg.max_tokens;

    auto body = request_once(endpoint, request.dump());

    std::string content;
    try {
        auto j = nlohmann::json::parse(body);
        content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw parse_error("chat-completion reply for participant '" + essay.participant_id +
                          "' is not in the expected shape: " + e.what());
    }

    ResponseCacheEntry entry;
    entry.participant_id = essay.participant_id;
    entry.model_id = model_id;
    entry.request_fingerprint = fingerprint;
    entry.raw_reply = content;
    entry.timestamp = clock_();
    cache_.put(entry);
    return content;
}

AssessReport Assessor::assess_corpus(const std::vector<EssayRecord>& corpus, const AssessOptions& options) {
    if (options.parallelism < 1) {
        throw validation_error("parallelism must be at least 1, got " +
                               std::to_string(options.parallelism));
    }
    AssessReport report;
    std::mutex report_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= corpus.size()) break;
            const auto& record = corpus[i];
            try {
                auto reply = assess(record, options.model_id, options.cfg, options.endpoint);
                std::lock_guard<std::mutex> lock(report_mutex);
                report.replies[record.participant_id] = std::move(reply);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(report_mutex);
                report.errors[record.participant_id] = e.what();
            }
        }
    };

    std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(options.parallelism), corpus.size());
    if (threads <= 1) {
        worker();
        return report;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 0; t + 1 < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return report;
}

} // namespace symscope
