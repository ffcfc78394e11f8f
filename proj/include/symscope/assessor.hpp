#pragma once

#include "symscope/cache.hpp"
#include "symscope/corpus.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace symscope {

// Name of the environment variable the CLI reads for the endpoint bearer
// token. Library errors reference it so a cache miss without credentials
// is actionable.
inline constexpr const char* kApiKeyEnvVar = "SYMSCOPE_API_KEY";

// Decoding hyperparameters sent with every chat-completion request. Every
// field participates in the request fingerprint, so changing any of them
// invalidates the cache entry.
struct DecodingConfig {
    double temperature = 0.0;
    double frequency_penalty = 0.1;
    double presence_penalty = 0.0;
    double top_p = 1.0;
    int max_tokens = 450;

    // Fixed-precision serialization used for fingerprinting.
    std::string canonical_string() const;
};

// The instruction shown to the model, in its three parts, plus the essay.
struct AssessmentPrompt {
    std::string task_description;
    std::string task_steps;
    std::string output_format;
    std::string essay_text;

    // Full prompt text: the three instruction parts then the quoted essay.
    std::string render() const;
};

// Pure function of the essay text; the instruction template is fixed.
AssessmentPrompt build_prompt(const EssayRecord& essay);

// Pure function of (prompt text, decoding config, model_id); 16 hex chars.
std::string request_fingerprint(const std::string& prompt_text,
                                const DecodingConfig& cfg,
                                const std::string& model_id);

// Raw transport reply. status 0 means the request never produced an HTTP
// status (connect failure, timeout); `error` then says why.
struct TransportReply {
    int status = 0;
    std::string body;
    std::string error;
};

class Transport {
public:
    virtual ~Transport() = default;
    // request_body is the chat-completions JSON. Must be safe to call from
    // multiple threads.
    virtual TransportReply send(const std::string& endpoint, const std::string& request_body) = 0;
};

// HTTPS transport with bearer auth, 120 s timeouts, and an optional
// client-side token-bucket limiter (requests_per_minute 0 = unlimited).
class HttpTransport : public Transport {
public:
    HttpTransport(std::string api_key, int requests_per_minute = 0);
    ~HttpTransport() override;

    TransportReply send(const std::string& endpoint, const std::string& request_body) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

using Clock = std::function<std::string()>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

Clock system_clock_utc();
Sleeper thread_sleeper();

struct AssessOptions {
    std::string model_id;
    DecodingConfig cfg;
    std::string endpoint;
    int parallelism = 1;
};

// Per-corpus result: replies keyed by participant, failures recorded per
// participant rather than aborting the run.
struct AssessReport {
    std::map<std::string, std::string> replies;
    std::map<std::string, std::string> errors;
};

// Cache-first assessment driver. `transport` may be null when every
// request is expected to hit the cache; a miss then raises a
// configuration error instead of a network call.
class Assessor {
public:
    Assessor(ResponseCache& cache, Transport* transport,
             Clock clock = system_clock_utc(), Sleeper sleeper = thread_sleeper());

    std::string assess(const EssayRecord& essay, const std::string& model_id,
                       const DecodingConfig& cfg, const std::string& endpoint);

    AssessReport assess_corpus(const std::vector<EssayRecord>& corpus, const AssessOptions& options);

private:
    std::string request_once(const std::string& endpoint, const std::string& request_body);

    ResponseCache& cache_;
    Transport* transport_;
    Clock clock_;
    Sleeper sleeper_;
};

} // namespace symscope
