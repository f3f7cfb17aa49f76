#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Client for any chat-completion endpoint with optional per-token
// log-probabilities. The only concurrent module: complete_batch keeps at
// most max_in_flight requests outstanding and returns results in request
// order no matter how they complete.

namespace excam::gateway {

struct CompletionRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
    int max_tokens = 1024;
    bool want_logprobs = false;
    std::string model_name;
};

enum class FinishReason { kStop, kLength, kError };

struct Completion {
    std::string text;
    std::optional<std::vector<double>> token_logprobs;  // natural logs, each <= 0
    FinishReason finish_reason = FinishReason::kStop;
    std::string error;  // populated for finish_reason == kError
};

enum class GatewayErrorKind { kTimeout, kRateLimited, kProtocol, kAuth, kExhausted };

class GatewayError : public std::runtime_error {
public:
    GatewayError(GatewayErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    GatewayErrorKind kind() const { return kind_; }

private:
    GatewayErrorKind kind_;
};

class ChatGateway {
public:
    virtual ~ChatGateway() = default;
    virtual Completion complete(const CompletionRequest& request) = 0;
};

struct RetryPolicy {
    int max_attempts = 4;
    int initial_backoff_ms = 250;
    double multiplier = 2.0;
};

// Stable fingerprint of a request; the replay file key.
std::string request_fingerprint(const CompletionRequest& request);

// Wire client for message-based chat completion (OpenAI-style
// /chat/completions). Transport failures and 408/429/5xx are retried with
// exponential backoff; auth and other protocol errors surface immediately.
class HttpGateway : public ChatGateway {
public:
    HttpGateway(std::string base_url, std::string api_key, RetryPolicy retry = {});
    ~HttpGateway() override;

    Completion complete(const CompletionRequest& request) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Serves canned responses from a replay file (fingerprint -> completion).
class ReplayGateway : public ChatGateway {
public:
    explicit ReplayGateway(const std::filesystem::path& replay_file);

    Completion complete(const CompletionRequest& request) override;

private:
    std::map<std::string, Completion> entries_;
};

// Passes through to an inner gateway and records every exchange; save()
// writes a replay file usable by ReplayGateway.
class RecordingGateway : public ChatGateway {
public:
    RecordingGateway(std::shared_ptr<ChatGateway> inner, std::filesystem::path out_file);
    ~RecordingGateway() override;

    Completion complete(const CompletionRequest& request) override;
    void save();

private:
    std::shared_ptr<ChatGateway> inner_;
    std::filesystem::path out_file_;
    std::mutex mutex_;
    std::map<std::string, std::pair<CompletionRequest, Completion>> recorded_;
};

// Deterministic offline responder. Recognizes the toolkit's own prompt
// shapes (error generation, report judging, baseline judging) and fabricates
// plausible responses keyed on the request fingerprint, so full pipelines
// run without any endpoint.
class MockGateway : public ChatGateway {
public:
    explicit MockGateway(uint64_t seed = 0);

    Completion complete(const CompletionRequest& request) override;

private:
    uint64_t seed_;
};

// Bounded-parallel batch. Per-request failures become kError completions;
// throws GatewayError{kExhausted} only if every request failed.
std::vector<Completion> complete_batch(ChatGateway& gw,
                                       const std::vector<CompletionRequest>& requests,
                                       int max_in_flight);

}  // namespace excam::gateway
