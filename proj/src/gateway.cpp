#include "excam/gateway.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "excam/prompts.hpp"
#include "excam/rng.hpp"
#include "excam/util.hpp"

namespace excam::gateway {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string fnv1a_hex(std::string_view data) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string_view finish_reason_name(FinishReason r) {
    switch (r) {
        case FinishReason::kStop: return "stop";
        case FinishReason::kLength: return "length";
        case FinishReason::kError: return "error";
    }
    return "stop";
}

FinishReason finish_reason_from_name(std::string_view s) {
    if (s == "length") return FinishReason::kLength;
    if (s == "error") return FinishReason::kError;
    return FinishReason::kStop;
}

}  // namespace

std::string request_fingerprint(const CompletionRequest& request) {
    ordered_json j;
    j["model"] = request.model_name;
    j["system"] = request.system_prompt;
    j["user"] = request.user_prompt;
    j["temperature"] = request.temperature;
    j["max_tokens"] = request.max_tokens;
    j["logprobs"] = request.want_logprobs;
    return fnv1a_hex(j.dump());
}

// --- HttpGateway ---

struct HttpGateway::Impl {
    std::string host;         // scheme://host[:port]
    std::string path_prefix;  // e.g. /v1
    std::string api_key;
    RetryPolicy retry;
};

HttpGateway::HttpGateway(std::string base_url, std::string api_key, RetryPolicy retry)
    : impl_(std::make_unique<Impl>()) {
    impl_->api_key = std::move(api_key);
    impl_->retry = retry;
    std::string url = std::move(base_url);
    while (!url.empty() && url.back() == '/') url.pop_back();
    size_t scheme_end = url.find("://");
    size_t path_start =
        url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        impl_->host = url;
    } else {
        impl_->host = url.substr(0, path_start);
        impl_->path_prefix = url.substr(path_start);
    }
    if (impl_->host.empty()) {
        throw GatewayError(GatewayErrorKind::kProtocol, "empty gateway base URL");
    }
}

HttpGateway::~HttpGateway() = default;

Completion HttpGateway::complete(const CompletionRequest& request) {
    ordered_json body;
    body["model"] = request.model_name;
    body["messages"] = ordered_json::array();
    if (!request.system_prompt.empty()) {
        body["messages"].push_back({{"role", "system"}, {"content", request.system_prompt}});
    }
    body["messages"].push_back({{"role", "user"}, {"content", request.user_prompt}});
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    if (request.want_logprobs) {
        body["logprobs"] = true;
    }
    const std::string payload = body.dump();
    const std::string path = impl_->path_prefix + "/chat/completions";

    httplib::Headers headers;
    if (!impl_->api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + impl_->api_key);
    }

    const RetryPolicy& retry = impl_->retry;
    double backoff = retry.initial_backoff_ms;
    bool saw_rate_limit = false;
    bool saw_timeout = false;
    std::string last_error;

    for (int attempt = 0; attempt < std::max(1, retry.max_attempts); ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(static_cast<int64_t>(backoff)));
            backoff *= retry.multiplier;
        }
        httplib::Client client(impl_->host);
        client.set_connection_timeout(std::chrono::seconds(10));
        client.set_read_timeout(std::chrono::seconds(300));
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
                saw_timeout = true;
            }
            last_error = httplib::to_string(err);
            continue;  // transport failure, retry
        }
        if (res->status == 401 || res->status == 403) {
            throw GatewayError(GatewayErrorKind::kAuth,
                               "authentication failed (HTTP " + std::to_string(res->status) + ")");
        }
        if (res->status == 429) {
            saw_rate_limit = true;
            last_error = "HTTP 429";
            continue;
        }
        if (res->status == 408 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw GatewayError(GatewayErrorKind::kProtocol,
                               "HTTP " + std::to_string(res->status) + ": " + res->body);
        }

        json parsed = json::parse(res->body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
            throw GatewayError(GatewayErrorKind::kProtocol,
                               "malformed completion response body");
        }
        const json& choice = parsed["choices"][0];
        Completion completion;
        if (choice.contains("message") && choice["message"].contains("content") &&
            choice["message"]["content"].is_string()) {
            completion.text = choice["message"]["content"].get<std::string>();
        } else {
            throw GatewayError(GatewayErrorKind::kProtocol, "response lacks message content");
        }
        if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
            completion.finish_reason =
                finish_reason_from_name(choice["finish_reason"].get<std::string>());
        }
        if (request.want_logprobs) {
            std::vector<double> values;
            if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
                const json& lp = choice["logprobs"];
                if (lp.contains("content") && lp["content"].is_array()) {
                    for (const auto& tok : lp["content"]) {
                        if (tok.contains("logprob") && tok["logprob"].is_number()) {
                            values.push_back(std::min(tok["logprob"].get<double>(), 0.0));
                        }
                    }
                } else if (lp.contains("token_logprobs") && lp["token_logprobs"].is_array()) {
                    for (const auto& v : lp["token_logprobs"]) {
                        if (v.is_number()) values.push_back(std::min(v.get<double>(), 0.0));
                    }
                }
            }
            completion.token_logprobs = std::move(values);
        }
        return completion;
    }

    if (saw_rate_limit) {
        throw GatewayError(GatewayErrorKind::kRateLimited,
                           "rate limited after retries: " + last_error);
    }
    if (saw_timeout) {
        throw GatewayError(GatewayErrorKind::kTimeout, "timed out after retries: " + last_error);
    }
    throw GatewayError(GatewayErrorKind::kProtocol, "transport failed after retries: " + last_error);
}

// --- ReplayGateway ---

ReplayGateway::ReplayGateway(const std::filesystem::path& replay_file) {
    json j = json::parse(util::read_file(replay_file));
    for (auto it = j.begin(); it != j.end(); ++it) {
        const json& e = it.value();
        Completion c;
        c.text = e.value("text", std::string());
        if (e.contains("token_logprobs") && e["token_logprobs"].is_array()) {
            std::vector<double> values;
            for (const auto& v : e["token_logprobs"]) values.push_back(v.get<double>());
            c.token_logprobs = std::move(values);
        }
        c.finish_reason = finish_reason_from_name(e.value("finish_reason", "stop"));
        c.error = e.value("error", std::string());
        entries_[it.key()] = std::move(c);
    }
}

Completion ReplayGateway::complete(const CompletionRequest& request) {
    auto it = entries_.find(request_fingerprint(request));
    if (it == entries_.end()) {
        throw GatewayError(GatewayErrorKind::kProtocol,
                           "no replay entry for request fingerprint " +
                               request_fingerprint(request));
    }
    return it->second;
}

// --- RecordingGateway ---

RecordingGateway::RecordingGateway(std::shared_ptr<ChatGateway> inner,
                                   std::filesystem::path out_file)
    : inner_(std::move(inner)), out_file_(std::move(out_file)) {}

RecordingGateway::~RecordingGateway() {
    try {
        save();
    } catch (...) {
        // destructor must not throw; an explicit save() reports failures
    }
}

Completion RecordingGateway::complete(const CompletionRequest& request) {
    Completion c = inner_->complete(request);
    std::lock_guard<std::mutex> lock(mutex_);
    recorded_[request_fingerprint(request)] = {request, c};
    return c;
}

void RecordingGateway::save() {
    std::lock_guard<std::mutex> lock(mutex_);
    ordered_json j = ordered_json::object();
    for (const auto& [fp, pair] : recorded_) {
        const auto& [request, completion] = pair;
        ordered_json e;
        e["text"] = completion.text;
        if (completion.token_logprobs) {
            e["token_logprobs"] = *completion.token_logprobs;
        } else {
            e["token_logprobs"] = nullptr;
        }
        e["finish_reason"] = finish_reason_name(completion.finish_reason);
        if (!completion.error.empty()) e["error"] = completion.error;
        e["request_preview"] = request.user_prompt.substr(0, 120);
        j[fp] = std::move(e);
    }
    util::write_file_atomic(out_file_, j.dump(2) + "\n");
}

// --- MockGateway ---

namespace {

std::string_view slice_between(std::string_view text, std::string_view from,
                               std::string_view to) {
    size_t a = text.find(from);
    if (a == std::string_view::npos) return {};
    a += from.size();
    size_t b = text.find(to, a);
    if (b == std::string_view::npos) return text.substr(a);
    return text.substr(a, b - a);
}

const std::array<std::string_view, 4> kMarkerWords = {"Atlantis", "Wakanda", "Mordor", "Narnia"};

bool contains_marker(std::string_view text) {
    for (auto m : kMarkerWords) {
        if (text.find(m) != std::string_view::npos) return true;
    }
    return false;
}

// Replaces one whitespace-delimited word with a marker word.
std::string replace_one_word(std::string_view text, rng::SplitMix& r) {
    std::vector<std::pair<size_t, size_t>> words;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.emplace_back(start, i);
    }
    if (words.empty()) return std::string(text);
    auto [start, end] = words[r.below(words.size())];
    std::string out(text.substr(0, start));
    out += kMarkerWords[r.below(kMarkerWords.size())];
    out += text.substr(end);
    return out;
}

std::vector<double> fake_logprobs(rng::SplitMix& r, size_t count) {
    std::vector<double> values;
    values.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        values.push_back(-(0.02 + 0.30 * r.unit()));
    }
    return values;
}

}  // namespace

MockGateway::MockGateway(uint64_t seed) : seed_(seed) {}

Completion MockGateway::complete(const CompletionRequest& request) {
    const std::string fp = request_fingerprint(request);
    rng::SplitMix r(rng::derive_seed(seed_, fp));
    const std::string& user = request.user_prompt;

    Completion completion;
    completion.finish_reason = FinishReason::kStop;

    if (user.find("introduce cultural errors into the following") != std::string::npos) {
        std::string src(slice_between(user, "Instruction: ", "\nGenerated Text: "));
        std::string gt(slice_between(user, "\nGenerated Text: ", "\nFollow these rules:"));
        bool minor = user.find(prompts::softgen_rule_minor()) != std::string::npos;
        uint64_t roll = r.below(100);
        std::string mod_src = src;
        std::string mod_gt = gt;
        std::string cultural = "Yes";
        if (roll < 8) {
            cultural = "No";
            mod_gt = replace_one_word(gt, r);
        } else if (roll < 13) {
            // degenerate: no change at all
        } else {
            mod_gt = replace_one_word(gt, r);
            if (r.below(4) == 0) mod_src = replace_one_word(src, r);
        }
        ordered_json out;
        out["Error Type"] = r.coin() ? "incorrect information" : "stereotyping";
        out["Cultural Content"] = cultural;
        out["Rule Adherence"] = "Pointwise token substitutions keep structure and length.";
        out["Explanation"] =
            "The text names a place or custom that does not belong to the culture in question.";
        out["Severity"] = minor ? "minor" : "major";
        out["Modified Instruction"] = mod_src;
        out["Modified Generated Text"] = mod_gt;
        completion.text = "Considering which cultural fact to bend, step by step.\nOUTPUT: " +
                          out.dump();
        if (request.want_logprobs) {
            completion.token_logprobs = fake_logprobs(r, 8 + r.below(5));
        }
        return completion;
    }

    if (user.find("Return an error report in JSON format.") != std::string::npos) {
        std::string instruction(slice_between(user, "Instruction: ", "\nText: "));
        std::string text(
            slice_between(user, "\nText: ", "\nReturn an error report in JSON format."));
        if (r.below(100) < 4) {
            // occasional refusal exercises the parse-failure fallback
            completion.text = "I cannot produce structured output for this pair.";
            if (request.want_logprobs) {
                completion.token_logprobs = fake_logprobs(r, 4 + r.below(3));
            }
            return completion;
        }
        bool marker = contains_marker(instruction) || contains_marker(text);
        bool presence = marker || r.below(10) == 3;
        std::string report;
        if (presence) {
            report =
                R"({"errors":[{"error_type":"incorrect information","severity":"major",)"
                R"("location":"output","span":[0,1],)"
                R"("explanation":"The response asserts a fact that does not hold for the culture in question."}],)"
                R"("culture_related":true})";
        } else {
            report = R"({"errors":[],"culture_related":true})";
        }
        completion.text = "Judging the pair briefly. " + report;
        if (request.want_logprobs) {
            completion.token_logprobs = fake_logprobs(r, 6 + r.below(6));
        }
        return completion;
    }

    if (user.find("'COUNT: count'") != std::string::npos) {
        bool marker = contains_marker(user);
        int count = 0;
        if (marker) {
            count = 1 + static_cast<int>(r.below(2));
        } else if (r.below(100) < 12) {
            count = 1;
        }
        completion.text =
            "Scanning for cultural slips, step by step. COUNT: " + std::to_string(count);
        if (request.want_logprobs) {
            completion.token_logprobs = fake_logprobs(r, 5 + r.below(4));
        }
        return completion;
    }

    if (user.find("'Problem: no problem/very problematic'") != std::string::npos) {
        bool marker = contains_marker(user);
        bool problematic = marker ? r.below(100) < 90 : r.below(100) < 12;
        completion.text = std::string("Weighing the pair briefly. Problem: ") +
                          (problematic ? "very problematic" : "no problem");
        if (request.want_logprobs) {
            completion.token_logprobs = fake_logprobs(r, 4 + r.below(4));
        }
        return completion;
    }

    if (user.find("'Severity: severity'") != std::string::npos) {
        bool marker = contains_marker(user);
        std::string verdict;
        if (marker) {
            verdict = r.below(5) == 0 ? "critical" : "major";
        } else {
            verdict = r.below(100) < 85 ? "none" : "minor";
        }
        completion.text = "Judging severity briefly. Severity: " + verdict;
        if (request.want_logprobs) {
            completion.token_logprobs = fake_logprobs(r, 4 + r.below(4));
        }
        return completion;
    }

    completion.text = "OK.";
    if (request.want_logprobs) {
        completion.token_logprobs = fake_logprobs(r, 2);
    }
    return completion;
}

// --- complete_batch ---

std::vector<Completion> complete_batch(ChatGateway& gw,
                                       const std::vector<CompletionRequest>& requests,
                                       int max_in_flight) {
    if (max_in_flight < 1) {
        throw std::invalid_argument("max_in_flight must be >= 1");
    }
    const size_t n = requests.size();
    std::vector<Completion> results(n);
    if (n == 0) return results;

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                results[i] = gw.complete(requests[i]);
            } catch (const std::exception& e) {
                Completion c;
                c.finish_reason = FinishReason::kError;
                c.error = e.what();
                results[i] = std::move(c);
            }
        }
    };

    size_t workers = std::min(static_cast<size_t>(max_in_flight), n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    size_t failed = 0;
    for (const auto& c : results) {
        if (c.finish_reason == FinishReason::kError) ++failed;
    }
    if (failed == n) {
        throw GatewayError(GatewayErrorKind::kExhausted, "every request in the batch failed");
    }
    return results;
}

}  // namespace excam::gateway
