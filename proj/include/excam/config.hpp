#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "excam/adapters.hpp"
#include "excam/gateway.hpp"

// Config file: a single JSON object driving the whole pipeline. All
// randomness flows from the mandatory seed; relative paths resolve against
// the config file's directory.

namespace excam {

struct GatewayProfile {
    std::string model = "default";
    double temperature = 0.0;
    int max_tokens = 1024;
};

struct GatewayConfig {
    std::string kind = "http";  // "http" or "mock"
    std::string base_url;       // EXCAM_API_BASE overrides/fills
    std::string api_key;        // EXCAM_API_KEY overrides/fills
    int max_in_flight = 4;
    gateway::RetryPolicy retry;
    GatewayProfile generator{.model = "generator", .temperature = 0.6, .max_tokens = 2048};
    GatewayProfile judge{.model = "judge", .temperature = 0.0, .max_tokens = 1024};
    uint64_t mock_seed = 0;
};

struct Config {
    uint64_t seed = 0;
    std::filesystem::path output_dir;
    std::filesystem::path template_pool_path;
    adapters::SplitRatios ratios;
    std::vector<adapters::SourceSpec> sources;
    GatewayConfig gateway;

    // Throws on missing seed, unreadable referenced paths or malformed
    // fields.
    static Config load(const std::filesystem::path& path);
};

}  // namespace excam
