#include "excam/config.hpp"

#include <cstdlib>

#include "json.hpp"

#include "excam/util.hpp"

namespace excam {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_absolute()) return path;
    return base / path;
}

}  // namespace

Config Config::load(const std::filesystem::path& path) {
    json j = json::parse(util::read_file(path));
    const std::filesystem::path base = path.has_parent_path()
                                           ? path.parent_path()
                                           : std::filesystem::path(".");

    Config config;
    if (!j.contains("seed") || !j["seed"].is_number_integer()) {
        throw std::runtime_error("config: 'seed' is mandatory (no wall-clock defaults)");
    }
    config.seed = j["seed"].get<uint64_t>();
    config.output_dir = resolve(base, j.value("output_dir", std::string("out")));
    if (!j.contains("template_pool_path")) {
        throw std::runtime_error("config: 'template_pool_path' is mandatory");
    }
    config.template_pool_path = resolve(base, j["template_pool_path"].get<std::string>());
    if (!std::filesystem::exists(config.template_pool_path)) {
        throw std::runtime_error("config: template pool file not found: " +
                                 config.template_pool_path.string());
    }

    if (j.contains("ratios")) {
        const json& r = j["ratios"];
        if (!r.is_array() || r.size() != 3) {
            throw std::runtime_error("config: 'ratios' must be [train, dev, test]");
        }
        config.ratios.train = r[0].get<double>();
        config.ratios.dev = r[1].get<double>();
        config.ratios.test = r[2].get<double>();
    }

    if (!j.contains("sources") || !j["sources"].is_array() || j["sources"].empty()) {
        throw std::runtime_error("config: 'sources' must be a non-empty array");
    }
    for (const json& s : j["sources"]) {
        adapters::SourceSpec spec;
        spec.name = s.at("name").get<std::string>();
        spec.path = resolve(base, s.at("path").get<std::string>());
        if (!std::filesystem::exists(spec.path)) {
            throw std::runtime_error("config: source file not found: " + spec.path.string());
        }
        spec.task_type = task_type_from_string(s.at("task_type").get<std::string>());
        spec.stratify_key = s.value("stratify_key", std::string("none"));
        spec.cap = s.value("cap", 5000);
        if (s.contains("binary_labels")) {
            for (const auto& label : s["binary_labels"]) {
                spec.binary_labels.push_back(label.get<std::string>());
            }
        }
        spec.soft_errors = s.value("soft_errors", false);
        config.sources.push_back(std::move(spec));
    }

    if (j.contains("gateway")) {
        const json& g = j["gateway"];
        config.gateway.kind = g.value("kind", std::string("http"));
        config.gateway.base_url = g.value("base_url", std::string());
        config.gateway.api_key = g.value("api_key", std::string());
        config.gateway.max_in_flight = g.value("max_in_flight", 4);
        config.gateway.mock_seed = g.value("mock_seed", uint64_t{0});
        if (g.contains("retry")) {
            const json& r = g["retry"];
            config.gateway.retry.max_attempts = r.value("max_attempts", 4);
            config.gateway.retry.initial_backoff_ms = r.value("initial_backoff_ms", 250);
            config.gateway.retry.multiplier = r.value("multiplier", 2.0);
        }
        auto load_profile = [&](const char* key, GatewayProfile& profile) {
            if (!g.contains(key)) return;
            const json& p = g[key];
            profile.model = p.value("model", profile.model);
            profile.temperature = p.value("temperature", profile.temperature);
            profile.max_tokens = p.value("max_tokens", profile.max_tokens);
        };
        load_profile("generator", config.gateway.generator);
        load_profile("judge", config.gateway.judge);
    }

    if (const char* env = std::getenv("EXCAM_API_BASE"); env != nullptr && *env != '\0') {
        config.gateway.base_url = env;
    }
    if (const char* env = std::getenv("EXCAM_API_KEY"); env != nullptr && *env != '\0') {
        config.gateway.api_key = env;
    }
    return config;
}

}  // namespace excam
