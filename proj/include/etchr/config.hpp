#pragma once

// Declarative run configuration: one JSON key tree covering backends,
// pipeline behaviour, reward constants, prompt overrides, and paths.
// Unknown or mistyped keys are rejected by full key path. Credentials never
// live here; endpoints name the environment variable holding their key.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>

#include <json.hpp>

#include "etchr/http_backends.hpp"
#include "etchr/pipeline.hpp"

namespace etchr {

struct PromptOverride {
    TaskFamily family;
    PromptRole role;
    std::string text;
};

struct RunConfig {
    std::optional<EndpointConfig> editor;
    std::optional<EndpointConfig> understander;
    std::optional<EndpointConfig> judge; // falls back to understander when absent

    bool reflection = true;
    int parallelism = 1;
    UnparsablePolicy on_unparsable = UnparsablePolicy::fallback;
    double max_failure_ratio = 1.0;
    GenerationParams generation;

    int k = 4;
    double alpha = 0.5;
    double beta = 0.5;
    double reward_temperature = 1.0;

    std::vector<PromptOverride> prompt_overrides;
    std::filesystem::path dataset;
    std::filesystem::path out;

    PromptRegistry make_registry() const {
        PromptRegistry registry = builtin_prompts();
        for (const auto& o : prompt_overrides)
            registry.set(o.family, o.role, o.text);
        return registry;
    }

    PipelineConfig make_pipeline_config() const {
        PipelineConfig config;
        config.reflection = reflection;
        config.on_unparsable = on_unparsable;
        config.gen = generation;
        config.prompts = make_registry();
        config.max_failure_ratio = max_failure_ratio;
        return config;
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& prefix,
                                const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + (prefix.empty() ? key : prefix + "." + key) + "'");
}

inline void require_object(const nlohmann::json& j, const std::string& path) {
    if (!j.is_object())
        throw ConfigError("config key '" + path + "' must be an object");
}

template <typename T>
T typed_field(const nlohmann::json& j, const std::string& key, const std::string& prefix,
              T fallback) {
    if (!j.contains(key))
        return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + (prefix.empty() ? key : prefix + "." + key) +
                          "' has the wrong type");
    }
}

inline EndpointConfig endpoint_from_json(const nlohmann::json& j, const std::string& prefix) {
    require_object(j, prefix);
    reject_unknown_keys(j, prefix,
                        {"base_url", "model", "api_key_env", "timeout_s", "max_in_flight",
                         "edit_multipart", "retry"});
    EndpointConfig endpoint;
    for (const char* required : {"base_url", "model"})
        if (!j.contains(required))
            throw ConfigError("missing required config key '" + prefix + "." + required + "'");
    endpoint.base_url = typed_field<std::string>(j, "base_url", prefix, "");
    endpoint.model = typed_field<std::string>(j, "model", prefix, "");
    endpoint.api_key_env = typed_field<std::string>(j, "api_key_env", prefix, "");
    endpoint.timeout_s = typed_field<double>(j, "timeout_s", prefix, endpoint.timeout_s);
    endpoint.max_in_flight = typed_field<int>(j, "max_in_flight", prefix, endpoint.max_in_flight);
    endpoint.edit_multipart =
        typed_field<bool>(j, "edit_multipart", prefix, endpoint.edit_multipart);
    if (j.contains("retry")) {
        const std::string retry_prefix = prefix + ".retry";
        require_object(j.at("retry"), retry_prefix);
        reject_unknown_keys(j.at("retry"), retry_prefix, {"max_attempts", "initial_backoff_ms"});
        endpoint.retry.max_attempts =
            typed_field<int>(j.at("retry"), "max_attempts", retry_prefix,
                             endpoint.retry.max_attempts);
        endpoint.retry.initial_backoff = std::chrono::milliseconds(
            typed_field<int>(j.at("retry"), "initial_backoff_ms", retry_prefix,
                             int(endpoint.retry.initial_backoff.count())));
    }
    endpoint.validate();
    return endpoint;
}

} // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    detail::require_object(j, "(root)");
    detail::reject_unknown_keys(j, "", {"backends", "pipeline", "rewards", "prompts", "paths"});
    RunConfig config;

    if (j.contains("backends")) {
        const auto& backends = j.at("backends");
        detail::require_object(backends, "backends");
        detail::reject_unknown_keys(backends, "backends", {"editor", "understander", "judge"});
        if (backends.contains("editor"))
            config.editor = detail::endpoint_from_json(backends.at("editor"), "backends.editor");
        if (backends.contains("understander"))
            config.understander =
                detail::endpoint_from_json(backends.at("understander"), "backends.understander");
        if (backends.contains("judge"))
            config.judge = detail::endpoint_from_json(backends.at("judge"), "backends.judge");
    }

    if (j.contains("pipeline")) {
        const auto& pipeline = j.at("pipeline");
        detail::require_object(pipeline, "pipeline");
        detail::reject_unknown_keys(
            pipeline, "pipeline",
            {"reflection", "parallelism", "on_unparsable", "max_failure_ratio", "generation"});
        config.reflection =
            detail::typed_field<bool>(pipeline, "reflection", "pipeline", config.reflection);
        config.parallelism =
            detail::typed_field<int>(pipeline, "parallelism", "pipeline", config.parallelism);
        if (config.parallelism < 1)
            throw ConfigError("config key 'pipeline.parallelism' must be >= 1");
        config.max_failure_ratio = detail::typed_field<double>(
            pipeline, "max_failure_ratio", "pipeline", config.max_failure_ratio);
        if (pipeline.contains("on_unparsable")) {
            const auto policy =
                detail::typed_field<std::string>(pipeline, "on_unparsable", "pipeline", "");
            if (policy == "fallback")
                config.on_unparsable = UnparsablePolicy::fallback;
            else if (policy == "proceed")
                config.on_unparsable = UnparsablePolicy::proceed;
            else
                throw ConfigError("config key 'pipeline.on_unparsable' must be "
                                  "'fallback' or 'proceed'");
        }
        if (pipeline.contains("generation")) {
            const auto& gen = pipeline.at("generation");
            const std::string prefix = "pipeline.generation";
            detail::require_object(gen, prefix);
            detail::reject_unknown_keys(
                gen, prefix, {"seed", "guidance_scale", "steps", "out_width", "out_height",
                              "timeout_s"});
            if (gen.contains("seed"))
                config.generation.seed =
                    detail::typed_field<uint64_t>(gen, "seed", prefix, 0);
            if (gen.contains("guidance_scale"))
                config.generation.guidance_scale =
                    detail::typed_field<double>(gen, "guidance_scale", prefix, 0.0);
            if (gen.contains("steps"))
                config.generation.steps = detail::typed_field<int>(gen, "steps", prefix, 0);
            if (gen.contains("out_width"))
                config.generation.out_width =
                    detail::typed_field<int>(gen, "out_width", prefix, 0);
            if (gen.contains("out_height"))
                config.generation.out_height =
                    detail::typed_field<int>(gen, "out_height", prefix, 0);
            config.generation.timeout_s = detail::typed_field<double>(
                gen, "timeout_s", prefix, config.generation.timeout_s);
            config.generation.validate();
        }
    }

    if (j.contains("rewards")) {
        const auto& rewards = j.at("rewards");
        detail::require_object(rewards, "rewards");
        detail::reject_unknown_keys(rewards, "rewards", {"k", "alpha", "beta", "temperature"});
        config.k = detail::typed_field<int>(rewards, "k", "rewards", config.k);
        if (config.k < 1)
            throw ConfigError("config key 'rewards.k' must be >= 1");
        config.alpha = detail::typed_field<double>(rewards, "alpha", "rewards", config.alpha);
        config.beta = detail::typed_field<double>(rewards, "beta", "rewards", config.beta);
        if (config.alpha < 0 || config.beta < 0)
            throw ConfigError("config keys 'rewards.alpha'/'rewards.beta' must be >= 0");
        config.reward_temperature = detail::typed_field<double>(rewards, "temperature",
                                                                "rewards", config.reward_temperature);
        if (config.reward_temperature < 0)
            throw ConfigError("config key 'rewards.temperature' must be >= 0");
    }

    if (j.contains("prompts")) {
        const auto& prompts = j.at("prompts");
        detail::require_object(prompts, "prompts");
        for (const auto& [family_key, roles] : prompts.items()) {
            TaskFamily family;
            try {
                family = task_family_from_string(family_key);
            } catch (const std::exception&) {
                throw ConfigError("unknown config key 'prompts." + family_key + "'");
            }
            const std::string prefix = "prompts." + family_key;
            detail::require_object(roles, prefix);
            detail::reject_unknown_keys(roles, prefix, {"task", "verify", "reason"});
            for (const auto& [role_key, text] : roles.items()) {
                if (!text.is_string())
                    throw ConfigError("config key '" + prefix + "." + role_key +
                                      "' has the wrong type");
                config.prompt_overrides.push_back(PromptOverride{
                    family, prompt_role_from_string(role_key), text.get<std::string>()});
            }
        }
    }

    if (j.contains("paths")) {
        const auto& paths = j.at("paths");
        detail::require_object(paths, "paths");
        detail::reject_unknown_keys(paths, "paths", {"dataset", "out"});
        config.dataset = detail::typed_field<std::string>(paths, "dataset", "paths", "");
        config.out = detail::typed_field<std::string>(paths, "out", "paths", "");
    }
    return config;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("config file " + path.string() + ": " + e.what());
    }
    return parse_run_config(j);
}

// The complete documented key tree, shown by the command-line help.
inline std::string config_key_help() {
    return "Config file keys (JSON):\n"
           "  backends.editor|understander|judge:\n"
           "    base_url (required)      e.g. \"http://host:port/v1\"\n"
           "    model (required)         model identifier sent on the wire\n"
           "    api_key_env              env var holding the bearer token\n"
           "    timeout_s                per-call timeout (default 60)\n"
           "    max_in_flight            concurrent-call cap (default 4)\n"
           "    edit_multipart           send image edits as multipart form\n"
           "    retry.max_attempts       default 3\n"
           "    retry.initial_backoff_ms default 100, doubles per retry\n"
           "  pipeline:\n"
           "    reflection               verify edits before reasoning (default true)\n"
           "    parallelism              worker threads (default 1)\n"
           "    on_unparsable            'fallback' (default) or 'proceed'\n"
           "    max_failure_ratio        abort threshold (default 1.0)\n"
           "    generation.seed|guidance_scale|steps|out_width|out_height|timeout_s\n"
           "  rewards:\n"
           "    k                        decodings per reward (default 4)\n"
           "    alpha, beta              combination weights (default 0.5 each)\n"
           "    temperature              reward decoding temperature (default 1.0)\n"
           "  prompts.<family>.task|verify|reason   prompt text overrides\n"
           "  paths.dataset, paths.out  default dataset root and output dir\n";
}

} // namespace etchr
