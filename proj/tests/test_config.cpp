#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "etchr/config.hpp"

using namespace etchr;
namespace fs = std::filesystem;

namespace {

RunConfig parse_text(const std::string& text) {
    return parse_run_config(nlohmann::json::parse(text));
}

std::string thrown_message(const std::string& text) {
    try {
        parse_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("an empty config document yields the defaults") {
    auto config = parse_text("{}");
    REQUIRE_FALSE(config.editor.has_value());
    REQUIRE_FALSE(config.understander.has_value());
    REQUIRE(config.reflection);
    REQUIRE(config.parallelism == 1);
    REQUIRE(config.on_unparsable == UnparsablePolicy::fallback);
    REQUIRE(config.max_failure_ratio == 1.0);
    REQUIRE(config.k == 4);
    REQUIRE(config.alpha == 0.5);
    REQUIRE(config.beta == 0.5);
    REQUIRE(config.reward_temperature == 1.0);
    REQUIRE(config.prompt_overrides.empty());
    REQUIRE(config.dataset.empty());
    REQUIRE_FALSE(config.generation.seed.has_value());
}

TEST_CASE("a fully populated document lands in every field") {
    auto config = parse_text(R"({
        "backends": {
            "editor": {
                "base_url": "http://localhost:9000/v1",
                "model": "edit-model",
                "api_key_env": "EDIT_KEY",
                "timeout_s": 30.0,
                "max_in_flight": 2,
                "edit_multipart": true,
                "retry": {"max_attempts": 5, "initial_backoff_ms": 250}
            },
            "understander": {"base_url": "http://localhost:9001/v1", "model": "chat-model"},
            "judge": {"base_url": "http://localhost:9002/v1", "model": "judge-model"}
        },
        "pipeline": {
            "reflection": false,
            "parallelism": 8,
            "on_unparsable": "proceed",
            "max_failure_ratio": 0.25,
            "generation": {"seed": 42, "guidance_scale": 1.0, "steps": 30,
                           "out_width": 512, "out_height": 512, "timeout_s": 90.0}
        },
        "rewards": {"k": 8, "alpha": 0.7, "beta": 0.3, "temperature": 0.5},
        "prompts": {"maze": {"task": "draw it"}},
        "paths": {"dataset": "data/maze", "out": "runs/r1"}
    })");

    REQUIRE(config.editor.has_value());
    REQUIRE(config.editor->base_url == "http://localhost:9000/v1");
    REQUIRE(config.editor->model == "edit-model");
    REQUIRE(config.editor->api_key_env == "EDIT_KEY");
    REQUIRE(config.editor->timeout_s == 30.0);
    REQUIRE(config.editor->max_in_flight == 2);
    REQUIRE(config.editor->edit_multipart);
    REQUIRE(config.editor->retry.max_attempts == 5);
    REQUIRE(config.editor->retry.initial_backoff == std::chrono::milliseconds(250));
    REQUIRE(config.understander->model == "chat-model");
    REQUIRE(config.judge->model == "judge-model");

    REQUIRE_FALSE(config.reflection);
    REQUIRE(config.parallelism == 8);
    REQUIRE(config.on_unparsable == UnparsablePolicy::proceed);
    REQUIRE(config.max_failure_ratio == 0.25);
    REQUIRE(config.generation.seed == 42);
    REQUIRE(config.generation.guidance_scale == 1.0);
    REQUIRE(config.generation.steps == 30);
    REQUIRE(config.generation.out_width == 512);
    REQUIRE(config.generation.timeout_s == 90.0);

    REQUIRE(config.k == 8);
    REQUIRE(config.alpha == 0.7);
    REQUIRE(config.beta == 0.3);
    REQUIRE(config.reward_temperature == 0.5);

    REQUIRE(config.prompt_overrides.size() == 1);
    REQUIRE(config.prompt_overrides[0].family == TaskFamily::maze);
    REQUIRE(config.prompt_overrides[0].role == PromptRole::task);
    REQUIRE(config.dataset == fs::path("data/maze"));
    REQUIRE(config.out == fs::path("runs/r1"));
}

TEST_CASE("unknown keys are rejected with their full path") {
    REQUIRE(thrown_message(R"({"pipelines": {}})").find("'pipelines'") != std::string::npos);
    REQUIRE(thrown_message(R"({"pipeline": {"paralellism": 2}})")
                .find("'pipeline.paralellism'") != std::string::npos);
    REQUIRE(thrown_message(
                R"({"backends": {"editor": {"base_url": "u", "model": "m", "api_key": "k"}}})")
                .find("'backends.editor.api_key'") != std::string::npos);
    REQUIRE(thrown_message(R"({"backends": {"editor": {"base_url": "u", "model": "m",
                                "retry": {"attempts": 9}}}})")
                .find("'backends.editor.retry.attempts'") != std::string::npos);
    REQUIRE(thrown_message(R"({"rewards": {"K": 4}})").find("'rewards.K'") !=
            std::string::npos);
    REQUIRE(thrown_message(R"({"prompts": {"labyrinth": {}}})").find("'prompts.labyrinth'") !=
            std::string::npos);
    REQUIRE(thrown_message(R"({"prompts": {"maze": {"hint": "x"}}})")
                .find("'prompts.maze.hint'") != std::string::npos);
    REQUIRE(thrown_message(R"({"paths": {"output": "x"}})").find("'paths.output'") !=
            std::string::npos);
}

TEST_CASE("missing required endpoint keys name the absent path") {
    REQUIRE(thrown_message(R"({"backends": {"editor": {"model": "m"}}})")
                .find("'backends.editor.base_url'") != std::string::npos);
    REQUIRE(thrown_message(R"({"backends": {"judge": {"base_url": "u"}}})")
                .find("'backends.judge.model'") != std::string::npos);
}

TEST_CASE("mistyped values are rejected with their path") {
    REQUIRE(thrown_message(R"({"pipeline": {"reflection": "yes"}})")
                .find("'pipeline.reflection'") != std::string::npos);
    REQUIRE(thrown_message(R"({"rewards": {"alpha": "big"}})").find("'rewards.alpha'") !=
            std::string::npos);
    REQUIRE(thrown_message(R"({"backends": {"editor": 7}})").find("backends.editor") !=
            std::string::npos);
    REQUIRE(thrown_message(R"({"prompts": {"maze": {"task": 3}}})")
                .find("'prompts.maze.task'") != std::string::npos);
}

TEST_CASE("semantic bounds are enforced") {
    REQUIRE_THROWS_AS(parse_text(R"({"pipeline": {"parallelism": 0}})"), ConfigError);
    REQUIRE_THROWS_AS(parse_text(R"({"pipeline": {"on_unparsable": "panic"}})"), ConfigError);
    REQUIRE_THROWS_AS(parse_text(R"({"rewards": {"k": 0}})"), ConfigError);
    REQUIRE_THROWS_AS(parse_text(R"({"rewards": {"alpha": -1}})"), ConfigError);
    REQUIRE_THROWS_AS(parse_text(R"({"rewards": {"temperature": -0.5}})"), ConfigError);
    REQUIRE_THROWS_AS(parse_text(R"({"pipeline": {"generation": {"timeout_s": 0}}})"),
                      std::invalid_argument);
}

TEST_CASE("prompt overrides reach the registry and clear the canonical flag") {
    auto config = parse_text(R"({"prompts": {"maze": {"verify": "is the path fine?"}}})");
    auto registry = config.make_registry();
    REQUIRE(get_prompt(registry, TaskFamily::maze, PromptRole::verify) == "is the path fine?");
    REQUIRE_FALSE(registry.get(TaskFamily::maze, PromptRole::verify).canonical);
    // untouched slots keep their built-in text
    REQUIRE(registry.get(TaskFamily::jigsaw, PromptRole::verify).canonical);
}

TEST_CASE("pipeline settings translate into a pipeline configuration") {
    auto config = parse_text(R"({
        "pipeline": {"reflection": false, "on_unparsable": "proceed",
                     "max_failure_ratio": 0.5,
                     "generation": {"seed": 7}}
    })");
    auto pipeline = config.make_pipeline_config();
    REQUIRE_FALSE(pipeline.reflection);
    REQUIRE(pipeline.on_unparsable == UnparsablePolicy::proceed);
    REQUIRE(pipeline.max_failure_ratio == 0.5);
    REQUIRE(pipeline.gen.seed == 7);
}

TEST_CASE("config files load from disk with helpful failure modes") {
    fs::path dir = fs::temp_directory_path() / "etchr_config";
    fs::remove_all(dir);
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "run.json");
        out << R"({"pipeline": {"parallelism": 3}})";
    }
    auto config = load_run_config(dir / "run.json");
    REQUIRE(config.parallelism == 3);

    REQUIRE_THROWS_AS(load_run_config(dir / "absent.json"), IoError);

    {
        std::ofstream out(dir / "broken.json");
        out << "{ not json";
    }
    REQUIRE_THROWS_AS(load_run_config(dir / "broken.json"), ParseError);
    fs::remove_all(dir);
}

TEST_CASE("the key help documents every section") {
    auto help = config_key_help();
    for (const char* key :
         {"backends.editor", "base_url", "api_key_env", "retry.max_attempts", "reflection",
          "parallelism", "on_unparsable", "max_failure_ratio", "generation.seed", "alpha",
          "temperature", "prompts.<family>", "paths.dataset"})
        REQUIRE(help.find(key) != std::string::npos);
}
