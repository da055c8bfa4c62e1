#pragma once

// Edit-Verify-Reason inference pipeline: propose an edit, binary-check its
// reliability, then reason conditioned on the edit or fall back to the
// original image. Reflection off disables the check entirely.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include <json.hpp>

#include "etchr/backends.hpp"
#include "etchr/prompts.hpp"
#include "etchr/task.hpp"

namespace etchr {

enum class Conditioning { original_only, original_plus_edit };

inline std::string to_string(Conditioning c) {
    return c == Conditioning::original_only ? "original_only" : "original_plus_edit";
}

enum class UnparsablePolicy { fallback, proceed };

struct PipelineConfig {
    bool reflection = true;
    UnparsablePolicy on_unparsable = UnparsablePolicy::fallback;
    GenerationParams gen;
    PromptRegistry prompts = builtin_prompts();
    double max_failure_ratio = 1.0;    // run_dataset aborts above this
    std::atomic<bool>* cancel = nullptr; // cooperative cancellation for run_dataset
};

struct StepStats {
    double wall_ms = 0;
    int backend_calls = 0;
};

struct PipelineTrace {
    std::string instance_id;
    bool failed = false;          // instance produced no answer
    std::string error;            // failure or degradation detail
    bool editor_failed = false;   // edit step degraded to the fallback path
    Verdict verify_verdict = Verdict::skipped;
    Conditioning conditioning = Conditioning::original_only;
    std::vector<std::string> raw_model_outputs;
    std::string final_answer;
    StepStats edit_step, verify_step, reason_step;

    std::optional<Image> edit_image; // in-memory only
    std::optional<std::string> edit_path; // set once persisted
};

// The reflection/verdict/conditioning consistency rule every trace obeys.
inline bool trace_invariants_hold(const PipelineTrace& trace, const PipelineConfig& config) {
    if (trace.failed)
        return trace.final_answer.empty();
    const bool plus = trace.conditioning == Conditioning::original_plus_edit;
    if (!config.reflection)
        return plus && trace.verify_verdict == Verdict::skipped;
    switch (trace.verify_verdict) {
    case Verdict::one: return plus;
    case Verdict::zero: return !plus;
    case Verdict::unparsable: return plus == (config.on_unparsable == UnparsablePolicy::proceed);
    case Verdict::skipped: return false; // reflection on always verifies
    }
    return false;
}

namespace detail {

class StepTimer {
  public:
    explicit StepTimer(StepStats& stats)
        : stats_(stats), start_(std::chrono::steady_clock::now()) {}
    ~StepTimer() {
        stats_.wall_ms += std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - start_)
                              .count();
    }

  private:
    StepStats& stats_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace detail

// Runs one instance through edit → verify → reason. Editor failure with
// reflection on degrades to the fallback path (verdict 0); with reflection
// off it propagates, since no verification exists to contain it.
inline PipelineTrace run_instance(const std::filesystem::path& dataset_root,
                                  const TaskInstance& instance, EditorBackend& editor,
                                  ChatBackend& understander, const PipelineConfig& config) {
    config.gen.validate();
    PipelineTrace trace;
    trace.instance_id = instance.id;

    const Image base = load_png((dataset_root / instance.image_path).string());

    // Step 1: edit
    {
        detail::StepTimer timer(trace.edit_step);
        const std::string edit_prompt =
            compose_edit_prompt(config.prompts, instance.family, instance.question);
        try {
            trace.edit_step.backend_calls += 1;
            trace.edit_image = editor.edit(base, edit_prompt, config.gen);
        } catch (const std::exception& e) {
            if (!config.reflection)
                throw;
            trace.editor_failed = true;
            trace.error = std::string("editor failed: ") + e.what();
        }
    }

    // Step 2: verify
    if (!config.reflection) {
        trace.verify_verdict = Verdict::skipped;
        trace.conditioning = Conditioning::original_plus_edit;
    } else if (trace.editor_failed) {
        trace.verify_verdict = Verdict::zero;
        trace.conditioning = Conditioning::original_only;
    } else {
        detail::StepTimer timer(trace.verify_step);
        const std::string verify_prompt =
            get_prompt(config.prompts, instance.family, PromptRole::verify) + "\n" +
            instance.question;
        trace.verify_step.backend_calls += 1;
        auto texts = understander.complete({base, *trace.edit_image}, verify_prompt, 0.0, 1);
        trace.raw_model_outputs.push_back(texts.at(0));
        Verdict verdict = parse_binary_verdict(texts.at(0));
        if (verdict == Verdict::unparsable && config.on_unparsable == UnparsablePolicy::fallback)
            verdict = Verdict::zero; // fail-safe: treat as "edit not reliable"
        trace.verify_verdict = verdict;
        trace.conditioning = verdict == Verdict::one || verdict == Verdict::unparsable
                                 ? Conditioning::original_plus_edit
                                 : Conditioning::original_only;
    }

    // Step 3: reason
    {
        detail::StepTimer timer(trace.reason_step);
        std::vector<Image> images;
        std::string prompt;
        if (trace.conditioning == Conditioning::original_plus_edit) {
            images = {base, *trace.edit_image};
            prompt = get_prompt(config.prompts, instance.family, PromptRole::reason) + "\n" +
                     instance.question;
        } else {
            images = {base};
            prompt = instance.question;
        }
        trace.reason_step.backend_calls += 1;
        auto texts = understander.complete(images, prompt, 0.0, 1);
        trace.raw_model_outputs.push_back(texts.at(0));
        trace.final_answer = texts.at(0);
    }
    return trace;
}

struct RunResult {
    std::vector<PipelineTrace> traces; // manifest order
    std::size_t failures = 0;
    bool aborted = false; // failure-rate threshold tripped or cancelled
};

// Bounded-parallelism map over the manifest. Per-instance failures are
// recorded in their trace and never abort the run unless the failure ratio
// exceeds config.max_failure_ratio, at which point remaining instances are
// marked and the partial result returned.
inline RunResult run_dataset(const DatasetManifest& manifest, EditorBackend& editor,
                             ChatBackend& understander, const PipelineConfig& config,
                             int parallelism = 1) {
    if (parallelism < 1)
        throw std::invalid_argument("run_dataset: parallelism must be >= 1");
    const std::size_t n = manifest.instances.size();
    RunResult result;
    result.traces.resize(n);

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> failures{0};
    std::atomic<bool> abort{false};
    const std::size_t failure_budget =
        std::size_t(config.max_failure_ratio * double(n));

    auto worker = [&] {
        for (;;) {
            if (abort.load() || (config.cancel && config.cancel->load()))
                return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            const auto& instance = manifest.instances[i];
            try {
                result.traces[i] =
                    run_instance(manifest.root, instance, editor, understander, config);
            } catch (const std::exception& e) {
                PipelineTrace failed;
                failed.instance_id = instance.id;
                failed.failed = true;
                failed.error = e.what();
                result.traces[i] = std::move(failed);
                if (failures.fetch_add(1) + 1 > failure_budget)
                    abort.store(true);
            }
        }
    };

    std::vector<std::thread> pool;
    const int threads = int(std::min<std::size_t>(std::size_t(parallelism), std::max<std::size_t>(n, 1)));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();

    for (std::size_t i = 0; i < n; ++i) {
        if (result.traces[i].instance_id.empty()) { // never scheduled
            result.traces[i].instance_id = manifest.instances[i].id;
            result.traces[i].failed = true;
            result.traces[i].error = (config.cancel && config.cancel->load())
                                         ? "cancelled before start"
                                         : "aborted before start";
        }
    }
    result.failures = 0;
    for (const auto& t : result.traces)
        if (t.failed)
            ++result.failures;
    result.aborted = abort.load() || (config.cancel && config.cancel->load());
    return result;
}

// ── Persistence ──────────────────────────────────────────────────────

namespace detail {

inline nlohmann::json step_to_json(const StepStats& s) {
    return {{"wall_ms", s.wall_ms}, {"calls", s.backend_calls}};
}

inline StepStats step_from_json(const nlohmann::json& j) {
    StepStats s;
    s.wall_ms = j.value("wall_ms", 0.0);
    s.backend_calls = j.value("calls", 0);
    return s;
}

inline Verdict verdict_from_string(const std::string& s) {
    if (s == "1")
        return Verdict::one;
    if (s == "0")
        return Verdict::zero;
    if (s == "unparsable")
        return Verdict::unparsable;
    if (s == "skipped")
        return Verdict::skipped;
    throw ParseError("unknown verdict '" + s + "'");
}

} // namespace detail

// Layout: <run_dir>/traces.jsonl, <run_dir>/edits/<id>.png, <run_dir>/meta.json.
// Nothing in the output depends on the wall clock except the recorded step
// durations inside each trace.
inline void persist_run(const std::filesystem::path& run_dir, const std::string& run_id,
                        const PipelineConfig& config, RunResult& result) {
    std::filesystem::create_directories(run_dir / "edits");
    for (auto& trace : result.traces) {
        if (trace.edit_image) {
            trace.edit_path = "edits/" + trace.instance_id + ".png";
            save_png(*trace.edit_image, (run_dir / *trace.edit_path).string());
        }
    }
    std::ofstream out(run_dir / "traces.jsonl", std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + (run_dir / "traces.jsonl").string());
    for (const auto& trace : result.traces) {
        nlohmann::json j = {
            {"id", trace.instance_id},
            {"failed", trace.failed},
            {"error", trace.error},
            {"editor_failed", trace.editor_failed},
            {"verdict", to_string(trace.verify_verdict)},
            {"conditioning", to_string(trace.conditioning)},
            {"raw_outputs", trace.raw_model_outputs},
            {"final_answer", trace.final_answer},
            {"steps",
             {{"edit", detail::step_to_json(trace.edit_step)},
              {"verify", detail::step_to_json(trace.verify_step)},
              {"reason", detail::step_to_json(trace.reason_step)}}},
        };
        if (trace.edit_path)
            j["edit"] = *trace.edit_path;
        out << j.dump() << '\n';
    }
    nlohmann::json meta = {
        {"run_id", run_id},
        {"reflection", config.reflection},
        {"instances", result.traces.size()},
        {"failures", result.failures},
        {"aborted", result.aborted},
    };
    std::ofstream meta_out(run_dir / "meta.json", std::ios::binary | std::ios::trunc);
    meta_out << meta.dump(2) << '\n';
}

inline std::vector<PipelineTrace> load_traces(const std::filesystem::path& run_dir) {
    std::ifstream in(run_dir / "traces.jsonl", std::ios::binary);
    if (!in)
        throw IoError("cannot read " + (run_dir / "traces.jsonl").string());
    std::vector<PipelineTrace> traces;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("traces line " + std::to_string(line_no) + ": " + e.what());
        }
        PipelineTrace t;
        t.instance_id = j.at("id").get<std::string>();
        t.failed = j.value("failed", false);
        t.error = j.value("error", std::string());
        t.editor_failed = j.value("editor_failed", false);
        t.verify_verdict = detail::verdict_from_string(j.at("verdict").get<std::string>());
        t.conditioning = j.at("conditioning").get<std::string>() == "original_plus_edit"
                             ? Conditioning::original_plus_edit
                             : Conditioning::original_only;
        if (j.contains("raw_outputs"))
            t.raw_model_outputs = j["raw_outputs"].get<std::vector<std::string>>();
        t.final_answer = j.value("final_answer", std::string());
        if (j.contains("steps")) {
            t.edit_step = detail::step_from_json(j["steps"].value("edit", nlohmann::json::object()));
            t.verify_step = detail::step_from_json(j["steps"].value("verify", nlohmann::json::object()));
            t.reason_step = detail::step_from_json(j["steps"].value("reason", nlohmann::json::object()));
        }
        if (j.contains("edit"))
            t.edit_path = j["edit"].get<std::string>();
        traces.push_back(std::move(t));
    }
    return traces;
}

} // namespace etchr
