#pragma once

// Pass@1 scoring, benchmark aggregation with baseline deltas, report
// emission, and the two diagnostic experiments: edit correctness as a
// function of path depth, and raw-question vs enhanced-instruction editing.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>

#include <json.hpp>

#include "etchr/grid_tasks.hpp"
#include "etchr/pipeline.hpp"
#include "etchr/rewards.hpp"

namespace etchr {

struct BenchmarkResult {
    std::string name;
    std::size_t n = 0;
    std::size_t correct = 0;
    double pass_at_1 = 0.0;
};

struct RunReport {
    std::vector<BenchmarkResult> results;
    double average = 0.0;
    std::shared_ptr<const RunReport> baseline; // enables delta rows
};

// Fraction of traces whose final answer grades correct; failed instances
// count as incorrect. Traces must align 1:1 with the manifest.
inline BenchmarkResult pass_at_1(const std::string& name,
                                 const std::vector<PipelineTrace>& traces,
                                 const DatasetManifest& manifest, const Grader& grader) {
    if (manifest.instances.empty())
        throw std::invalid_argument("pass_at_1: empty manifest");
    if (traces.size() != manifest.instances.size())
        throw std::invalid_argument("pass_at_1: traces do not align with the manifest");
    BenchmarkResult result;
    result.name = name;
    result.n = traces.size();
    for (std::size_t i = 0; i < traces.size(); ++i) {
        if (traces[i].instance_id != manifest.instances[i].id)
            throw std::invalid_argument("pass_at_1: trace order does not match the manifest");
        if (!traces[i].failed && grader(manifest.instances[i], traces[i].final_answer))
            ++result.correct;
    }
    result.pass_at_1 = double(result.correct) / double(result.n);
    return result;
}

// Unweighted arithmetic mean over the listed benchmark columns. Works on
// whatever scale the inputs carry (fractions or percents).
inline RunReport aggregate(const std::vector<BenchmarkResult>& results) {
    if (results.empty())
        throw std::invalid_argument("aggregate: need at least one benchmark column");
    RunReport report;
    report.results = results;
    double sum = 0.0;
    for (const auto& r : results)
        sum += r.pass_at_1;
    report.average = sum / double(results.size());
    return report;
}

// ── Depth-scaling experiment ─────────────────────────────────────────

// Maze dataset with n_per_L instances per requested path length, in
// ascending-L blocks, suitable for lookup-backed mock editors.
inline DatasetManifest make_depth_scaling_dataset(const std::filesystem::path& root,
                                                  uint64_t seed,
                                                  const std::vector<int>& l_set = {1, 3, 5, 7, 10},
                                                  int n_per_l = 100,
                                                  std::pair<int, int> size = {9, 9}) {
    if (l_set.empty() || n_per_l < 1)
        throw std::invalid_argument("make_depth_scaling_dataset: empty L set or count");
    std::vector<int> lengths = l_set;
    std::sort(lengths.begin(), lengths.end());
    GridTaskParams params;
    params.kind = GridKind::maze;
    params.seed = seed;
    params.count = int(lengths.size()) * n_per_l;
    params.sizes = {size};
    params.lengths.clear();
    for (int l : lengths) // block layout: lengths[i % count] stays in L order
        params.lengths.insert(params.lengths.end(), std::size_t(n_per_l), l);
    return make_grid_tasks(params, root);
}

// The editor is told the answer: the shortest path rides along in the text
// prompt, so only edit execution is measured, not route finding.
inline std::string compose_depth_prompt(const PromptRegistry& prompts, TaskFamily family,
                                        const std::string& question, const Path& truth) {
    return get_prompt(prompts, family, PromptRole::task) + "\n" + question +
           "\nThe shortest path is: " + format_moves(truth) + ".";
}

struct DepthScalingResult {
    std::vector<int> lengths;
    std::vector<int> attempted;   // instances per L
    std::vector<int> completed;   // edits that came back
    std::vector<int> correct;     // edits the validator accepted
    std::vector<double> correctness; // correct / completed (0 when none completed)
};

// Scores edit correctness per path length. With judge == nullptr the edit is
// decoded programmatically against the regenerated grid; otherwise the judge
// answers the family verify prompt.
inline DepthScalingResult depth_scaling_experiment(const DatasetManifest& manifest,
                                                   EditorBackend& editor,
                                                   const PromptRegistry& prompts,
                                                   ChatBackend* judge = nullptr,
                                                   const GenerationParams& gen = {}) {
    std::map<int, std::array<int, 3>> by_length; // L -> {attempted, completed, correct}
    for (const auto& instance : manifest.instances) {
        const int l = std::stoi(instance.meta.at("L"));
        auto& bucket = by_length[l];
        bucket[0] += 1;
        const Image base = load_png((manifest.root / instance.image_path).string());
        auto [grid, truth] = grid_from_metadata(instance.meta);
        Image edit(1, 1);
        try {
            edit = editor.edit(base,
                               compose_depth_prompt(prompts, instance.family,
                                                    instance.question, truth),
                               gen);
        } catch (const std::exception&) {
            continue; // incomplete instances shrink the denominator
        }
        bucket[1] += 1;
        bool ok = false;
        if (judge) {
            const std::string prompt =
                get_prompt(prompts, instance.family, PromptRole::verify) + "\n" +
                instance.question;
            auto texts = judge->complete({base, edit}, prompt, 0.0, 1);
            ok = parse_binary_verdict(texts.at(0)) == Verdict::one;
        } else {
            RenderSpec spec;
            spec.cell_px = std::stoi(instance.meta.at("cell_px"));
            auto decoded = decode_overlay(base, edit, grid, spec);
            ok = decoded && validate_path(grid, *decoded, grid.kind == GridKind::maze);
        }
        if (ok)
            bucket[2] += 1;
    }
    DepthScalingResult result;
    for (const auto& [l, bucket] : by_length) {
        result.lengths.push_back(l);
        result.attempted.push_back(bucket[0]);
        result.completed.push_back(bucket[1]);
        result.correct.push_back(bucket[2]);
        result.correctness.push_back(bucket[1] ? double(bucket[2]) / double(bucket[1]) : 0.0);
    }
    return result;
}

// ── Prompt-condition A/B experiment ──────────────────────────────────

struct PromptConditionResult {
    std::size_t n = 0;
    std::size_t raw_correct = 0;      // condition A: edit prompted with q itself
    std::size_t enhanced_correct = 0; // condition B: edit prompted with enhancer(q)
    double raw_rate = 0.0;
    double enhanced_rate = 0.0;
};

inline PromptConditionResult prompt_condition_ab(const DatasetManifest& manifest,
                                                 EditorBackend& editor, ChatBackend& enhancer,
                                                 ChatBackend& judge,
                                                 const PromptRegistry& prompts,
                                                 const GenerationParams& gen = {}) {
    PromptConditionResult result;
    for (const auto& instance : manifest.instances) {
        const Image base = load_png((manifest.root / instance.image_path).string());
        const std::string verify_prompt =
            get_prompt(prompts, instance.family, PromptRole::verify) + "\n" +
            instance.question;
        auto score = [&](const std::string& edit_prompt) {
            Image edit = editor.edit(base, edit_prompt, gen);
            auto texts = judge.complete({base, edit}, verify_prompt, 0.0, 1);
            return parse_binary_verdict(texts.at(0)) == Verdict::one;
        };
        result.n += 1;
        if (score(instance.question))
            result.raw_correct += 1;
        const std::string p_inst =
            enhancer.complete({base}, instance.question, 0.0, 1).at(0);
        if (score(p_inst))
            result.enhanced_correct += 1;
    }
    if (result.n) {
        result.raw_rate = double(result.raw_correct) / double(result.n);
        result.enhanced_rate = double(result.enhanced_correct) / double(result.n);
    }
    return result;
}

// ── Report emission ──────────────────────────────────────────────────

namespace detail {

inline std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline const BenchmarkResult* find_column(const RunReport& report, const std::string& name) {
    for (const auto& r : report.results)
        if (r.name == name)
            return &r;
    return nullptr;
}

} // namespace detail

// Writes report.<ext> per requested format into out_dir and returns the
// paths. Output is deterministic: identical reports emit identical bytes.
inline std::vector<std::filesystem::path>
emit_report(const RunReport& report, const std::filesystem::path& out_dir,
            const std::vector<std::string>& formats = {"json", "csv", "txt"}) {
    for (const auto& format : formats)
        if (format != "json" && format != "csv" && format != "txt")
            throw ConfigError("emit_report: unknown format '" + format + "'");
    if (!formats.empty())
        std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;

    const RunReport* baseline = report.baseline.get();
    for (const auto& format : formats) {
        const auto path = out_dir / ("report." + format);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + path.string());
        if (format == "json") {
            nlohmann::json columns = nlohmann::json::array();
            for (const auto& r : report.results) {
                nlohmann::json col = {{"name", r.name},
                                      {"n", r.n},
                                      {"correct", r.correct},
                                      {"pass_at_1", r.pass_at_1}};
                if (baseline) {
                    if (const auto* b = detail::find_column(*baseline, r.name)) {
                        col["baseline"] = b->pass_at_1;
                        col["delta"] = r.pass_at_1 - b->pass_at_1;
                    }
                }
                columns.push_back(std::move(col));
            }
            nlohmann::json j = {{"results", columns}, {"average", report.average}};
            if (baseline) {
                j["baseline_average"] = baseline->average;
                j["average_delta"] = report.average - baseline->average;
            }
            out << j.dump(2) << '\n';
        } else if (format == "csv") {
            out << "benchmark,n,correct,pass_at_1";
            if (baseline)
                out << ",baseline,delta";
            out << '\n';
            for (const auto& r : report.results) {
                out << r.name << ',' << r.n << ',' << r.correct << ','
                    << detail::fixed4(r.pass_at_1);
                if (baseline) {
                    const auto* b = detail::find_column(*baseline, r.name);
                    out << ',' << (b ? detail::fixed4(b->pass_at_1) : "") << ','
                        << (b ? detail::fixed4(r.pass_at_1 - b->pass_at_1) : "");
                }
                out << '\n';
            }
            out << "average,,," << detail::fixed4(report.average);
            if (baseline)
                out << ',' << detail::fixed4(baseline->average) << ','
                    << detail::fixed4(report.average - baseline->average);
            out << '\n';
        } else {
            std::size_t width = 9; // fits "benchmark" and "average"
            for (const auto& r : report.results)
                width = std::max(width, r.name.size());
            auto row = [&](const std::string& name, const std::string& n,
                           const std::string& value, const std::string& delta) {
                out << name << std::string(width - name.size() + 2, ' ');
                out << n << std::string(n.size() < 8 ? 8 - n.size() : 1, ' ');
                out << value;
                if (baseline)
                    out << "  " << delta;
                out << '\n';
            };
            row("benchmark", "n", "pass@1", baseline ? "delta" : "");
            for (const auto& r : report.results) {
                const auto* b = baseline ? detail::find_column(*baseline, r.name) : nullptr;
                row(r.name, std::to_string(r.n), detail::fixed4(r.pass_at_1),
                    b ? detail::fixed4(r.pass_at_1 - b->pass_at_1) : "");
            }
            row("average", "", detail::fixed4(report.average),
                baseline ? detail::fixed4(report.average - baseline->average) : "");
        }
        written.push_back(path);
    }
    return written;
}

} // namespace etchr
