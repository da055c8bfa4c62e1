#pragma once

// Preference-based group rewards: the guidance and correctness signals with
// K-sample softening, their convex combination, pairwise win rates, and
// group-normalized advantages. Also the data filter that keeps only
// instances where the ground-truth edit flips the model from wrong to right.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "etchr/backends.hpp"
#include "etchr/prompts.hpp"
#include "etchr/random.hpp"
#include "etchr/task.hpp"

namespace etchr {

struct RewardRecord {
    std::string instance_id;
    int edit_index = 0; // position within the rollout group
    int k = 1;
    std::vector<bool> guide_outcomes;   // per decoding: answer graded correct
    std::vector<bool> correct_outcomes; // per decoding: judge verdict was 1
    double r_guide = 0.0;
    double r_correct = 0.0;
    double combined = 0.0;
};

struct AdvantageGroup {
    int g = 0;
    std::vector<double> rewards;
    std::vector<double> win_rates;
    std::vector<double> advantages;
};

inline double combined_reward(double r_guide, double r_correct, double alpha = 0.5,
                              double beta = 0.5) {
    if (alpha < 0 || beta < 0)
        throw std::invalid_argument("combined_reward: weights must be non-negative");
    return alpha * r_guide + beta * r_correct;
}

namespace detail {

inline double outcome_fraction(const std::vector<bool>& outcomes) {
    if (outcomes.empty())
        return 0.0;
    return double(std::count(outcomes.begin(), outcomes.end(), true)) /
           double(outcomes.size());
}

} // namespace detail

// Fraction of K reasoning decodings over [original, edit] graded correct.
inline double guidance_reward(ChatBackend& understander, const PromptRegistry& prompts,
                              const Image& base, const Image& edit,
                              const TaskInstance& instance, const Grader& grader, int k,
                              double temperature, std::vector<bool>* outcomes = nullptr) {
    if (k < 1)
        throw std::invalid_argument("guidance_reward: K must be >= 1");
    const std::string prompt =
        get_prompt(prompts, instance.family, PromptRole::reason) + "\n" + instance.question;
    auto texts = understander.complete({base, edit}, prompt, temperature, k);
    std::vector<bool> local;
    local.reserve(texts.size());
    for (const auto& text : texts)
        local.push_back(grader(instance, text));
    if (outcomes)
        *outcomes = local;
    return detail::outcome_fraction(local);
}

// Fraction of K judge decodings over [original, edit] returning verdict 1;
// unparsable judge text counts as 0.
inline double correctness_reward(ChatBackend& judge, const PromptRegistry& prompts,
                                 const Image& base, const Image& edit,
                                 const TaskInstance& instance, int k, double temperature,
                                 std::vector<bool>* outcomes = nullptr) {
    if (k < 1)
        throw std::invalid_argument("correctness_reward: K must be >= 1");
    const std::string prompt =
        get_prompt(prompts, instance.family, PromptRole::verify) + "\n" + instance.question;
    auto texts = judge.complete({base, edit}, prompt, temperature, k);
    std::vector<bool> local;
    local.reserve(texts.size());
    for (const auto& text : texts)
        local.push_back(parse_binary_verdict(text) == Verdict::one);
    if (outcomes)
        *outcomes = local;
    return detail::outcome_fraction(local);
}

// w_m = |{n != m : R_m > R_n}| / (G-1). Strict comparison: ties win nothing.
inline std::vector<double> win_rates(const std::vector<double>& rewards) {
    const std::size_t g = rewards.size();
    if (g < 2)
        throw std::invalid_argument("win_rates: group size must be >= 2");
    std::vector<double> rates(g, 0.0);
    for (std::size_t m = 0; m < g; ++m) {
        std::size_t wins = 0;
        for (std::size_t n = 0; n < g; ++n)
            if (n != m && rewards[m] > rewards[n])
                ++wins;
        rates[m] = double(wins) / double(g - 1);
    }
    return rates;
}

// Group normalization by population standard deviation; a degenerate group
// (std below epsilon) gets all-zero advantages instead of a blow-up.
inline std::vector<double> advantages(const std::vector<double>& rates,
                                      double epsilon = 1e-8) {
    const std::size_t g = rates.size();
    if (g < 2)
        throw std::invalid_argument("advantages: group size must be >= 2");
    const double mean = std::accumulate(rates.begin(), rates.end(), 0.0) / double(g);
    double variance = 0.0;
    for (double w : rates)
        variance += (w - mean) * (w - mean);
    variance /= double(g);
    const double std_dev = std::sqrt(variance);
    std::vector<double> out(g, 0.0);
    if (std_dev < epsilon)
        return out;
    for (std::size_t m = 0; m < g; ++m)
        out[m] = (rates[m] - mean) / std_dev;
    return out;
}

struct ScoredGroup {
    std::string instance_id;
    int group_index = 0;
    std::vector<RewardRecord> records;
    AdvantageGroup group;
};

inline ScoredGroup score_rollout_group(const std::filesystem::path& dataset_root,
                                       const TaskInstance& instance,
                                       const std::vector<Image>& edits,
                                       ChatBackend& understander, ChatBackend& judge,
                                       const Grader& grader, const PromptRegistry& prompts,
                                       int k = 1, double alpha = 0.5, double beta = 0.5,
                                       double temperature = 1.0) {
    if (edits.size() < 2)
        throw std::invalid_argument("score_rollout_group: group size must be >= 2");
    const Image base = load_png((dataset_root / instance.image_path).string());

    ScoredGroup scored;
    scored.instance_id = instance.id;
    for (std::size_t m = 0; m < edits.size(); ++m) {
        RewardRecord record;
        record.instance_id = instance.id;
        record.edit_index = int(m);
        record.k = k;
        record.r_guide = guidance_reward(understander, prompts, base, edits[m], instance,
                                         grader, k, temperature, &record.guide_outcomes);
        record.r_correct = correctness_reward(judge, prompts, base, edits[m], instance, k,
                                              temperature, &record.correct_outcomes);
        record.combined = combined_reward(record.r_guide, record.r_correct, alpha, beta);
        scored.records.push_back(std::move(record));
    }

    auto& group = scored.group;
    group.g = int(edits.size());
    for (const auto& record : scored.records)
        group.rewards.push_back(record.combined);
    group.win_rates = win_rates(group.rewards);
    group.advantages = advantages(group.win_rates);
    return scored;
}

// Keep an instance only if the model fails on the bare image but succeeds
// when additionally shown the ground-truth edit (both at temperature 0).
inline bool rl_filter(ChatBackend& understander, const PromptRegistry& prompts,
                      const std::filesystem::path& dataset_root,
                      const TaskInstance& instance, const Grader& grader) {
    if (!instance.edit_path)
        throw ValidationError("rl_filter: instance '" + instance.id +
                              "' has no ground-truth edit");
    const Image base = load_png((dataset_root / instance.image_path).string());
    auto raw = understander.complete({base}, instance.question, 0.0, 1);
    if (grader(instance, raw.at(0)))
        return false; // already solvable without visual assistance

    const Image gt = load_png((dataset_root / *instance.edit_path).string());
    const std::string prompt =
        get_prompt(prompts, instance.family, PromptRole::reason) + "\n" + instance.question;
    auto conditioned = understander.complete({base, gt}, prompt, 0.0, 1);
    return grader(instance, conditioned.at(0));
}

// Seeded per-family sampling up to the quota, then the wrong-to-right filter.
// Families missing from the corpus, and instances whose filter call failed,
// are reported through `warnings` and skipped.
inline DatasetManifest build_rl_dataset(const DatasetManifest& corpus,
                                        ChatBackend& understander, const Grader& grader,
                                        const PromptRegistry& prompts,
                                        int quota_per_family = 2000, uint64_t seed = 0,
                                        const std::vector<TaskFamily>& families =
                                            {kAllTaskFamilies.begin(), kAllTaskFamilies.end()},
                                        std::vector<std::string>* warnings = nullptr) {
    if (quota_per_family < 0)
        throw std::invalid_argument("build_rl_dataset: quota must be >= 0");
    DatasetManifest out;
    out.root = corpus.root;
    auto warn = [&](const std::string& message) {
        if (warnings)
            warnings->push_back(message);
    };
    for (TaskFamily family : families) {
        std::vector<std::size_t> indices;
        for (std::size_t i = 0; i < corpus.instances.size(); ++i)
            if (corpus.instances[i].family == family)
                indices.push_back(i);
        if (indices.empty()) {
            warn("family '" + to_string(family) + "' absent from corpus; skipped");
            continue;
        }
        Rng rng(derive_seed(seed, uint64_t(family)));
        rng.shuffle(indices);
        if (indices.size() > std::size_t(quota_per_family))
            indices.resize(std::size_t(quota_per_family));
        for (std::size_t i : indices) {
            const auto& instance = corpus.instances[i];
            bool keep = false;
            try {
                keep = rl_filter(understander, prompts, corpus.root, instance, grader);
            } catch (const std::exception& e) {
                warn("filter error on '" + instance.id + "': " + e.what());
                continue;
            }
            if (keep) {
                TaskInstance kept = instance;
                kept.meta["rl_filter"] = "kept";
                out.instances.push_back(std::move(kept));
            }
        }
    }
    return out;
}

// ── Persistence ──────────────────────────────────────────────────────

inline void save_scored_groups(const std::filesystem::path& path,
                               const std::vector<ScoredGroup>& groups) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    for (const auto& scored : groups) {
        nlohmann::json records = nlohmann::json::array();
        for (const auto& record : scored.records) {
            records.push_back({{"edit_index", record.edit_index},
                               {"k", record.k},
                               {"guide_outcomes", record.guide_outcomes},
                               {"correct_outcomes", record.correct_outcomes},
                               {"r_guide", record.r_guide},
                               {"r_correct", record.r_correct},
                               {"combined", record.combined}});
        }
        nlohmann::json j = {{"instance", scored.instance_id},
                            {"group_index", scored.group_index},
                            {"g", scored.group.g},
                            {"rewards", scored.group.rewards},
                            {"win_rates", scored.group.win_rates},
                            {"advantages", scored.group.advantages},
                            {"records", records}};
        out << j.dump() << '\n';
    }
}

inline std::vector<ScoredGroup> load_scored_groups(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::vector<ScoredGroup> groups;
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
            throw ParseError("reward line " + std::to_string(line_no) + ": " + e.what());
        }
        ScoredGroup scored;
        scored.instance_id = j.at("instance").get<std::string>();
        scored.group_index = j.value("group_index", 0);
        scored.group.g = j.at("g").get<int>();
        scored.group.rewards = j.at("rewards").get<std::vector<double>>();
        scored.group.win_rates = j.at("win_rates").get<std::vector<double>>();
        scored.group.advantages = j.at("advantages").get<std::vector<double>>();
        for (const auto& r : j.value("records", nlohmann::json::array())) {
            RewardRecord record;
            record.instance_id = scored.instance_id;
            record.edit_index = r.at("edit_index").get<int>();
            record.k = r.at("k").get<int>();
            record.guide_outcomes = r.value("guide_outcomes", std::vector<bool>{});
            record.correct_outcomes = r.value("correct_outcomes", std::vector<bool>{});
            record.r_guide = r.at("r_guide").get<double>();
            record.r_correct = r.at("r_correct").get<double>();
            record.combined = r.at("combined").get<double>();
            scored.records.push_back(std::move(record));
        }
        groups.push_back(std::move(scored));
    }
    return groups;
}

} // namespace etchr
