#pragma once

// Task instances, dataset manifests (JSONL), and answer grading.

#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "etchr/errors.hpp"
#include "etchr/gridworld.hpp"

namespace etchr {

enum class TaskFamily {
    perception,
    chart,
    maze,
    frozen_lake,
    jigsaw,
    three_d,
};

inline constexpr std::array<TaskFamily, 6> kAllTaskFamilies = {
    TaskFamily::perception, TaskFamily::chart,  TaskFamily::maze,
    TaskFamily::frozen_lake, TaskFamily::jigsaw, TaskFamily::three_d,
};

inline std::string to_string(TaskFamily f) {
    switch (f) {
    case TaskFamily::perception: return "perception";
    case TaskFamily::chart: return "chart";
    case TaskFamily::maze: return "maze";
    case TaskFamily::frozen_lake: return "frozen_lake";
    case TaskFamily::jigsaw: return "jigsaw";
    case TaskFamily::three_d: return "three_d";
    }
    return "?";
}

inline TaskFamily task_family_from_string(const std::string& s) {
    for (TaskFamily f : kAllTaskFamilies)
        if (to_string(f) == s)
            return f;
    throw ValidationError("unknown task family '" + s + "'");
}

// Ground-truth answer, one variant per grading style.
struct ExactString {
    std::string text;
    friend bool operator==(const ExactString&, const ExactString&) = default;
};
struct MultipleChoice {
    std::string choice; // single letter A-F
    friend bool operator==(const MultipleChoice&, const MultipleChoice&) = default;
};
struct MoveSequence {
    std::vector<Move> moves;
    friend bool operator==(const MoveSequence&, const MoveSequence&) = default;
};
struct PermutationAnswer {
    std::vector<int> mapping;
    friend bool operator==(const PermutationAnswer&, const PermutationAnswer&) = default;
};

using AnswerSpec = std::variant<ExactString, MultipleChoice, MoveSequence, PermutationAnswer>;

struct TaskInstance {
    std::string id;
    TaskFamily family = TaskFamily::maze;
    std::string image_path; // relative to the dataset root
    std::string question;
    AnswerSpec answer;
    std::optional<std::string> edit_path; // ground-truth edited image, if materialized
    std::map<std::string, std::string> meta;

    friend bool operator==(const TaskInstance&, const TaskInstance&) = default;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::vector<TaskInstance> instances;
};

// ── Normalization & grading ──────────────────────────────────────────

// Lowercase, trim, collapse internal whitespace runs to single spaces.
inline std::string normalize_text(const std::string& text) {
    std::string out;
    bool pending_space = false;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!out.empty())
                pending_space = true;
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += char(std::tolower(static_cast<unsigned char>(ch)));
    }
    return out;
}

// First standalone choice letter A-F (any case), or nullopt.
inline std::optional<char> extract_choice_letter(const std::string& text) {
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)); };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = char(std::toupper(static_cast<unsigned char>(text[i])));
        if (c < 'A' || c > 'F')
            continue;
        bool left_ok = i == 0 || !is_word(text[i - 1]);
        bool right_ok = i + 1 == text.size() || !is_word(text[i + 1]);
        if (left_ok && right_ok)
            return c;
    }
    return std::nullopt;
}

// All base-10 integers in order of appearance; minus signs are honored.
inline std::vector<int> extract_integers(const std::string& text) {
    std::vector<int> values;
    std::size_t i = 0;
    while (i < text.size()) {
        bool neg = false;
        std::size_t j = i;
        if (text[j] == '-' && j + 1 < text.size() &&
            std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
            neg = true;
            ++j;
        }
        if (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
            long v = 0;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) {
                v = v * 10 + (text[j] - '0');
                if (v > 1'000'000)
                    v = 1'000'000; // grading never needs larger values
                ++j;
            }
            values.push_back(int(neg ? -v : v));
            i = j;
        } else {
            ++i;
        }
    }
    return values;
}

// The exact text a flawless answer would contain.
inline std::string canonical_answer_text(const AnswerSpec& spec) {
    return std::visit(
        [](const auto& a) -> std::string {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, ExactString>) {
                return a.text;
            } else if constexpr (std::is_same_v<T, MultipleChoice>) {
                return a.choice;
            } else if constexpr (std::is_same_v<T, MoveSequence>) {
                return format_moves(Path{a.moves});
            } else {
                std::string out;
                for (std::size_t i = 0; i < a.mapping.size(); ++i) {
                    if (i)
                        out += ", ";
                    out += std::to_string(a.mapping[i]);
                }
                return out;
            }
        },
        spec);
}

// Total binary grade over arbitrary model text. Never throws on bad text;
// move-sequence grading needs the grid, whose absence is a caller bug.
inline bool grade_answer(const AnswerSpec& spec, const std::string& output,
                         const Grid* grid = nullptr) {
    return std::visit(
        [&](const auto& a) -> bool {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, ExactString>) {
                return normalize_text(output) == normalize_text(a.text);
            } else if constexpr (std::is_same_v<T, MultipleChoice>) {
                auto got = extract_choice_letter(output);
                return got &&
                       *got == char(std::toupper(static_cast<unsigned char>(a.choice[0])));
            } else if constexpr (std::is_same_v<T, MoveSequence>) {
                if (!grid)
                    throw std::invalid_argument(
                        "grade_answer: move-sequence grading requires the grid");
                auto moves = parse_moves(output);
                if (moves.empty())
                    return false;
                bool strict = grid->kind == GridKind::maze;
                return validate_path(*grid, Path{moves}, strict);
            } else {
                return extract_integers(output) == a.mapping;
            }
        },
        spec);
}

// Instance-level grading hook. The default replays gridworld instances from
// their metadata so move sequences can be validated against the real grid.
using Grader = std::function<bool(const TaskInstance&, const std::string&)>;

inline Grader default_grader() {
    return [](const TaskInstance& instance, const std::string& output) {
        if ((instance.family == TaskFamily::maze || instance.family == TaskFamily::frozen_lake) &&
            instance.meta.count("kind")) {
            Grid grid = grid_from_metadata(instance.meta).first;
            return grade_answer(instance.answer, output, &grid);
        }
        return grade_answer(instance.answer, output);
    };
}

// ── Manifest serialization ───────────────────────────────────────────

namespace detail {

inline nlohmann::json answer_to_json(const AnswerSpec& spec) {
    nlohmann::json j;
    std::visit(
        [&](const auto& a) {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, ExactString>) {
                j["kind"] = "exact_string";
                j["text"] = a.text;
            } else if constexpr (std::is_same_v<T, MultipleChoice>) {
                j["kind"] = "multiple_choice";
                j["choice"] = a.choice;
            } else if constexpr (std::is_same_v<T, MoveSequence>) {
                j["kind"] = "move_sequence";
                auto arr = nlohmann::json::array();
                for (Move m : a.moves)
                    arr.push_back(to_string(m));
                j["moves"] = std::move(arr);
            } else {
                j["kind"] = "permutation";
                j["mapping"] = a.mapping;
            }
        },
        spec);
    return j;
}

inline AnswerSpec answer_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw ParseError("manifest: answer must be an object with a 'kind' string");
    const std::string kind = j["kind"];
    if (kind == "exact_string") {
        if (!j.contains("text") || !j["text"].is_string())
            throw ParseError("manifest: exact_string answer needs 'text'");
        return ExactString{j["text"]};
    }
    if (kind == "multiple_choice") {
        if (!j.contains("choice") || !j["choice"].is_string())
            throw ParseError("manifest: multiple_choice answer needs 'choice'");
        std::string choice = j["choice"];
        if (choice.size() != 1 || choice[0] < 'A' || choice[0] > 'F')
            throw ParseError("manifest: choice must be a single letter A-F");
        return MultipleChoice{choice};
    }
    if (kind == "move_sequence") {
        if (!j.contains("moves") || !j["moves"].is_array())
            throw ParseError("manifest: move_sequence answer needs 'moves'");
        MoveSequence seq;
        for (const auto& mv : j["moves"]) {
            if (!mv.is_string())
                throw ParseError("manifest: moves must be strings");
            const std::string s = mv;
            auto parsed = parse_moves(s);
            if (parsed.size() != 1 || to_string(parsed[0]) != s)
                throw ParseError("manifest: bad move token '" + s + "'");
            seq.moves.push_back(parsed[0]);
        }
        return seq;
    }
    if (kind == "permutation") {
        if (!j.contains("mapping") || !j["mapping"].is_array())
            throw ParseError("manifest: permutation answer needs 'mapping'");
        PermutationAnswer p;
        for (const auto& v : j["mapping"]) {
            if (!v.is_number_integer())
                throw ParseError("manifest: mapping entries must be integers");
            p.mapping.push_back(v.get<int>());
        }
        return p;
    }
    throw ParseError("manifest: unknown answer kind '" + kind + "'");
}

inline nlohmann::json instance_to_json(const TaskInstance& t) {
    nlohmann::json j;
    j["id"] = t.id;
    j["family"] = to_string(t.family);
    j["image"] = t.image_path;
    j["question"] = t.question;
    j["answer"] = answer_to_json(t.answer);
    if (t.edit_path)
        j["edit"] = *t.edit_path;
    if (!t.meta.empty())
        j["meta"] = t.meta;
    return j;
}

inline TaskInstance instance_from_json(const nlohmann::json& j, std::size_t line_no) {
    auto fail = [&](const std::string& what) {
        throw ParseError("manifest line " + std::to_string(line_no) + ": " + what);
    };
    if (!j.is_object())
        fail("record must be an object");
    TaskInstance t;
    for (const char* key : {"id", "family", "image", "question"}) {
        if (!j.contains(key) || !j[key].is_string())
            fail(std::string("missing or non-string '") + key + "'");
    }
    t.id = j["id"];
    if (t.id.empty())
        fail("id must be nonempty");
    try {
        t.family = task_family_from_string(j["family"]);
    } catch (const ValidationError& e) {
        fail(e.what());
    }
    t.image_path = j["image"];
    t.question = j["question"];
    if (!j.contains("answer"))
        fail("missing 'answer'");
    t.answer = answer_from_json(j["answer"]);
    if (j.contains("edit")) {
        if (!j["edit"].is_string())
            fail("'edit' must be a string");
        t.edit_path = j["edit"].get<std::string>();
    }
    if (j.contains("meta")) {
        if (!j["meta"].is_object())
            fail("'meta' must be an object");
        for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it) {
            if (!it.value().is_string())
                fail("meta values must be strings");
            t.meta[it.key()] = it.value().get<std::string>();
        }
    }
    return t;
}

} // namespace detail

inline constexpr int kManifestSchemaVersion = 1;

// Layout: <root>/manifest.jsonl, images under <root>/images/, ground-truth
// edits under <root>/edits/. The first JSONL line is a schema header. An
// alternate filename keeps derived subsets next to their source corpus.
inline void save_manifest(const DatasetManifest& manifest,
                          const std::string& filename = "manifest.jsonl") {
    std::filesystem::create_directories(manifest.root);
    const auto path = manifest.root / filename;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    nlohmann::json header;
    header["schema_version"] = kManifestSchemaVersion;
    out << header.dump() << '\n';
    for (const auto& t : manifest.instances)
        out << detail::instance_to_json(t).dump() << '\n';
    if (!out)
        throw IoError("write failed for " + path.string());
}

inline DatasetManifest load_manifest(const std::filesystem::path& root,
                                     bool check_images = true,
                                     const std::string& filename = "manifest.jsonl") {
    const auto path = root / filename;
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    DatasetManifest manifest;
    manifest.root = root;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::set<std::string> ids;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!header_seen) {
            header_seen = true;
            if (!j.is_object() || !j.contains("schema_version") ||
                !j["schema_version"].is_number_integer())
                throw ParseError("manifest: first line must carry schema_version");
            if (j["schema_version"].get<int>() != kManifestSchemaVersion)
                throw ParseError("manifest: unsupported schema_version " +
                                 j["schema_version"].dump());
            continue;
        }
        TaskInstance t = detail::instance_from_json(j, line_no);
        if (!ids.insert(t.id).second)
            throw ParseError("manifest line " + std::to_string(line_no) + ": duplicate id '" +
                             t.id + "'");
        if (check_images) {
            if (!std::filesystem::exists(root / t.image_path))
                throw ValidationError("manifest: missing image " +
                                      (root / t.image_path).string());
            if (t.edit_path && !std::filesystem::exists(root / *t.edit_path))
                throw ValidationError("manifest: missing edit image " +
                                      (root / *t.edit_path).string());
        }
        manifest.instances.push_back(std::move(t));
    }
    return manifest;
}

} // namespace etchr
