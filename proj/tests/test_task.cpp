#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "etchr/grid_tasks.hpp"
#include "etchr/task.hpp"

using namespace etchr;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("etchr_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

AnswerSpec random_answer(Rng& rng) {
    switch (rng.below(4)) {
    case 0: {
        std::string s;
        for (int i = 0, n = int(rng.below(20)); i < n; ++i)
            s += char('a' + rng.below(26));
        return ExactString{s};
    }
    case 1: return MultipleChoice{std::string(1, char('A' + rng.below(6)))};
    case 2: {
        MoveSequence seq;
        for (int i = 0, n = 1 + int(rng.below(8)); i < n; ++i)
            seq.moves.push_back(Move(rng.below(4)));
        return seq;
    }
    default: {
        PermutationAnswer p;
        int n = 2 + int(rng.below(8));
        for (int i = 0; i < n; ++i)
            p.mapping.push_back(i);
        rng.shuffle(p.mapping);
        return p;
    }
    }
}

TaskInstance random_instance(Rng& rng, int serial) {
    TaskInstance t;
    t.id = "inst-" + std::to_string(serial);
    t.family = TaskFamily(rng.below(6));
    t.image_path = "images/" + t.id + ".png";
    t.question = "question " + std::to_string(rng.below(1000)) + " with spaces\tand такие";
    t.answer = random_answer(rng);
    if (rng.chance(0.5))
        t.edit_path = "edits/" + t.id + ".png";
    for (int k = 0, n = int(rng.below(4)); k < n; ++k)
        t.meta["key" + std::to_string(k)] = "value " + std::to_string(rng.below(100));
    return t;
}

} // namespace

TEST_CASE("manifest round-trips arbitrary instances") {
    Rng rng(7);
    auto dir = fresh_dir("manifest_roundtrip");
    for (int trial = 0; trial < 120; ++trial) {
        DatasetManifest m;
        m.root = dir;
        int n = int(rng.below(12));
        for (int i = 0; i < n; ++i)
            m.instances.push_back(random_instance(rng, i));
        save_manifest(m);
        DatasetManifest back = load_manifest(dir, /*check_images=*/false);
        REQUIRE(back.instances == m.instances);
    }
    fs::remove_all(dir);
}

TEST_CASE("empty manifest file loads as zero records") {
    auto dir = fresh_dir("manifest_empty");
    std::ofstream(dir / "manifest.jsonl").close();
    auto m = load_manifest(dir, false);
    REQUIRE(m.instances.empty());
    fs::remove_all(dir);
}

TEST_CASE("manifest rejects malformed input") {
    auto dir = fresh_dir("manifest_bad");
    auto write_lines = [&](const std::vector<std::string>& lines) {
        std::ofstream out(dir / "manifest.jsonl", std::ios::trunc);
        for (const auto& l : lines)
            out << l << '\n';
    };

    write_lines({"not json"});
    REQUIRE_THROWS_AS(load_manifest(dir, false), ParseError);

    write_lines({R"({"nope":true})"});
    REQUIRE_THROWS_AS(load_manifest(dir, false), ParseError); // header missing

    write_lines({R"({"schema_version":99})"});
    REQUIRE_THROWS_AS(load_manifest(dir, false), ParseError);

    write_lines({R"({"schema_version":1})",
                 R"({"id":"a","family":"maze","image":"i.png","question":"q"})"});
    REQUIRE_THROWS_AS(load_manifest(dir, false), ParseError); // no answer

    write_lines({R"({"schema_version":1})",
                 R"({"id":"a","family":"bogus","image":"i.png","question":"q","answer":{"kind":"exact_string","text":"x"}})"});
    REQUIRE_THROWS_AS(load_manifest(dir, false), ParseError);

    write_lines(
        {R"({"schema_version":1})",
         R"({"id":"a","family":"maze","image":"i.png","question":"q","answer":{"kind":"move_sequence","moves":["north"]}})"});
    REQUIRE_THROWS_AS(load_manifest(dir, false), ParseError);

    write_lines(
        {R"({"schema_version":1})",
         R"({"id":"a","family":"maze","image":"i.png","question":"q","answer":{"kind":"exact_string","text":"x"}})",
         R"({"id":"a","family":"maze","image":"i.png","question":"q","answer":{"kind":"exact_string","text":"x"}})"});
    REQUIRE_THROWS_AS(load_manifest(dir, false), ParseError); // duplicate id

    write_lines(
        {R"({"schema_version":1})",
         R"({"id":"a","family":"maze","image":"missing.png","question":"q","answer":{"kind":"exact_string","text":"x"}})"});
    REQUIRE_THROWS_AS(load_manifest(dir, true), ValidationError);
    REQUIRE_NOTHROW(load_manifest(dir, false));

    REQUIRE_THROWS_AS(load_manifest(dir / "void", false), IoError);
    fs::remove_all(dir);
}

TEST_CASE("text normalization") {
    REQUIRE(normalize_text("  Hello   World \n") == "hello world");
    REQUIRE(normalize_text("") == "");
    REQUIRE(normalize_text("ABC") == "abc");
}

TEST_CASE("grading: exact string") {
    AnswerSpec spec = ExactString{"Forty Two"};
    REQUIRE(grade_answer(spec, "forty two"));
    REQUIRE(grade_answer(spec, "  FORTY\tTWO  "));
    REQUIRE_FALSE(grade_answer(spec, "forty-two"));
    REQUIRE_FALSE(grade_answer(spec, ""));
}

TEST_CASE("grading: multiple choice accepts the first standalone letter") {
    AnswerSpec spec = MultipleChoice{"C"};
    REQUIRE(grade_answer(spec, "C"));
    REQUIRE(grade_answer(spec, "the answer is (c)."));
    REQUIRE(grade_answer(spec, "c) because the tiles match"));
    REQUIRE_FALSE(grade_answer(spec, "cat")); // embedded letter does not count
    REQUIRE_FALSE(grade_answer(spec, "A, not C"));
    REQUIRE_FALSE(grade_answer(spec, "answer: 3"));
    REQUIRE_FALSE(grade_answer(spec, ""));
}

TEST_CASE("grading: move sequences validate against the grid") {
    auto [grid, path] = generate_maze(5, 6, 6, 4);
    AnswerSpec spec = MoveSequence{path.moves};
    REQUIRE(grade_answer(spec, format_moves(path), &grid));
    REQUIRE(grade_answer(spec, "Sure! Go " + format_moves(path) + ". Done.", &grid));
    REQUIRE_FALSE(grade_answer(spec, "up up up up up up up up", &grid));
    REQUIRE_FALSE(grade_answer(spec, "no moves at all", &grid));
    REQUIRE_THROWS_AS(grade_answer(spec, format_moves(path), nullptr),
                      std::invalid_argument);

    // maze grading is strict: a valid but longer walk fails
    Move first = path.moves.front();
    Move inverse = first == Move::up      ? Move::down
                   : first == Move::down  ? Move::up
                   : first == Move::left  ? Move::right
                                          : Move::left;
    Path longer;
    longer.moves = {first, inverse};
    longer.moves.insert(longer.moves.end(), path.moves.begin(), path.moves.end());
    REQUIRE(validate_path(grid, longer));
    REQUIRE_FALSE(grade_answer(spec, format_moves(longer), &grid));

    // lake grading accepts any safe walk
    auto [lake, lake_path] = generate_frozen_lake(6, 6, 6, 3, 0.2);
    AnswerSpec lake_spec = MoveSequence{lake_path.moves};
    Move lfirst = lake_path.moves.front();
    Move linverse = lfirst == Move::up      ? Move::down
                    : lfirst == Move::down  ? Move::up
                    : lfirst == Move::left  ? Move::right
                                            : Move::left;
    Path lake_longer;
    lake_longer.moves = {lfirst, linverse};
    lake_longer.moves.insert(lake_longer.moves.end(), lake_path.moves.begin(),
                             lake_path.moves.end());
    REQUIRE(validate_path(lake, lake_longer));
    REQUIRE(grade_answer(lake_spec, format_moves(lake_longer), &lake));
}

TEST_CASE("grading: permutation compares extracted integers") {
    AnswerSpec spec = PermutationAnswer{{2, 0, 1, 3}};
    REQUIRE(grade_answer(spec, "2, 0, 1, 3"));
    REQUIRE(grade_answer(spec, "tiles: [2], [0], [1], [3]"));
    REQUIRE_FALSE(grade_answer(spec, "2 0 1"));
    REQUIRE_FALSE(grade_answer(spec, "2 0 3 1"));
    REQUIRE_FALSE(grade_answer(spec, "no numbers"));
}

TEST_CASE("grading never throws on arbitrary text") {
    Rng rng(11);
    auto [grid, _] = generate_maze(1, 5, 5, 3);
    for (int trial = 0; trial < 200; ++trial) {
        std::string junk;
        for (int i = 0, n = int(rng.below(60)); i < n; ++i)
            junk += char(32 + rng.below(95));
        AnswerSpec spec = random_answer(rng);
        const Grid* g = std::holds_alternative<MoveSequence>(spec) ? &grid : nullptr;
        REQUIRE_NOTHROW(grade_answer(spec, junk, g));
    }
}

TEST_CASE("canonical answer text grades as correct") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        AnswerSpec spec = random_answer(rng);
        if (std::holds_alternative<MoveSequence>(spec))
            continue; // needs a grid consistent with the moves, covered elsewhere
        REQUIRE(grade_answer(spec, canonical_answer_text(spec)));
    }
    auto [grid, path] = generate_maze(17, 6, 6, 5);
    AnswerSpec spec = MoveSequence{path.moves};
    REQUIRE(grade_answer(spec, canonical_answer_text(spec), &grid));
}

TEST_CASE("integer extraction") {
    REQUIRE(extract_integers("3, -1, 24") == std::vector<int>{3, -1, 24});
    REQUIRE(extract_integers("a-b 5-6") == std::vector<int>{5, -6});
    REQUIRE(extract_integers("none").empty());
}

TEST_CASE("grid dataset generation writes a loadable tree") {
    auto dir = fresh_dir("grid_dataset");
    GridTaskParams params;
    params.kind = GridKind::maze;
    params.seed = 404;
    params.count = 6;
    params.lengths = {2, 4};
    params.sizes = {{5, 5}, {6, 4}};
    auto manifest = make_grid_tasks(params, dir);
    REQUIRE(manifest.instances.size() == 6);

    auto loaded = load_manifest(dir, true); // image existence enforced
    REQUIRE(loaded.instances == manifest.instances);
    for (std::size_t i = 0; i < loaded.instances.size(); ++i) {
        const auto& t = loaded.instances[i];
        REQUIRE(t.family == TaskFamily::maze);
        REQUIRE(t.edit_path.has_value());
        auto [grid, path] = grid_from_metadata(t.meta);
        REQUIRE(int(path.moves.size()) == params.lengths[i % 2]);
        REQUIRE(std::get<MoveSequence>(t.answer).moves == path.moves);
        RenderSpec spec;
        spec.cell_px = std::stoi(t.meta.at("cell_px"));
        REQUIRE(load_png((dir / t.image_path).string()) == render_grid(grid, spec));
        REQUIRE(load_png((dir / *t.edit_path).string()) ==
                render_path_overlay(grid, path, spec));
    }
    fs::remove_all(dir);
}

TEST_CASE("grid dataset generation is deterministic and prefix-stable") {
    auto dir_a = fresh_dir("grid_det_a");
    auto dir_b = fresh_dir("grid_det_b");
    GridTaskParams params;
    params.kind = GridKind::frozen_lake;
    params.seed = 777;
    params.count = 4;
    params.lengths = {3};
    params.sizes = {{5, 5}};
    params.hole_fraction = 0.2;
    auto a = make_grid_tasks(params, dir_a);
    params.count = 8;
    auto b = make_grid_tasks(params, dir_b);
    for (int i = 0; i < 4; ++i) {
        REQUIRE(a.instances[i].meta == b.instances[i].meta);
        REQUIRE(load_png((dir_a / a.instances[i].image_path).string()) ==
                load_png((dir_b / b.instances[i].image_path).string()));
    }
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("grid dataset generation rejects infeasible parameter mixes") {
    GridTaskParams params;
    params.count = 0;
    REQUIRE_THROWS_AS(make_grid_tasks(params, "/tmp/etchr_never"), std::invalid_argument);
    params.count = 1;
    params.lengths = {};
    REQUIRE_THROWS_AS(make_grid_tasks(params, "/tmp/etchr_never"), std::invalid_argument);
    params.lengths = {30};
    params.sizes = {{5, 5}};
    REQUIRE_THROWS_AS(make_grid_tasks(params, "/tmp/etchr_never"), std::invalid_argument);
}
