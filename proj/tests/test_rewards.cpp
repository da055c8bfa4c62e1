#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <set>

#include "etchr/grid_tasks.hpp"
#include "etchr/rewards.hpp"

using namespace etchr;
namespace fs = std::filesystem;

namespace {

struct RewardFixture {
    fs::path dir;
    DatasetManifest manifest;
    std::shared_ptr<const InstanceLookup> lookup;

    explicit RewardFixture(int count = 10) {
        dir = fs::temp_directory_path() / "etchr_rewards_ds";
        fs::remove_all(dir);
        GridTaskParams params;
        params.kind = GridKind::maze;
        params.seed = 4242;
        params.count = count;
        params.lengths = {2, 3, 4};
        params.sizes = {{7, 7}};
        manifest = make_grid_tasks(params, dir);
        lookup = std::make_shared<InstanceLookup>(manifest);
    }
    ~RewardFixture() { fs::remove_all(dir); }
};

// Wrong on the bare image; right with the edit exactly for instances whose
// numeric id suffix is even. Lets filter tests key behaviour off the id.
class EvenIdChat : public ChatBackend {
  public:
    explicit EvenIdChat(std::shared_ptr<const InstanceLookup> lookup)
        : lookup_(std::move(lookup)) {}

    std::vector<std::string> complete(const std::vector<Image>& images,
                                      const std::string&, double, int n) override {
        const auto* entry = lookup_->find(images.at(0));
        std::string reply = "no idea";
        if (entry && images.size() >= 2) {
            const std::string& id = entry->instance.id;
            int suffix = std::stoi(id.substr(id.rfind('-') + 1));
            if (suffix % 2 == 0)
                reply = canonical_answer_text(entry->instance.answer);
        }
        return std::vector<std::string>(std::size_t(n), reply);
    }

  private:
    std::shared_ptr<const InstanceLookup> lookup_;
};

class ThrowingChat : public ChatBackend {
  public:
    explicit ThrowingChat(std::string poison_answer) : poison_(std::move(poison_answer)) {}
    std::vector<std::string> complete(const std::vector<Image>&, const std::string& prompt,
                                      double, int n) override {
        if (prompt.find(poison_) != std::string::npos)
            throw TransportError("chat backend unreachable");
        return std::vector<std::string>(std::size_t(n), "no idea");
    }

  private:
    std::string poison_;
};

TaskInstance toy_instance(const fs::path& dir, bool with_edit) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "edits");
    Image base(6, 6, Rgb{200, 200, 200});
    Image edit(6, 6, Rgb{10, 10, 10});
    save_png(base, (dir / "images/toy.png").string());
    save_png(edit, (dir / "edits/toy.png").string());
    TaskInstance inst;
    inst.id = "toy-00000";
    inst.family = TaskFamily::perception;
    inst.image_path = "images/toy.png";
    if (with_edit)
        inst.edit_path = "edits/toy.png";
    inst.question = "is the marked region occupied?";
    inst.answer = ExactString{"yes"};
    return inst;
}

} // namespace

TEST_CASE("win rates count strict pairwise wins over the group") {
    REQUIRE(win_rates({1.0, 0.5, 0.0}) == std::vector<double>{1.0, 0.5, 0.0});
    REQUIRE(win_rates({1.0, 1.0}) == std::vector<double>{0.0, 0.0});
    REQUIRE(win_rates(std::vector<double>(8, 0.625)) == std::vector<double>(8, 0.0));
    REQUIRE(win_rates({0.0, 1.0}) == std::vector<double>{0.0, 1.0});
    REQUIRE_THROWS_AS(win_rates({1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(win_rates({}), std::invalid_argument);
}

TEST_CASE("advantages normalize win rates by the population deviation") {
    auto a = advantages({1.0, 0.5, 0.0});
    REQUIRE(a.size() == 3);
    CHECK(a[0] == Catch::Approx(1.224745).margin(1e-6));
    CHECK(a[1] == Catch::Approx(0.0).margin(1e-6));
    CHECK(a[2] == Catch::Approx(-1.224745).margin(1e-6));

    REQUIRE(advantages(std::vector<double>(8, 0.25)) == std::vector<double>(8, 0.0));
    REQUIRE(advantages({0.7, 0.7}) == std::vector<double>{0.0, 0.0});
    REQUIRE_THROWS_AS(advantages({0.5}), std::invalid_argument);
}

TEST_CASE("group normalization properties hold over random groups") {
    Rng rng(90210);
    int non_degenerate = 0;
    for (int trial = 0; trial < 1200; ++trial) {
        const int g = int(rng.range(2, 16));
        std::vector<double> rewards(static_cast<std::size_t>(g));
        for (auto& r : rewards)
            r = double(rng.below(9)) / 8.0; // quantized so ties happen often

        auto rates = win_rates(rewards);
        for (double w : rates) {
            REQUIRE(w >= 0.0);
            REQUIRE(w <= 1.0);
        }

        // Total strict wins never exceed the number of unordered pairs, and
        // reach it exactly when all rewards are distinct.
        double total_wins = 0;
        for (double w : rates)
            total_wins += w * double(g - 1);
        const double max_pairs = double(g) * double(g - 1) / 2.0;
        REQUIRE(total_wins <= max_pairs + 1e-9);
        std::set<double> distinct(rewards.begin(), rewards.end());
        if (distinct.size() == rewards.size())
            REQUIRE(total_wins == Catch::Approx(max_pairs).margin(1e-9));
        else
            REQUIRE(total_wins < max_pairs);

        // Ranks, not magnitudes: shifting or monotonically transforming the
        // rewards leaves the win rates untouched.
        std::vector<double> shifted = rewards, cubed = rewards;
        for (auto& r : shifted)
            r += 1.0;
        for (auto& r : cubed)
            r = r * r * r;
        REQUIRE(win_rates(shifted) == rates);
        REQUIRE(win_rates(cubed) == rates);

        auto adv = advantages(rates);
        double mean = 0;
        for (double x : adv)
            mean += x;
        mean /= double(g);
        REQUIRE(std::abs(mean) <= 1e-12);
        double variance = 0;
        for (double x : adv)
            variance += (x - mean) * (x - mean);
        const double std_dev = std::sqrt(variance / double(g));
        if (adv != std::vector<double>(std::size_t(g), 0.0)) {
            ++non_degenerate;
            REQUIRE(std::abs(std_dev - 1.0) <= 1e-9);
        }
    }
    REQUIRE(non_degenerate > 600); // the suite exercised real normalization
}

TEST_CASE("combined reward is the convex sum of the two signals") {
    REQUIRE(combined_reward(1.0, 0.0) == 0.5);
    REQUIRE(combined_reward(1.0, 1.0) == 1.0);
    REQUIRE(combined_reward(0.75, 0.5) == 0.625);
    REQUIRE(combined_reward(1.0, 0.0, 0.2, 0.8) == Catch::Approx(0.2));
    REQUIRE_THROWS_AS(combined_reward(1.0, 1.0, -0.1, 0.5), std::invalid_argument);
}

TEST_CASE("guidance reward is the graded fraction of K decodings") {
    fs::path dir = fs::temp_directory_path() / "etchr_rewards_toy";
    fs::remove_all(dir);
    TaskInstance inst = toy_instance(dir, true);
    Image base(6, 6, Rgb{200, 200, 200});
    Image edit(6, 6, Rgb{10, 10, 10});
    Grader grader = default_grader();
    PromptRegistry prompts = builtin_prompts();

    SECTION("three of four decodings correct") {
        ScriptedChat chat({{inst.question, {"yes", "no", "yes", "yes"}}});
        std::vector<bool> outcomes;
        double r = guidance_reward(chat, prompts, base, edit, inst, grader, 4, 1.0, &outcomes);
        REQUIRE(r == 0.75);
        REQUIRE(outcomes == std::vector<bool>{true, false, true, true});
    }
    SECTION("always correct and never correct") {
        ScriptedChat right({{inst.question, {"yes"}}});
        ScriptedChat wrong({{inst.question, {"no"}}});
        REQUIRE(guidance_reward(right, prompts, base, edit, inst, grader, 4, 1.0) == 1.0);
        REQUIRE(guidance_reward(wrong, prompts, base, edit, inst, grader, 4, 1.0) == 0.0);
    }
    SECTION("K must be positive") {
        ScriptedChat chat({});
        REQUIRE_THROWS_AS(guidance_reward(chat, prompts, base, edit, inst, grader, 0, 1.0),
                          std::invalid_argument);
    }
    fs::remove_all(dir);
}

TEST_CASE("correctness reward is the fraction of parseable positive verdicts") {
    fs::path dir = fs::temp_directory_path() / "etchr_rewards_toy2";
    fs::remove_all(dir);
    TaskInstance inst = toy_instance(dir, true);
    Image base(6, 6, Rgb{200, 200, 200});
    Image edit(6, 6, Rgb{10, 10, 10});
    PromptRegistry prompts = builtin_prompts();

    ScriptedChat always_one(std::vector<ScriptedChat::Script>{{"reply with 1", {"1"}}});
    REQUIRE(correctness_reward(always_one, prompts, base, edit, inst, 8, 1.0) == 1.0);

    ScriptedChat alternating({{"reply with 1", {"1", "0", "1", "0"}}});
    REQUIRE(correctness_reward(alternating, prompts, base, edit, inst, 4, 1.0) == 0.5);

    ScriptedChat unsure(std::vector<ScriptedChat::Script>{{"reply with 1", {"unsure"}}});
    REQUIRE(correctness_reward(unsure, prompts, base, edit, inst, 4, 1.0) == 0.0);

    ScriptedChat chat({});
    REQUIRE_THROWS_AS(correctness_reward(chat, prompts, base, edit, inst, 0, 1.0),
                      std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("the data filter keeps exactly the wrong-to-right instances") {
    fs::path dir = fs::temp_directory_path() / "etchr_rewards_filter";
    fs::remove_all(dir);
    TaskInstance inst = toy_instance(dir, true);
    Grader grader = default_grader();
    PromptRegistry prompts = builtin_prompts();
    // The conditioned call carries the reasoning preamble, the raw call only
    // the question; key the script off an excerpt of that preamble.
    const std::string reason_marker =
        get_prompt(prompts, TaskFamily::perception, PromptRole::reason).substr(0, 24);

    auto run_filter = [&](const std::string& raw, const std::string& conditioned) {
        ScriptedChat chat({{reason_marker, {conditioned}}, {inst.question, {raw}}});
        return rl_filter(chat, prompts, dir, inst, grader);
    };

    REQUIRE(run_filter("no", "yes") == true);   // wrong raw, right conditioned
    REQUIRE(run_filter("yes", "yes") == false); // already solvable
    REQUIRE(run_filter("yes", "no") == false);
    REQUIRE(run_filter("no", "no") == false); // no verifiable upper bound

    TaskInstance no_edit = toy_instance(dir, false);
    ScriptedChat chat({});
    REQUIRE_THROWS_AS(rl_filter(chat, prompts, dir, no_edit, grader), ValidationError);
    fs::remove_all(dir);
}

TEST_CASE("rollout groups compose per-edit rewards into advantages") {
    RewardFixture fx(4);
    const auto& inst = fx.manifest.instances[0];
    Image gt = load_png((fx.dir / *inst.edit_path).string());
    int cell_px = std::stoi(inst.meta.at("cell_px"));
    Image bad = roll_horizontal(gt, cell_px);

    auto inner = std::make_shared<OracleChat>(fx.lookup);
    OracleChat understander(fx.lookup);
    GridJudgeChat judge(fx.lookup, inner);
    Grader grader = default_grader();
    PromptRegistry prompts = builtin_prompts();

    SECTION("one good and one bad edit split the group") {
        auto scored = score_rollout_group(fx.dir, inst, {gt, bad}, understander, judge,
                                          grader, prompts, 1, 0.5, 0.5, 0.0);
        REQUIRE(scored.records.size() == 2);
        REQUIRE(scored.records[0].r_guide == 1.0);
        REQUIRE(scored.records[0].r_correct == 1.0);
        REQUIRE(scored.records[1].r_guide == 0.0);
        REQUIRE(scored.records[1].r_correct == 0.0);
        REQUIRE(scored.group.rewards == std::vector<double>{1.0, 0.0});
        REQUIRE(scored.group.win_rates == std::vector<double>{1.0, 0.0});
        REQUIRE(scored.group.advantages[0] == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(scored.group.advantages[1] == Catch::Approx(-1.0).margin(1e-9));
        for (const auto& record : scored.records)
            REQUIRE(record.combined == 0.5 * record.r_guide + 0.5 * record.r_correct);
    }
    SECTION("identical edits are a degenerate group") {
        std::vector<Image> edits(8, gt);
        auto scored = score_rollout_group(fx.dir, inst, edits, understander, judge, grader,
                                          prompts, 1, 0.5, 0.5, 0.0);
        REQUIRE(scored.group.g == 8);
        REQUIRE(scored.group.advantages == std::vector<double>(8, 0.0));
    }
    SECTION("groups need at least two edits") {
        REQUIRE_THROWS_AS(score_rollout_group(fx.dir, inst, {gt}, understander, judge,
                                              grader, prompts, 1),
                          std::invalid_argument);
    }
}

TEST_CASE("dataset filtering samples per family and reports gaps") {
    RewardFixture fx(10);
    EvenIdChat chat(fx.lookup);
    Grader grader = default_grader();
    PromptRegistry prompts = builtin_prompts();

    SECTION("even-id mock keeps half the corpus") {
        std::vector<std::string> warnings;
        auto kept = build_rl_dataset(fx.manifest, chat, grader, prompts, 10, 99,
                                     {TaskFamily::maze}, &warnings);
        REQUIRE(kept.instances.size() == 5);
        for (const auto& inst : kept.instances) {
            int suffix = std::stoi(inst.id.substr(inst.id.rfind('-') + 1));
            REQUIRE(suffix % 2 == 0);
            REQUIRE(inst.meta.at("rl_filter") == "kept");
        }
        REQUIRE(warnings.empty());
    }
    SECTION("absent families produce warnings, not errors") {
        std::vector<std::string> warnings;
        auto kept = build_rl_dataset(fx.manifest, chat, grader, prompts, 10, 99,
                                     {kAllTaskFamilies.begin(), kAllTaskFamilies.end()},
                                     &warnings);
        REQUIRE(kept.instances.size() == 5);
        REQUIRE(warnings.size() == 5); // every family except maze
        for (const auto& w : warnings)
            REQUIRE(w.find("absent from corpus") != std::string::npos);
    }
    SECTION("quota zero keeps nothing") {
        auto kept = build_rl_dataset(fx.manifest, chat, grader, prompts, 0, 99,
                                     {TaskFamily::maze});
        REQUIRE(kept.instances.empty());
    }
    SECTION("sampling below the corpus size is seeded and stable") {
        auto first = build_rl_dataset(fx.manifest, chat, grader, prompts, 4, 7,
                                      {TaskFamily::maze});
        auto second = build_rl_dataset(fx.manifest, chat, grader, prompts, 4, 7,
                                       {TaskFamily::maze});
        REQUIRE(first.instances.size() == second.instances.size());
        for (std::size_t i = 0; i < first.instances.size(); ++i)
            REQUIRE(first.instances[i].id == second.instances[i].id);
        REQUIRE(first.instances.size() <= 4);
    }
    SECTION("filter errors are reported and the instance is skipped") {
        ThrowingChat throwing(fx.manifest.instances[0].question);
        std::vector<std::string> warnings;
        auto kept = build_rl_dataset(fx.manifest, throwing, grader, prompts, 10, 99,
                                     {TaskFamily::maze}, &warnings);
        REQUIRE(kept.instances.empty()); // raw answer "no idea" then edits never help
        REQUIRE(warnings.size() == 10);  // same question text on all instances
        for (const auto& w : warnings)
            REQUIRE(w.find("filter error") != std::string::npos);
    }
}

TEST_CASE("scored groups survive the line-record round trip") {
    RewardFixture fx(2);
    const auto& inst = fx.manifest.instances[0];
    Image gt = load_png((fx.dir / *inst.edit_path).string());
    Image bad = roll_horizontal(gt, std::stoi(inst.meta.at("cell_px")));
    OracleChat understander(fx.lookup);
    auto inner = std::make_shared<OracleChat>(fx.lookup);
    GridJudgeChat judge(fx.lookup, inner);

    auto scored = score_rollout_group(fx.dir, inst, {gt, bad, gt}, understander, judge,
                                      default_grader(), builtin_prompts(), 2, 0.5, 0.5, 0.0);
    scored.group_index = 3;

    fs::path path = fs::temp_directory_path() / "etchr_rewards_groups.jsonl";
    save_scored_groups(path, {scored});
    auto loaded = load_scored_groups(path);
    fs::remove(path);

    REQUIRE(loaded.size() == 1);
    REQUIRE(loaded[0].instance_id == scored.instance_id);
    REQUIRE(loaded[0].group_index == 3);
    REQUIRE(loaded[0].group.g == scored.group.g);
    REQUIRE(loaded[0].group.rewards == scored.group.rewards);
    REQUIRE(loaded[0].group.win_rates == scored.group.win_rates);
    REQUIRE(loaded[0].group.advantages == scored.group.advantages);
    REQUIRE(loaded[0].records.size() == scored.records.size());
    for (std::size_t i = 0; i < scored.records.size(); ++i) {
        REQUIRE(loaded[0].records[i].edit_index == scored.records[i].edit_index);
        REQUIRE(loaded[0].records[i].k == scored.records[i].k);
        REQUIRE(loaded[0].records[i].guide_outcomes == scored.records[i].guide_outcomes);
        REQUIRE(loaded[0].records[i].correct_outcomes == scored.records[i].correct_outcomes);
        REQUIRE(loaded[0].records[i].combined == scored.records[i].combined);
    }

    REQUIRE_THROWS_AS(load_scored_groups(path), IoError);
}
