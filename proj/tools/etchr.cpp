// Command-line front end: dataset generation, edit-verify-reason runs over a
// manifest, reward scoring, the diagnostic experiments, and report emission.
//
// Exit codes: 0 success, 1 validation/config error, 2 backend transport or
// protocol failure, 3 run aborted (failure threshold or interrupt).

#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "etchr/etchr.hpp"

namespace {

using namespace etchr;
namespace fs = std::filesystem;

std::atomic<bool> g_cancel{false};

extern "C" void on_sigint(int) { g_cancel.store(true); }

void diag(const std::string& kind, const std::string& message) {
    nlohmann::json j = {{"error", kind}, {"message", message}};
    std::cerr << j.dump() << '\n';
}

void warn(const std::string& message) {
    nlohmann::json j = {{"warning", message}};
    std::cerr << j.dump() << '\n';
}

std::pair<int, int> parse_size(const std::string& text) {
    const auto x = text.find('x');
    try {
        if (x != std::string::npos)
            return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
    } catch (const std::exception&) {
    }
    throw ConfigError("expected WIDTHxHEIGHT, got '" + text + "'");
}

std::vector<std::pair<int, int>> parse_sizes(const std::vector<std::string>& texts) {
    std::vector<std::pair<int, int>> sizes;
    for (const auto& t : texts)
        sizes.push_back(parse_size(t));
    return sizes;
}

// ── Backend selection: mocks by name, HTTP endpoints from config ─────

std::unique_ptr<EditorBackend> make_mock_editor(const std::string& name,
                                                std::shared_ptr<const InstanceLookup> lookup) {
    if (name == "oracle")
        return std::make_unique<OracleEditor>(lookup);
    if (name == "corrupting")
        return std::make_unique<CorruptingEditor>(lookup);
    if (name == "failing")
        return std::make_unique<FailingEditor>();
    if (name.rfind("depth-limited:", 0) == 0) {
        int threshold = 0;
        try {
            threshold = std::stoi(name.substr(std::string("depth-limited:").size()));
        } catch (const std::exception&) {
            throw ConfigError("expected depth-limited:<N>, got '" + name + "'");
        }
        return std::make_unique<DepthLimitedEditor>(lookup, threshold);
    }
    throw ConfigError("unknown mock editor '" + name +
                      "' (oracle|corrupting|failing|depth-limited:<N>)");
}

std::unique_ptr<ChatBackend> make_mock_chat(const std::string& name,
                                            std::shared_ptr<const InstanceLookup> lookup) {
    if (name == "oracle")
        return std::make_unique<OracleChat>(lookup);
    if (name == "echo")
        return std::make_unique<EchoChat>();
    if (name == "grid-judge")
        return std::make_unique<GridJudgeChat>(lookup, std::make_shared<OracleChat>(lookup));
    throw ConfigError("unknown mock chat '" + name + "' (oracle|echo|grid-judge)");
}

std::unique_ptr<EditorBackend> resolve_editor(const std::string& mock,
                                              const RunConfig& config,
                                              std::shared_ptr<const InstanceLookup> lookup) {
    if (!mock.empty())
        return make_mock_editor(mock, std::move(lookup));
    if (config.editor)
        return std::make_unique<HttpEditorBackend>(*config.editor);
    throw ConfigError("no editor: pass --mock-editor or configure backends.editor");
}

std::unique_ptr<ChatBackend> resolve_chat(const std::string& mock, const RunConfig& config,
                                          std::shared_ptr<const InstanceLookup> lookup,
                                          const char* flag, const char* section) {
    if (!mock.empty())
        return make_mock_chat(mock, std::move(lookup));
    if (config.understander)
        return std::make_unique<HttpChatBackend>(*config.understander);
    throw ConfigError(std::string("no chat backend: pass ") + flag + " or configure " +
                      section);
}

std::unique_ptr<ChatBackend> resolve_judge(const std::string& mock, const RunConfig& config,
                                           std::shared_ptr<const InstanceLookup> lookup) {
    if (!mock.empty())
        return make_mock_chat(mock, lookup);
    if (config.judge)
        return std::make_unique<HttpChatBackend>(*config.judge);
    if (config.understander)
        return std::make_unique<HttpChatBackend>(*config.understander);
    throw ConfigError("no judge: pass --mock-judge or configure backends.judge");
}

// ── Shared option bundles ────────────────────────────────────────────

struct CommonOpts {
    std::string config_path;
    bool dry_run = false;

    RunConfig load() const {
        return config_path.empty() ? RunConfig{} : load_run_config(config_path);
    }
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Run configuration file (JSON)");
    cmd->add_flag("--dry-run", opts.dry_run, "Validate inputs and exit without side effects");
}

std::string default_run_id(uint64_t seed, std::size_t instances) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "run-%016llx",
                  static_cast<unsigned long long>(derive_seed(seed, instances)));
    return buf;
}

Grader cli_grader() { return default_grader(); }

// Applies flag-level overrides on top of the loaded config document.
struct PipelineOverrides {
    CLI::Option* reflection_opt = nullptr;
    bool reflection_value = true;
    CLI::Option* unparsable_opt = nullptr;
    std::string unparsable_value;
    CLI::Option* parallelism_opt = nullptr;
    int parallelism_value = 1;
    CLI::Option* ratio_opt = nullptr;
    double ratio_value = 1.0;
    CLI::Option* seed_opt = nullptr;
    uint64_t seed_value = 0;

    void add(CLI::App* cmd) {
        reflection_opt = cmd->add_flag("--reflection,!--no-reflection", reflection_value,
                                       "Verify edits before reasoning");
        unparsable_opt = cmd->add_option("--on-unparsable", unparsable_value,
                                         "Unparsable verify verdict policy")
                             ->check(CLI::IsMember({"fallback", "proceed"}));
        parallelism_opt = cmd->add_option("--parallelism", parallelism_value,
                                          "Worker threads for the run")
                              ->check(CLI::PositiveNumber);
        ratio_opt = cmd->add_option("--max-failure-ratio", ratio_value,
                                    "Abort once failed/total exceeds this");
        seed_opt = cmd->add_option("--seed", seed_value, "Seed forwarded to image edits");
    }

    void apply(RunConfig& config) const {
        if (reflection_opt->count())
            config.reflection = reflection_value;
        if (unparsable_opt->count())
            config.on_unparsable = unparsable_value == "proceed" ? UnparsablePolicy::proceed
                                                                 : UnparsablePolicy::fallback;
        if (parallelism_opt->count())
            config.parallelism = parallelism_value;
        if (ratio_opt->count())
            config.max_failure_ratio = ratio_value;
        if (seed_opt->count())
            config.generation.seed = seed_value;
    }
};

// ── main ─────────────────────────────────────────────────────────────

} // namespace

int main(int argc, char** argv) {
    std::signal(SIGINT, on_sigint);
    CLI::App app{"Edit-verify-reason harness: dataset generation, pipeline runs, "
                 "reward scoring, experiments, and reports."};
    app.require_subcommand(1);
    app.footer(config_key_help());
    app.get_formatter()->column_width(34);

    int exit_code = 0;
    // body installed per subcommand; executed after parsing succeeds
    std::function<int()> body;

    // gen -------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "Generate datasets");
    gen->require_subcommand(1);

    struct {
        CommonOpts common;
        int count = 100;
        std::vector<std::string> sizes = {"6x6"};
        std::vector<int> lengths = {3};
        uint64_t seed = 0;
        double hole_fraction = 0.2;
        int cell_px = 32;
        std::string out;
        GridKind kind = GridKind::maze;
    } gen_grid;

    for (auto [name, kind, help] :
         {std::tuple{"maze", GridKind::maze, "Maze navigation tasks"},
          std::tuple{"lake", GridKind::frozen_lake, "Frozen-lake crossing tasks"}}) {
        auto* cmd = gen->add_subcommand(name, help);
        add_common(cmd, gen_grid.common);
        cmd->add_option("--count", gen_grid.count, "Total instances")->check(CLI::PositiveNumber);
        cmd->add_option("--sizes", gen_grid.sizes, "Grid sizes, e.g. 9x9,7x7")->delimiter(',');
        cmd->add_option("--L", gen_grid.lengths, "Target path lengths, e.g. 1,3,5")
            ->delimiter(',');
        cmd->add_option("--seed", gen_grid.seed, "Generation seed");
        cmd->add_option("--cell-px", gen_grid.cell_px, "Rendered cell size in pixels");
        if (kind == GridKind::frozen_lake)
            cmd->add_option("--hole-fraction", gen_grid.hole_fraction,
                            "Fraction of open cells turned into holes");
        cmd->add_option("--out", gen_grid.out, "Dataset root directory")->required();
        GridKind bound_kind = kind;
        cmd->callback([&gen_grid, &body, bound_kind] {
            gen_grid.kind = bound_kind;
            body = [&gen_grid] {
                GridTaskParams params;
                params.kind = gen_grid.kind;
                params.seed = gen_grid.seed;
                params.count = gen_grid.count;
                params.lengths = gen_grid.lengths;
                params.sizes = parse_sizes(gen_grid.sizes);
                params.hole_fraction = gen_grid.hole_fraction;
                params.render.cell_px = gen_grid.cell_px;
                params.render.validate();
                if (gen_grid.common.dry_run) {
                    std::cout << "dry-run ok: " << params.count << " instances -> "
                              << gen_grid.out << '\n';
                    return 0;
                }
                auto manifest = make_grid_tasks(params, gen_grid.out);
                std::cout << "wrote " << manifest.instances.size() << " instances to "
                          << gen_grid.out << '\n';
                return 0;
            };
        });
    }

    struct {
        CommonOpts common;
        int count = 50;
        std::vector<std::string> grids = {"2x2", "3x3"};
        int tile_px = 48;
        uint64_t seed = 0;
        std::string out;
    } gen_jigsaw;
    {
        auto* cmd = gen->add_subcommand("jigsaw", "Jigsaw restoration tasks");
        add_common(cmd, gen_jigsaw.common);
        cmd->add_option("--count", gen_jigsaw.count, "Total instances")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--grids", gen_jigsaw.grids, "Tile grids, e.g. 2x2,3x3")
            ->delimiter(',');
        cmd->add_option("--tile-px", gen_jigsaw.tile_px, "Tile edge length in pixels");
        cmd->add_option("--seed", gen_jigsaw.seed, "Generation seed");
        cmd->add_option("--out", gen_jigsaw.out, "Dataset root directory")->required();
        cmd->callback([&gen_jigsaw, &body] {
            body = [&gen_jigsaw] {
                JigsawTaskParams params;
                params.seed = gen_jigsaw.seed;
                params.count = gen_jigsaw.count;
                params.grids = parse_sizes(gen_jigsaw.grids);
                params.tile_px = gen_jigsaw.tile_px;
                if (params.tile_px < 8 || params.count <= 0)
                    throw ConfigError("jigsaw: tile-px must be >= 8 and count positive");
                if (gen_jigsaw.common.dry_run) {
                    std::cout << "dry-run ok: " << params.count << " instances -> "
                              << gen_jigsaw.out << '\n';
                    return 0;
                }
                auto manifest = make_jigsaw_tasks(params, gen_jigsaw.out);
                std::cout << "wrote " << manifest.instances.size() << " instances to "
                          << gen_jigsaw.out << '\n';
                return 0;
            };
        });
    }

    struct {
        CommonOpts common;
        std::string annotations;
        std::string images;
        std::string family = "perception";
        std::string out;
    } gen_overlay;
    {
        auto* cmd = gen->add_subcommand("overlay",
                                        "Ingest box annotations into an overlay dataset");
        add_common(cmd, gen_overlay.common);
        cmd->add_option("--annotations", gen_overlay.annotations,
                        "Line-delimited annotation records")
            ->required();
        cmd->add_option("--images", gen_overlay.images, "Directory holding source images")
            ->required();
        cmd->add_option("--family", gen_overlay.family, "Task family for the records")
            ->check(CLI::IsMember({"perception", "chart"}));
        cmd->add_option("--out", gen_overlay.out, "Dataset root directory")->required();
        cmd->callback([&gen_overlay, &body] {
            body = [&gen_overlay] {
                TaskFamily family = task_family_from_string(gen_overlay.family);
                if (gen_overlay.common.dry_run) {
                    if (!fs::exists(gen_overlay.annotations))
                        throw IoError("annotations file not found: " + gen_overlay.annotations);
                    std::cout << "dry-run ok: " << gen_overlay.annotations << " -> "
                              << gen_overlay.out << '\n';
                    return 0;
                }
                auto result = ingest_annotations(gen_overlay.annotations, gen_overlay.images,
                                                 family, gen_overlay.out);
                for (const auto& e : result.errors)
                    warn("line " + std::to_string(e.line) + ": " + e.reason);
                std::cout << "wrote " << result.manifest.instances.size() << " instances to "
                          << gen_overlay.out << " (" << result.errors.size()
                          << " rejected)\n";
                return 0;
            };
        });
    }

    // run ---------------------------------------------------------------
    struct {
        CommonOpts common;
        std::string dataset;
        std::string out;
        std::string run_id;
        std::string mock_editor;
        std::string mock_chat;
        int limit = 0;
        PipelineOverrides overrides;
    } run_opts;
    {
        auto* cmd = app.add_subcommand("run", "Run the edit-verify-reason pipeline");
        add_common(cmd, run_opts.common);
        cmd->add_option("--dataset", run_opts.dataset, "Dataset root with manifest.jsonl")
            ->required();
        cmd->add_option("--out", run_opts.out, "Directory receiving runs/<run-id>");
        cmd->add_option("--run-id", run_opts.run_id, "Run identifier (derived when absent)");
        cmd->add_option("--mock-editor", run_opts.mock_editor,
                        "oracle|corrupting|failing|depth-limited:<N>");
        cmd->add_option("--mock-chat", run_opts.mock_chat, "oracle|echo|grid-judge");
        cmd->add_option("--limit", run_opts.limit, "Use only the first N instances");
        run_opts.overrides.add(cmd);
        cmd->callback([&run_opts, &body] {
            body = [&run_opts] {
                RunConfig config = run_opts.common.load();
                run_opts.overrides.apply(config);

                auto manifest = load_manifest(run_opts.dataset);
                if (run_opts.limit > 0 &&
                    manifest.instances.size() > std::size_t(run_opts.limit))
                    manifest.instances.resize(std::size_t(run_opts.limit));
                auto lookup = std::make_shared<InstanceLookup>(manifest);

                auto editor = resolve_editor(run_opts.mock_editor, config, lookup);
                auto chat = resolve_chat(run_opts.mock_chat, config, lookup, "--mock-chat",
                                         "backends.understander");

                PipelineConfig pipeline = config.make_pipeline_config();
                pipeline.cancel = &g_cancel;

                const uint64_t seed = config.generation.seed.value_or(0);
                const std::string run_id = run_opts.run_id.empty()
                                               ? default_run_id(seed, manifest.instances.size())
                                               : run_opts.run_id;
                fs::path out_root = !run_opts.out.empty() ? fs::path(run_opts.out)
                                    : !config.out.empty() ? config.out
                                                          : fs::path("runs");
                const fs::path run_dir = out_root / run_id;

                if (run_opts.common.dry_run) {
                    std::cout << "dry-run ok: " << manifest.instances.size()
                              << " instances -> " << run_dir.string() << '\n';
                    return 0;
                }
                auto result = run_dataset(manifest, *editor, *chat, pipeline,
                                          config.parallelism);
                persist_run(run_dir, run_id, pipeline, result);
                std::cout << "run " << run_id << ": " << result.traces.size() << " instances, "
                          << result.failures << " failures"
                          << (result.aborted ? ", aborted" : "") << '\n'
                          << "traces: " << (run_dir / "traces.jsonl").string() << '\n';
                return result.aborted ? 3 : 0;
            };
        });
    }

    // eval / report -------------------------------------------------------
    struct EvalOpts {
        CommonOpts common;
        std::string traces;
        std::string dataset;
        std::string baseline;
        std::string name = "benchmark";
        std::string out;
        std::vector<std::string> formats = {"json", "csv", "txt"};
        bool quiet = false;
    };
    auto eval_body = [](const EvalOpts& opts) {
        auto manifest = load_manifest(opts.dataset);
        Grader grader = cli_grader();
        auto traces = load_traces(opts.traces);
        auto report = aggregate({pass_at_1(opts.name, traces, manifest, grader)});
        if (!opts.baseline.empty()) {
            auto baseline_traces = load_traces(opts.baseline);
            report.baseline = std::make_shared<RunReport>(
                aggregate({pass_at_1(opts.name, baseline_traces, manifest, grader)}));
        }
        if (opts.common.dry_run) {
            std::cout << "dry-run ok: " << traces.size() << " traces scored\n";
            return 0;
        }
        const fs::path out_dir =
            opts.out.empty() ? fs::path(opts.traces) / "report" : fs::path(opts.out);
        auto files = emit_report(report, out_dir, opts.formats);
        if (!opts.quiet) {
            std::cout << opts.name << ": pass@1 " << report.results[0].pass_at_1 << " over "
                      << report.results[0].n << " instances";
            if (report.baseline)
                std::cout << " (baseline " << report.baseline->results[0].pass_at_1
                          << ", delta "
                          << (report.results[0].pass_at_1 -
                              report.baseline->results[0].pass_at_1)
                          << ")";
            std::cout << '\n';
        }
        for (const auto& f : files)
            std::cout << "report: " << f.string() << '\n';
        return 0;
    };
    static EvalOpts eval_opts;
    static EvalOpts report_opts;
    for (auto [cmd_name, opts_ptr, help] :
         {std::tuple{"eval", &eval_opts, "Score a run and emit a report"},
          std::tuple{"report", &report_opts, "Re-emit reports from persisted traces"}}) {
        auto* cmd = app.add_subcommand(cmd_name, help);
        add_common(cmd, opts_ptr->common);
        cmd->add_option("--traces", opts_ptr->traces, "Run directory holding traces.jsonl")
            ->required();
        cmd->add_option("--dataset", opts_ptr->dataset, "Dataset the run was produced from")
            ->required();
        cmd->add_option("--baseline", opts_ptr->baseline, "Baseline run directory for deltas");
        cmd->add_option("--name", opts_ptr->name, "Benchmark column name");
        cmd->add_option("--out", opts_ptr->out, "Report output directory");
        cmd->add_option("--formats", opts_ptr->formats, "json,csv,txt subset")->delimiter(',');
        cmd->callback([opts_ptr, &body, eval_body] {
            body = [opts_ptr, eval_body] { return eval_body(*opts_ptr); };
        });
    }

    // reward --------------------------------------------------------------
    auto* reward = app.add_subcommand("reward", "Reward scoring and data filtering");
    reward->require_subcommand(1);

    struct {
        CommonOpts common;
        std::string dataset;
        std::string instance_id;
        std::vector<std::string> edits;
        std::string mock_chat;
        std::string mock_judge;
        std::string out;
    } score_opts;
    {
        auto* cmd = reward->add_subcommand("score-group",
                                           "Score a rollout group of edited images");
        add_common(cmd, score_opts.common);
        cmd->add_option("--dataset", score_opts.dataset, "Dataset root")->required();
        cmd->add_option("--instance", score_opts.instance_id, "Instance id")->required();
        cmd->add_option("--edits", score_opts.edits, "Edited images (comma-separated PNGs)")
            ->required()
            ->delimiter(',');
        cmd->add_option("--mock-chat", score_opts.mock_chat, "oracle|echo|grid-judge");
        cmd->add_option("--mock-judge", score_opts.mock_judge, "oracle|echo|grid-judge");
        cmd->add_option("--out", score_opts.out, "Write the scored group as a JSONL record");
        cmd->callback([&score_opts, &body] {
            body = [&score_opts] {
                RunConfig config = score_opts.common.load();
                auto manifest = load_manifest(score_opts.dataset);
                const TaskInstance* instance = nullptr;
                for (const auto& inst : manifest.instances)
                    if (inst.id == score_opts.instance_id)
                        instance = &inst;
                if (!instance)
                    throw ValidationError("instance '" + score_opts.instance_id +
                                          "' not in the manifest");
                auto lookup = std::make_shared<InstanceLookup>(manifest);
                auto understander = resolve_chat(score_opts.mock_chat, config, lookup,
                                                 "--mock-chat", "backends.understander");
                auto judge = resolve_judge(score_opts.mock_judge.empty()
                                               ? score_opts.mock_chat
                                               : score_opts.mock_judge,
                                           config, lookup);
                if (score_opts.common.dry_run) {
                    std::cout << "dry-run ok: " << score_opts.edits.size() << " edits\n";
                    return 0;
                }
                std::vector<Image> edits;
                for (const auto& path : score_opts.edits)
                    edits.push_back(load_png(path));
                auto scored = score_rollout_group(manifest.root, *instance, edits,
                                                  *understander, *judge, cli_grader(),
                                                  config.make_registry(), config.k,
                                                  config.alpha, config.beta,
                                                  config.reward_temperature);
                for (const auto& record : scored.records)
                    std::cout << "edit " << record.edit_index << ": r_guide "
                              << record.r_guide << ", r_correct " << record.r_correct
                              << ", combined " << record.combined << ", win_rate "
                              << scored.group.win_rates[std::size_t(record.edit_index)]
                              << ", advantage "
                              << scored.group.advantages[std::size_t(record.edit_index)]
                              << '\n';
                if (!score_opts.out.empty())
                    save_scored_groups(score_opts.out, {scored});
                return 0;
            };
        });
    }

    struct {
        CommonOpts common;
        std::string dataset;
        int quota = 2000;
        uint64_t seed = 0;
        std::vector<std::string> families;
        std::string mock_chat;
        std::string out_name = "manifest.filtered.jsonl";
    } filter_opts;
    {
        auto* cmd = reward->add_subcommand(
            "filter", "Keep instances the ground-truth edit flips from wrong to right");
        add_common(cmd, filter_opts.common);
        cmd->add_option("--dataset", filter_opts.dataset, "Dataset root")->required();
        cmd->add_option("--quota", filter_opts.quota, "Sample size per family");
        cmd->add_option("--seed", filter_opts.seed, "Sampling seed");
        cmd->add_option("--families", filter_opts.families,
                        "Families to sample (default: all)")
            ->delimiter(',');
        cmd->add_option("--mock-chat", filter_opts.mock_chat, "oracle|echo|grid-judge");
        cmd->add_option("--out-name", filter_opts.out_name,
                        "Manifest filename written inside the dataset root");
        cmd->callback([&filter_opts, &body] {
            body = [&filter_opts] {
                RunConfig config = filter_opts.common.load();
                auto manifest = load_manifest(filter_opts.dataset);
                auto lookup = std::make_shared<InstanceLookup>(manifest);
                auto understander = resolve_chat(filter_opts.mock_chat, config, lookup,
                                                 "--mock-chat", "backends.understander");
                std::vector<TaskFamily> families;
                if (filter_opts.families.empty())
                    families.assign(kAllTaskFamilies.begin(), kAllTaskFamilies.end());
                else
                    for (const auto& name : filter_opts.families)
                        families.push_back(task_family_from_string(name));
                if (filter_opts.common.dry_run) {
                    std::cout << "dry-run ok: " << manifest.instances.size()
                              << " candidates\n";
                    return 0;
                }
                std::vector<std::string> warnings;
                auto kept = build_rl_dataset(manifest, *understander, cli_grader(),
                                             config.make_registry(), filter_opts.quota,
                                             filter_opts.seed, families, &warnings);
                for (const auto& w : warnings)
                    warn(w);
                save_manifest(kept, filter_opts.out_name);
                std::cout << "kept " << kept.instances.size() << " of "
                          << manifest.instances.size() << " -> "
                          << (kept.root / filter_opts.out_name).string() << '\n';
                return 0;
            };
        });
    }

    // experiment ------------------------------------------------------------
    auto* experiment = app.add_subcommand("experiment", "Diagnostic experiments");
    experiment->require_subcommand(1);

    struct {
        CommonOpts common;
        std::string out;
        uint64_t seed = 0;
        std::vector<int> lengths = {1, 3, 5, 7, 10};
        int n_per_l = 100;
        std::string size = "9x9";
        std::string mock_editor;
        std::string validator = "programmatic";
        std::string mock_judge;
    } depth_opts;
    {
        auto* cmd = experiment->add_subcommand(
            "depth-scaling", "Edit correctness as a function of path length");
        add_common(cmd, depth_opts.common);
        cmd->add_option("--out", depth_opts.out, "Output directory")->required();
        cmd->add_option("--seed", depth_opts.seed, "Dataset seed");
        cmd->add_option("--L", depth_opts.lengths, "Path lengths, e.g. 1,3,5,7,10")
            ->delimiter(',');
        cmd->add_option("--n-per-L", depth_opts.n_per_l, "Instances per length")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--size", depth_opts.size, "Grid size, e.g. 9x9");
        cmd->add_option("--mock-editor", depth_opts.mock_editor,
                        "oracle|corrupting|failing|depth-limited:<N>");
        cmd->add_option("--validator", depth_opts.validator, "programmatic|judge")
            ->check(CLI::IsMember({"programmatic", "judge"}));
        cmd->add_option("--mock-judge", depth_opts.mock_judge,
                        "Judge used when --validator judge");
        cmd->callback([&depth_opts, &body] {
            body = [&depth_opts] {
                RunConfig config = depth_opts.common.load();
                if (depth_opts.common.dry_run) {
                    parse_size(depth_opts.size);
                    std::cout << "dry-run ok: " << depth_opts.lengths.size() << " lengths x "
                              << depth_opts.n_per_l << '\n';
                    return 0;
                }
                const fs::path dataset_dir = fs::path(depth_opts.out) / "dataset";
                auto manifest =
                    make_depth_scaling_dataset(dataset_dir, depth_opts.seed,
                                               depth_opts.lengths, depth_opts.n_per_l,
                                               parse_size(depth_opts.size));
                auto lookup = std::make_shared<InstanceLookup>(manifest);
                auto editor = resolve_editor(depth_opts.mock_editor, config, lookup);
                std::unique_ptr<ChatBackend> judge;
                if (depth_opts.validator == "judge")
                    judge = resolve_judge(depth_opts.mock_judge, config, lookup);
                auto result = depth_scaling_experiment(manifest, *editor,
                                                       config.make_registry(), judge.get(),
                                                       config.generation);
                std::ofstream csv(fs::path(depth_opts.out) / "depth.csv",
                                  std::ios::binary | std::ios::trunc);
                csv << "L,attempted,completed,correct,correctness\n";
                for (std::size_t i = 0; i < result.lengths.size(); ++i) {
                    char line[128];
                    std::snprintf(line, sizeof line, "%d,%d,%d,%d,%.4f",
                                  result.lengths[i], result.attempted[i],
                                  result.completed[i], result.correct[i],
                                  result.correctness[i]);
                    csv << line << '\n';
                    std::cout << "L=" << result.lengths[i] << " correctness "
                              << result.correctness[i] << " (" << result.correct[i] << "/"
                              << result.completed[i] << ")\n";
                }
                std::cout << "table: " << (fs::path(depth_opts.out) / "depth.csv").string()
                          << '\n';
                return 0;
            };
        });
    }

    struct {
        CommonOpts common;
        std::string dataset;
        std::string mock_editor;
        std::string mock_enhancer = "echo";
        std::string mock_judge;
        std::string out;
    } ab_opts;
    {
        auto* cmd = experiment->add_subcommand(
            "prompt-ab", "Raw questions vs enhanced instructions as edit prompts");
        add_common(cmd, ab_opts.common);
        cmd->add_option("--dataset", ab_opts.dataset, "Dataset root")->required();
        cmd->add_option("--mock-editor", ab_opts.mock_editor,
                        "oracle|corrupting|failing|depth-limited:<N>");
        cmd->add_option("--mock-enhancer", ab_opts.mock_enhancer, "oracle|echo|grid-judge");
        cmd->add_option("--mock-judge", ab_opts.mock_judge, "oracle|echo|grid-judge");
        cmd->add_option("--out", ab_opts.out, "Optional directory for ab.csv");
        cmd->callback([&ab_opts, &body] {
            body = [&ab_opts] {
                RunConfig config = ab_opts.common.load();
                auto manifest = load_manifest(ab_opts.dataset);
                auto lookup = std::make_shared<InstanceLookup>(manifest);
                auto editor = resolve_editor(ab_opts.mock_editor, config, lookup);
                auto enhancer = resolve_chat(ab_opts.mock_enhancer, config, lookup,
                                             "--mock-enhancer", "backends.understander");
                auto judge = resolve_judge(ab_opts.mock_judge, config, lookup);
                if (ab_opts.common.dry_run) {
                    std::cout << "dry-run ok: " << manifest.instances.size()
                              << " instances\n";
                    return 0;
                }
                auto result = prompt_condition_ab(manifest, *editor, *enhancer, *judge,
                                                  config.make_registry(), config.generation);
                std::cout << "raw-question correctness " << result.raw_rate << " ("
                          << result.raw_correct << "/" << result.n << ")\n"
                          << "enhanced-instruction correctness " << result.enhanced_rate
                          << " (" << result.enhanced_correct << "/" << result.n << ")\n";
                if (!ab_opts.out.empty()) {
                    fs::create_directories(ab_opts.out);
                    std::ofstream csv(fs::path(ab_opts.out) / "ab.csv",
                                      std::ios::binary | std::ios::trunc);
                    csv << "condition,n,correct,rate\n";
                    char line[128];
                    std::snprintf(line, sizeof line, "raw,%zu,%zu,%.4f\n", result.n,
                                  result.raw_correct, result.raw_rate);
                    csv << line;
                    std::snprintf(line, sizeof line, "enhanced,%zu,%zu,%.4f\n", result.n,
                                  result.enhanced_correct, result.enhanced_rate);
                    csv << line;
                }
                return 0;
            };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0)
            return app.exit(e); // --help and friends
        diag("usage", e.what());
        return 1;
    } catch (const TransportError& e) {
        diag("transport", e.what());
        return 2;
    } catch (const ProtocolError& e) {
        diag("protocol", e.what());
        return 2;
    } catch (const std::exception& e) {
        diag("validation", e.what());
        return 1;
    }

    try {
        exit_code = body ? body() : 0;
    } catch (const TransportError& e) {
        diag("transport", e.what());
        return 2;
    } catch (const ProtocolError& e) {
        diag("protocol", e.what());
        return 2;
    } catch (const std::exception& e) {
        diag("validation", e.what());
        return 1;
    }
    return exit_code;
}
