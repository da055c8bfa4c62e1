#pragma once

// Batch generation of maze / frozen-lake datasets on disk.

#include <cstdio>
#include <filesystem>

#include "etchr/gridworld.hpp"
#include "etchr/png.hpp"
#include "etchr/task.hpp"

namespace etchr {

struct GridTaskParams {
    GridKind kind = GridKind::maze;
    std::uint64_t seed = 0;
    int count = 0;                           // total instances
    std::vector<int> lengths = {3};          // target path lengths, round-robin
    std::vector<std::pair<int, int>> sizes = {{6, 6}}; // (width, height), round-robin
    double hole_fraction = 0.2;              // frozen lake only
    RenderSpec render;
};

inline std::string grid_question(GridKind kind) {
    if (kind == GridKind::maze)
        return "Navigate the maze from the green start cell to the red goal cell. "
               "Reply with the shortest sequence of moves as comma-separated words "
               "from {up, down, left, right}.";
    return "Cross the frozen lake from the green start cell to the red goal cell "
           "without stepping into any hole. Reply with the sequence of moves as "
           "comma-separated words from {up, down, left, right}.";
}

// Generates `count` instances, writes <root>/manifest.jsonl plus the base
// renders (and ground-truth overlays when write_edits), and returns the
// manifest. Instance i draws length lengths[i % |lengths|] and size
// sizes[i % |sizes|] from its own derived seed, so any prefix of a larger
// run is bit-identical to a smaller run.
inline DatasetManifest make_grid_tasks(const GridTaskParams& params,
                                       const std::filesystem::path& root,
                                       bool write_edits = true) {
    if (params.count <= 0)
        throw std::invalid_argument("make_grid_tasks: count must be positive");
    if (params.lengths.empty() || params.sizes.empty())
        throw std::invalid_argument("make_grid_tasks: lengths and sizes must be nonempty");
    params.render.validate();
    for (int len : params.lengths)
        for (auto [w, h] : params.sizes)
            if (len < 1 || len > w * h - 1 || w < 2 || h < 2)
                throw std::invalid_argument(
                    "make_grid_tasks: length " + std::to_string(len) +
                    " is not feasible on a " + std::to_string(w) + "x" + std::to_string(h) +
                    " grid");

    DatasetManifest manifest;
    manifest.root = root;
    std::filesystem::create_directories(root / "images");
    if (write_edits)
        std::filesystem::create_directories(root / "edits");

    const std::string prefix = to_string(params.kind);
    for (int i = 0; i < params.count; ++i) {
        const int len = params.lengths[std::size_t(i) % params.lengths.size()];
        const auto [w, h] = params.sizes[std::size_t(i) % params.sizes.size()];
        const std::uint64_t inst_seed = derive_seed(params.seed, std::uint64_t(i));
        auto [grid, path] =
            params.kind == GridKind::maze
                ? generate_maze(inst_seed, w, h, len)
                : generate_frozen_lake(inst_seed, w, h, len, params.hole_fraction);

        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "%s-%05d", prefix.c_str(), i);
        TaskInstance t;
        t.id = idbuf;
        t.family = params.kind == GridKind::maze ? TaskFamily::maze : TaskFamily::frozen_lake;
        t.image_path = "images/" + t.id + ".png";
        t.question = grid_question(params.kind);
        t.answer = MoveSequence{path.moves};
        t.meta = grid_metadata(params.kind, inst_seed, w, h, len, params.hole_fraction,
                               params.render);

        save_png(render_grid(grid, params.render), (root / t.image_path).string());
        if (write_edits) {
            t.edit_path = "edits/" + t.id + ".png";
            save_png(render_path_overlay(grid, path, params.render),
                     (root / *t.edit_path).string());
        }
        manifest.instances.push_back(std::move(t));
    }
    save_manifest(manifest);
    return manifest;
}

} // namespace etchr
