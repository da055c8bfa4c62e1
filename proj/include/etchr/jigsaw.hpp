#pragma once

// Tile permutations, puzzle assembly/grading, and jigsaw dataset generation.

#include <cstdio>
#include <filesystem>
#include <numeric>

#include "etchr/png.hpp"
#include "etchr/random.hpp"
#include "etchr/task.hpp"

namespace etchr {

// map[out_slot] = in_slot: tile at output slot j is taken from input slot map[j].
struct Permutation {
    std::vector<int> map;

    static Permutation identity(int n) {
        Permutation p;
        p.map.resize(std::size_t(n));
        std::iota(p.map.begin(), p.map.end(), 0);
        return p;
    }

    bool valid() const {
        std::vector<bool> seen(map.size(), false);
        for (int v : map) {
            if (v < 0 || std::size_t(v) >= map.size() || seen[std::size_t(v)])
                return false;
            seen[std::size_t(v)] = true;
        }
        return !map.empty();
    }

    bool is_identity() const {
        for (std::size_t i = 0; i < map.size(); ++i)
            if (map[i] != int(i))
                return false;
        return true;
    }

    Permutation inverse() const {
        Permutation inv;
        inv.map.assign(map.size(), 0);
        for (std::size_t i = 0; i < map.size(); ++i)
            inv.map[std::size_t(map[i])] = int(i);
        return inv;
    }

    friend bool operator==(const Permutation&, const Permutation&) = default;
};

// apply(compose(a, b), img) == apply(a, apply(b, img))
inline Permutation compose(const Permutation& a, const Permutation& b) {
    if (a.map.size() != b.map.size())
        throw std::invalid_argument("compose: size mismatch");
    Permutation out;
    out.map.resize(a.map.size());
    for (std::size_t j = 0; j < a.map.size(); ++j)
        out.map[j] = b.map[std::size_t(a.map[j])];
    return out;
}

// Uniform over non-identity permutations of n >= 2 slots, by rejection.
inline Permutation sample_permutation(Rng& rng, int n) {
    if (n < 2)
        throw std::invalid_argument("sample_permutation: need at least 2 slots");
    Permutation p = Permutation::identity(n);
    do {
        rng.shuffle(p.map);
    } while (p.is_identity());
    return p;
}

// Rearranges tiles of an image cut into rows x cols.
inline Image apply_permutation(const Image& img, int rows, int cols, const Permutation& perm) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("apply_permutation: bad grid");
    if (int(perm.map.size()) != rows * cols || !perm.valid())
        throw std::invalid_argument("apply_permutation: permutation does not fit the grid");
    if (img.width() % cols != 0 || img.height() % rows != 0)
        throw std::invalid_argument("apply_permutation: image not divisible into tiles");
    const int tw = img.width() / cols;
    const int th = img.height() / rows;
    Image out(img.width(), img.height());
    for (int slot = 0; slot < rows * cols; ++slot) {
        const int src = perm.map[std::size_t(slot)];
        const int sx = (src % cols) * tw, sy = (src / cols) * th;
        const int dx = (slot % cols) * tw, dy = (slot / cols) * th;
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < tw; ++x)
                out.set(dx + x, dy + y, img.at(sx + x, sy + y));
    }
    return out;
}

inline Image make_puzzle(const Image& original, int rows, int cols, const Permutation& perm) {
    return apply_permutation(original, rows, cols, perm);
}

// Tile-level comparison: every tile's mean absolute channel difference must
// stay within tolerance (default 12/255). The candidate is resampled to the
// reference size first, so editors may return other resolutions.
inline bool grade_restoration(const Image& reference, const Image& candidate, int rows,
                              int cols, double tolerance = 12.0) {
    if (rows < 1 || cols < 1 || reference.width() % cols != 0 ||
        reference.height() % rows != 0)
        throw std::invalid_argument("grade_restoration: bad grid for reference image");
    Image scaled = resize_bilinear(candidate, reference.width(), reference.height());
    const int tw = reference.width() / cols;
    const int th = reference.height() / rows;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            Image ref_tile = reference.crop(c * tw, r * th, tw, th);
            Image got_tile = scaled.crop(c * tw, r * th, tw, th);
            if (mean_abs_diff(ref_tile, got_tile) > tolerance)
                return false;
        }
    return true;
}

// Deterministic colorful scene: two-color vertical gradient plus shapes.
// Distinct enough that misplaced tiles land far outside the grading band.
inline Image jigsaw_scene(std::uint64_t seed, int width, int height) {
    Rng rng(seed);
    Image img(width, height);
    Rgb top{std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256)),
            std::uint8_t(rng.below(256))};
    Rgb bottom{std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256)),
               std::uint8_t(rng.below(256))};
    for (int y = 0; y < height; ++y) {
        double t = height > 1 ? double(y) / (height - 1) : 0.0;
        Rgb row{std::uint8_t(top.r + t * (bottom.r - top.r)),
                std::uint8_t(top.g + t * (bottom.g - top.g)),
                std::uint8_t(top.b + t * (bottom.b - top.b))};
        img.fill_rect(0, y, width, y + 1, row);
    }
    for (int i = 0; i < 14; ++i) {
        int x0 = int(rng.below(std::uint64_t(width)));
        int y0 = int(rng.below(std::uint64_t(height)));
        int w = 4 + int(rng.below(std::uint64_t(width / 2)));
        int h = 4 + int(rng.below(std::uint64_t(height / 2)));
        Rgb color{std::uint8_t(rng.below(256)), std::uint8_t(rng.below(256)),
                  std::uint8_t(rng.below(256))};
        img.fill_rect(x0, y0, x0 + w, y0 + h, color);
    }
    return img;
}

struct JigsawTaskParams {
    std::uint64_t seed = 0;
    int count = 0;
    std::vector<std::pair<int, int>> grids = {{2, 2}, {3, 3}}; // (rows, cols), round-robin
    int tile_px = 48;
};

inline std::string jigsaw_question(int rows, int cols) {
    return "The image shows a jigsaw of " + std::to_string(rows) + "x" +
           std::to_string(cols) +
           " tiles, indexed row-major from 0, whose tiles were shuffled. For each "
           "position of the restored image in row-major order, reply with the index "
           "of the shuffled tile that belongs there, as comma-separated integers.";
}

inline std::string serialize_permutation(const Permutation& p) {
    std::string out;
    for (std::size_t i = 0; i < p.map.size(); ++i) {
        if (i)
            out += ",";
        out += std::to_string(p.map[i]);
    }
    return out;
}

inline Permutation parse_permutation(const std::string& text) {
    Permutation p;
    p.map = extract_integers(text);
    if (!p.valid())
        throw ValidationError("not a valid permutation: '" + text + "'");
    return p;
}

// Regenerates (original scene, shuffle permutation) from instance metadata.
inline std::pair<Image, Permutation>
jigsaw_from_metadata(const std::map<std::string, std::string>& meta) {
    auto get = [&](const std::string& key) -> const std::string& {
        auto it = meta.find(key);
        if (it == meta.end())
            throw ValidationError("jigsaw_from_metadata: missing key '" + key + "'");
        return it->second;
    };
    int rows = std::stoi(get("rows"));
    int cols = std::stoi(get("cols"));
    int tile_px = std::stoi(get("tile_px"));
    std::uint64_t seed = std::stoull(get("seed"));
    Permutation perm = parse_permutation(get("perm"));
    if (int(perm.map.size()) != rows * cols)
        throw ValidationError("jigsaw_from_metadata: permutation does not fit the grid");
    return {jigsaw_scene(seed, cols * tile_px, rows * tile_px), perm};
}

// Image on disk is the shuffled puzzle; the ground-truth edit is the original
// scene. The graded answer is the inverse permutation: for each restored
// position, the shuffled slot whose tile belongs there.
inline DatasetManifest make_jigsaw_tasks(const JigsawTaskParams& params,
                                         const std::filesystem::path& root,
                                         bool write_edits = true) {
    if (params.count <= 0)
        throw std::invalid_argument("make_jigsaw_tasks: count must be positive");
    if (params.grids.empty())
        throw std::invalid_argument("make_jigsaw_tasks: grids must be nonempty");
    if (params.tile_px < 8)
        throw std::invalid_argument("make_jigsaw_tasks: tile_px must be >= 8");
    for (auto [r, c] : params.grids)
        if (r < 1 || c < 1 || r * c < 2)
            throw std::invalid_argument("make_jigsaw_tasks: grid needs at least 2 tiles");

    DatasetManifest manifest;
    manifest.root = root;
    std::filesystem::create_directories(root / "images");
    if (write_edits)
        std::filesystem::create_directories(root / "edits");

    for (int i = 0; i < params.count; ++i) {
        const auto [rows, cols] = params.grids[std::size_t(i) % params.grids.size()];
        const std::uint64_t inst_seed = derive_seed(params.seed, std::uint64_t(i));
        Rng rng(inst_seed);
        Image original = jigsaw_scene(inst_seed, cols * params.tile_px, rows * params.tile_px);
        Permutation perm = sample_permutation(rng, rows * cols);
        Image shuffled = make_puzzle(original, rows, cols, perm);

        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "jigsaw-%05d", i);
        TaskInstance t;
        t.id = idbuf;
        t.family = TaskFamily::jigsaw;
        t.image_path = "images/" + t.id + ".png";
        t.question = jigsaw_question(rows, cols);
        t.answer = PermutationAnswer{perm.inverse().map};
        t.meta["rows"] = std::to_string(rows);
        t.meta["cols"] = std::to_string(cols);
        t.meta["tile_px"] = std::to_string(params.tile_px);
        t.meta["seed"] = std::to_string(inst_seed);
        t.meta["perm"] = serialize_permutation(perm);

        save_png(shuffled, (root / t.image_path).string());
        if (write_edits) {
            t.edit_path = "edits/" + t.id + ".png";
            save_png(original, (root / *t.edit_path).string());
        }
        manifest.instances.push_back(std::move(t));
    }
    save_manifest(manifest);
    return manifest;
}

} // namespace etchr
