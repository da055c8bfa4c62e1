#pragma once

// Bounding-box overlays for perception/chart tasks, plus lenient ingestion of
// external annotation manifests into the dataset layout.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "etchr/png.hpp"
#include "etchr/task.hpp"

namespace etchr {

// Pixel coordinates, top-left origin.
struct BBox {
    int x = 0, y = 0, w = 0, h = 0;

    bool positive_area() const { return w > 0 && h > 0; }
    bool intersects(int img_w, int img_h) const {
        return x < img_w && y < img_h && x + w > 0 && y + h > 0;
    }
    friend bool operator==(const BBox&, const BBox&) = default;
};

inline int default_box_thickness(int img_w, int img_h) {
    return std::max(2, int(0.004 * std::min(img_w, img_h)));
}

// Draws rectangle outlines, clipped to bounds. Pixels farther than the stroke
// from every box edge keep their input bytes.
inline Image render_bbox_overlay(const Image& image, const std::vector<BBox>& boxes,
                                 Rgb color = {255, 0, 0}, int thickness = 0) {
    if (boxes.empty())
        throw std::invalid_argument("render_bbox_overlay: box list must be nonempty");
    if (thickness <= 0)
        thickness = default_box_thickness(image.width(), image.height());
    for (const auto& b : boxes) {
        if (!b.positive_area())
            throw std::invalid_argument("render_bbox_overlay: box area must be positive");
        if (!b.intersects(image.width(), image.height()))
            throw std::invalid_argument("render_bbox_overlay: box misses the image");
    }
    Image out = image;
    for (const auto& b : boxes) {
        const int t = std::min({thickness, b.w, b.h});
        out.fill_rect(b.x, b.y, b.x + b.w, b.y + t, color);             // top
        out.fill_rect(b.x, b.y + b.h - t, b.x + b.w, b.y + b.h, color); // bottom
        out.fill_rect(b.x, b.y, b.x + t, b.y + b.h, color);             // left
        out.fill_rect(b.x + b.w - t, b.y, b.x + b.w, b.y + b.h, color); // right
    }
    return out;
}

struct IngestError {
    std::size_t line = 0;
    std::string reason;
};

struct IngestResult {
    DatasetManifest manifest;
    std::vector<IngestError> errors;
};

// Reads line-delimited annotation records {image, question, answer, boxes}
// (optional answer_kind: exact_string | multiple_choice), resolves images
// under images_root, and materializes the dataset under out_root with the
// box overlay as the ground-truth edit. Bad records are skipped and
// reported; they never abort the run.
inline IngestResult ingest_annotations(const std::filesystem::path& manifest_path,
                                       const std::filesystem::path& images_root,
                                       TaskFamily family,
                                       const std::filesystem::path& out_root) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + manifest_path.string());

    IngestResult result;
    result.manifest.root = out_root;
    std::filesystem::create_directories(out_root / "images");
    std::filesystem::create_directories(out_root / "edits");

    std::string line;
    std::size_t line_no = 0;
    int emitted = 0;
    auto reject = [&](const std::string& reason) {
        result.errors.push_back({line_no, reason});
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            reject(std::string("bad record: ") + e.what());
            continue;
        }
        if (!j.is_object()) {
            reject("record must be an object");
            continue;
        }
        bool fields_ok = true;
        for (const char* key : {"image", "question", "answer"})
            if (!j.contains(key) || !j[key].is_string()) {
                reject(std::string("missing or non-string '") + key + "'");
                fields_ok = false;
                break;
            }
        if (!fields_ok)
            continue;
        if (!j.contains("boxes") || !j["boxes"].is_array() || j["boxes"].empty()) {
            reject("missing or empty 'boxes'");
            continue;
        }

        std::vector<BBox> boxes;
        bool boxes_ok = true;
        for (const auto& bj : j["boxes"]) {
            if (!bj.is_object() || !bj.contains("x") || !bj.contains("y") ||
                !bj.contains("w") || !bj.contains("h") || !bj["x"].is_number_integer() ||
                !bj["y"].is_number_integer() || !bj["w"].is_number_integer() ||
                !bj["h"].is_number_integer()) {
                reject("box must carry integer x/y/w/h");
                boxes_ok = false;
                break;
            }
            BBox b{bj["x"].get<int>(), bj["y"].get<int>(), bj["w"].get<int>(),
                   bj["h"].get<int>()};
            if (!b.positive_area()) {
                reject("box area must be positive");
                boxes_ok = false;
                break;
            }
            boxes.push_back(b);
        }
        if (!boxes_ok)
            continue;

        const auto image_file = images_root / j["image"].get<std::string>();
        if (!std::filesystem::exists(image_file)) {
            reject("missing image " + image_file.string());
            continue;
        }
        Image img{1, 1};
        try {
            img = load_png(image_file.string());
        } catch (const std::runtime_error& e) {
            reject(std::string("unreadable image: ") + e.what());
            continue;
        }
        bool in_bounds = true;
        for (const auto& b : boxes)
            if (!b.intersects(img.width(), img.height())) {
                reject("box misses the image bounds");
                in_bounds = false;
                break;
            }
        if (!in_bounds)
            continue;

        char idbuf[48];
        std::snprintf(idbuf, sizeof idbuf, "%s-%05d", to_string(family).c_str(), emitted);
        TaskInstance t;
        t.id = idbuf;
        t.family = family;
        t.image_path = "images/" + t.id + ".png";
        t.question = j["question"].get<std::string>();
        const std::string answer_text = j["answer"].get<std::string>();
        std::string kind = j.value("answer_kind", std::string("exact_string"));
        if (kind == "multiple_choice") {
            if (answer_text.size() != 1 || answer_text[0] < 'A' || answer_text[0] > 'F') {
                reject("multiple_choice answer must be a single letter A-F");
                continue;
            }
            t.answer = MultipleChoice{answer_text};
        } else if (kind == "exact_string") {
            t.answer = ExactString{answer_text};
        } else {
            reject("unknown answer_kind '" + kind + "'");
            continue;
        }
        t.edit_path = "edits/" + t.id + ".png";
        t.meta["source_line"] = std::to_string(line_no);
        t.meta["source_image"] = j["image"].get<std::string>();

        save_png(img, (out_root / t.image_path).string());
        save_png(render_bbox_overlay(img, boxes), (out_root / *t.edit_path).string());
        result.manifest.instances.push_back(std::move(t));
        ++emitted;
    }
    save_manifest(result.manifest);
    return result;
}

} // namespace etchr
