#pragma once

// Backend interfaces for the editor, understander, and judge, plus the
// deterministic mocks the test and acceptance suites run against.

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "etchr/errors.hpp"
#include "etchr/gridworld.hpp"
#include "etchr/image.hpp"
#include "etchr/png.hpp"
#include "etchr/task.hpp"

namespace etchr {

struct GenerationParams {
    std::optional<std::uint64_t> seed;
    std::optional<double> guidance_scale; // forwarded opaquely to the endpoint
    std::optional<int> steps;             // forwarded opaquely to the endpoint
    std::optional<int> out_width;         // editors must match input dims unless set
    std::optional<int> out_height;
    double timeout_s = 60.0;

    void validate() const {
        if (timeout_s <= 0)
            throw std::invalid_argument("GenerationParams: timeout must be positive");
    }
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{100}; // doubles per attempt

    void validate() const {
        if (max_attempts < 1)
            throw std::invalid_argument("RetryPolicy: max_attempts must be >= 1");
    }
};

class EditorBackend {
  public:
    virtual ~EditorBackend() = default;
    virtual Image edit(const Image& image, const std::string& prompt,
                       const GenerationParams& params) = 0;
};

class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    // Returns exactly n texts. temperature 0 with n = 1 is the evaluation mode.
    virtual std::vector<std::string> complete(const std::vector<Image>& images,
                                              const std::string& prompt, double temperature,
                                              int n) = 0;
};

enum class Verdict { one, zero, unparsable, skipped };

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::one: return "1";
    case Verdict::zero: return "0";
    case Verdict::unparsable: return "unparsable";
    case Verdict::skipped: return "skipped";
    }
    return "?";
}

// First standalone '0' or '1' (no alphanumeric neighbors) decides; total.
inline Verdict parse_binary_verdict(const std::string& text) {
    auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)); };
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '0' && text[i] != '1')
            continue;
        bool left_ok = i == 0 || !is_word(text[i - 1]);
        bool right_ok = i + 1 == text.size() || !is_word(text[i + 1]);
        if (left_ok && right_ok)
            return text[i] == '1' ? Verdict::one : Verdict::zero;
    }
    return Verdict::unparsable;
}

// Verify prompts instruct a binary reply; nothing else in the harness does.
inline bool looks_like_verify_prompt(const std::string& prompt) {
    return prompt.find("reply with 1") != std::string::npos;
}

// ── Mock world ───────────────────────────────────────────────────────

// Image-keyed view of a dataset: mocks identify the instance behind a call
// by hashing the base image they were given.
class InstanceLookup {
  public:
    struct Entry {
        TaskInstance instance;
        Image base;
        std::optional<Image> gt_edit;
        Entry() : base(1, 1) {}
    };

    InstanceLookup() = default;

    explicit InstanceLookup(const DatasetManifest& manifest) {
        for (const auto& t : manifest.instances) {
            Entry e;
            e.instance = t;
            e.base = load_png((manifest.root / t.image_path).string());
            if (t.edit_path)
                e.gt_edit = load_png((manifest.root / *t.edit_path).string());
            std::uint64_t key = image_hash(e.base);
            entries_[key] = std::move(e);
        }
    }

    const Entry* find(const Image& base_image) const {
        auto it = entries_.find(image_hash(base_image));
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t size() const { return entries_.size(); }

  private:
    std::map<std::uint64_t, Entry> entries_;
};

// Returns the stored ground-truth edit for the instance behind the image.
class OracleEditor : public EditorBackend {
  public:
    explicit OracleEditor(std::shared_ptr<const InstanceLookup> lookup)
        : lookup_(std::move(lookup)) {}

    Image edit(const Image& image, const std::string&, const GenerationParams& params) override {
        params.validate();
        const auto* entry = lookup_->find(image);
        if (!entry)
            throw GenerationError("oracle editor: unknown input image");
        if (!entry->gt_edit)
            throw GenerationError("oracle editor: instance '" + entry->instance.id +
                                  "' has no ground-truth edit");
        return *entry->gt_edit;
    }

  private:
    std::shared_ptr<const InstanceLookup> lookup_;
};

// Horizontal cyclic roll; a path overlay shifted off its cells no longer
// decodes, so this is a deterministic "wrong edit".
inline Image roll_horizontal(const Image& img, int shift) {
    const int w = img.width();
    shift = ((shift % w) + w) % w;
    Image out(w, img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < w; ++x)
            out.set(x, y, img.at((x + shift) % w, y));
    return out;
}

class CorruptingEditor : public EditorBackend {
  public:
    explicit CorruptingEditor(std::shared_ptr<const InstanceLookup> lookup,
                              int default_shift = 16)
        : lookup_(std::move(lookup)), default_shift_(default_shift) {}

    Image edit(const Image& image, const std::string&, const GenerationParams& params) override {
        params.validate();
        const auto* entry = lookup_ ? lookup_->find(image) : nullptr;
        int shift = default_shift_;
        if (entry) {
            auto it = entry->instance.meta.find("cell_px");
            if (it != entry->instance.meta.end())
                shift = std::stoi(it->second);
        }
        if (entry && entry->gt_edit)
            return roll_horizontal(*entry->gt_edit, shift);
        return roll_horizontal(image, shift);
    }

  private:
    std::shared_ptr<const InstanceLookup> lookup_;
    int default_shift_;
};

// Ground truth for shallow instances, corruption past the depth threshold.
class DepthLimitedEditor : public EditorBackend {
  public:
    DepthLimitedEditor(std::shared_ptr<const InstanceLookup> lookup, int threshold)
        : lookup_(std::move(lookup)), oracle_(lookup_), corrupting_(lookup_),
          threshold_(threshold) {}

    Image edit(const Image& image, const std::string& prompt,
               const GenerationParams& params) override {
        const auto* entry = lookup_->find(image);
        if (!entry)
            throw GenerationError("depth-limited editor: unknown input image");
        auto it = entry->instance.meta.find("L");
        if (it == entry->instance.meta.end())
            throw GenerationError("depth-limited editor: instance '" + entry->instance.id +
                                  "' has no path-length metadata");
        const int depth = std::stoi(it->second);
        if (depth <= threshold_)
            return oracle_.edit(image, prompt, params);
        return corrupting_.edit(image, prompt, params);
    }

  private:
    std::shared_ptr<const InstanceLookup> lookup_;
    OracleEditor oracle_;
    CorruptingEditor corrupting_;
    int threshold_;
};

// Always fails; exercises the pipeline's editor-failure handling.
class FailingEditor : public EditorBackend {
  public:
    Image edit(const Image&, const std::string&, const GenerationParams&) override {
        throw GenerationError("editor permanently unavailable");
    }
};

// Substring-keyed response table. Each pattern cycles through its responses;
// unmatched prompts get the default response.
class ScriptedChat : public ChatBackend {
  public:
    struct Script {
        std::string pattern; // substring matched against the prompt
        std::vector<std::string> responses;
    };

    explicit ScriptedChat(std::vector<Script> scripts, std::string default_response = "")
        : scripts_(std::move(scripts)), default_response_(std::move(default_response)),
          cursors_(scripts_.size(), 0) {}

    std::vector<std::string> complete(const std::vector<Image>&, const std::string& prompt,
                                      double, int n) override {
        if (n < 1)
            throw std::invalid_argument("ScriptedChat: n must be >= 1");
        std::lock_guard<std::mutex> lock(mutex_);
        std::vector<std::string> out;
        out.reserve(std::size_t(n));
        for (int k = 0; k < n; ++k) {
            bool matched = false;
            for (std::size_t s = 0; s < scripts_.size(); ++s) {
                if (prompt.find(scripts_[s].pattern) == std::string::npos)
                    continue;
                const auto& responses = scripts_[s].responses;
                out.push_back(responses[cursors_[s] % responses.size()]);
                ++cursors_[s];
                matched = true;
                break;
            }
            if (!matched)
                out.push_back(default_response_);
        }
        return out;
    }

  private:
    std::vector<Script> scripts_;
    std::string default_response_;
    std::vector<std::size_t> cursors_;
    std::mutex mutex_;
};

// Understander that is right exactly when shown the ground-truth edit:
// verify calls return 1 iff the candidate equals the stored edit; reasoning
// calls return the canonical answer iff conditioned on it.
class OracleChat : public ChatBackend {
  public:
    explicit OracleChat(std::shared_ptr<const InstanceLookup> lookup)
        : lookup_(std::move(lookup)) {}

    std::vector<std::string> complete(const std::vector<Image>& images,
                                      const std::string& prompt, double, int n) override {
        if (n < 1)
            throw std::invalid_argument("OracleChat: n must be >= 1");
        if (images.empty())
            throw std::invalid_argument("OracleChat: needs at least the base image");
        const auto* entry = lookup_->find(images[0]);
        std::string reply;
        if (looks_like_verify_prompt(prompt)) {
            bool match = entry && entry->gt_edit && images.size() >= 2 &&
                         image_hash(images[1]) == image_hash(*entry->gt_edit);
            reply = match ? "1" : "0";
        } else {
            bool conditioned = entry && entry->gt_edit && images.size() >= 2 &&
                               image_hash(images[1]) == image_hash(*entry->gt_edit);
            reply = conditioned && entry ? canonical_answer_text(entry->instance.answer)
                                         : "i cannot tell";
        }
        return std::vector<std::string>(std::size_t(n), reply);
    }

  private:
    std::shared_ptr<const InstanceLookup> lookup_;
};

// Intercepts verify prompts and answers them programmatically by decoding
// the candidate overlay against the regenerated grid; everything else goes
// to the wrapped backend.
class GridJudgeChat : public ChatBackend {
  public:
    GridJudgeChat(std::shared_ptr<const InstanceLookup> lookup,
                  std::shared_ptr<ChatBackend> inner)
        : lookup_(std::move(lookup)), inner_(std::move(inner)) {}

    std::vector<std::string> complete(const std::vector<Image>& images,
                                      const std::string& prompt, double temperature,
                                      int n) override {
        if (!looks_like_verify_prompt(prompt)) {
            if (!inner_)
                throw std::invalid_argument("GridJudgeChat: no inner backend for prompt");
            return inner_->complete(images, prompt, temperature, n);
        }
        if (n < 1)
            throw std::invalid_argument("GridJudgeChat: n must be >= 1");
        if (images.size() < 2)
            return std::vector<std::string>(std::size_t(n), "0");
        return std::vector<std::string>(std::size_t(n), judge(images[0], images[1]));
    }

  private:
    std::string judge(const Image& base, const Image& candidate) const {
        const auto* entry = lookup_->find(base);
        if (!entry)
            return "0";
        try {
            auto [grid, truth] = grid_from_metadata(entry->instance.meta);
            RenderSpec spec;
            spec.cell_px = std::stoi(entry->instance.meta.at("cell_px"));
            auto decoded = decode_overlay(base, candidate, grid, spec);
            if (!decoded)
                return "0";
            bool strict = grid.kind == GridKind::maze;
            return validate_path(grid, *decoded, strict) ? "1" : "0";
        } catch (const std::exception&) {
            return "0";
        }
    }

    std::shared_ptr<const InstanceLookup> lookup_;
    std::shared_ptr<ChatBackend> inner_;
};

// Replies with the last nonempty prompt line; the identity understander for
// prompt-composition experiments.
class EchoChat : public ChatBackend {
  public:
    std::vector<std::string> complete(const std::vector<Image>&, const std::string& prompt,
                                      double, int n) override {
        if (n < 1)
            throw std::invalid_argument("EchoChat: n must be >= 1");
        std::string last;
        std::string current;
        for (char ch : prompt) {
            if (ch == '\n') {
                if (!current.empty())
                    last = current;
                current.clear();
            } else {
                current += ch;
            }
        }
        if (!current.empty())
            last = current;
        return std::vector<std::string>(std::size_t(n), last);
    }
};

} // namespace etchr
