#pragma once

// OpenAI-compatible wire client for chat completion (with image parts) and
// image editing, with retry, attempt logging, and an in-flight request cap.

#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "etchr/backends.hpp"
#include "etchr/png.hpp"

namespace etchr {

// ── Helpers ──────────────────────────────────────────────────────────

inline std::string base64_encode(const std::vector<std::uint8_t>& data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < data.size()) {
        std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += alphabet[v & 63];
        i += 3;
    }
    if (i + 1 == data.size()) {
        std::uint32_t v = data[i] << 16;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += "==";
    } else if (i + 2 == data.size()) {
        std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
    auto value_of = [](char c) -> int {
        if (c >= 'A' && c <= 'Z')
            return c - 'A';
        if (c >= 'a' && c <= 'z')
            return c - 'a' + 26;
        if (c >= '0' && c <= '9')
            return c - '0' + 52;
        if (c == '+')
            return 62;
        if (c == '/')
            return 63;
        return -1;
    };
    std::vector<std::uint8_t> out;
    std::uint32_t acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r')
            continue;
        int v = value_of(c);
        if (v < 0)
            throw ParseError("base64: invalid character");
        acc = (acc << 6) | std::uint32_t(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(std::uint8_t((acc >> bits) & 0xFF));
        }
    }
    return out;
}

// Bounded in-flight counter; httplib clients are per-call, so this is the
// only cross-call state an endpoint shares.
class Semaphore {
  public:
    explicit Semaphore(int slots) : slots_(slots) {
        if (slots < 1)
            throw std::invalid_argument("Semaphore: need at least one slot");
    }
    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return slots_ > 0; });
        --slots_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            ++slots_;
        }
        cv_.notify_one();
    }

  private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int slots_;
};

struct SemaphoreGuard {
    Semaphore& sem;
    explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
};

struct EndpointConfig {
    std::string base_url;       // e.g. http://127.0.0.1:8080/v1
    std::string model;
    std::string api_key_env;    // env var holding the bearer token; empty = none
    double timeout_s = 60.0;
    int max_in_flight = 4;
    RetryPolicy retry;
    bool edit_multipart = false; // image edits: multipart form instead of JSON
    bool sleep_on_retry = true;  // tests disable the real backoff sleep

    void validate() const {
        if (base_url.empty())
            throw ConfigError("endpoint: base_url must be set");
        if (timeout_s <= 0)
            throw ConfigError("endpoint: timeout must be positive");
        if (max_in_flight < 1)
            throw ConfigError("endpoint: max_in_flight must be >= 1");
        retry.validate();
    }
};

struct CallAttempt {
    int status = 0;       // HTTP status, or -1 for a transport failure
    std::string note;     // error detail for failed attempts
};

struct CallLog {
    std::vector<CallAttempt> attempts;

    std::string describe() const {
        std::string out;
        for (std::size_t i = 0; i < attempts.size(); ++i) {
            if (i)
                out += "; ";
            out += "attempt " + std::to_string(i + 1) + ": ";
            out += attempts[i].status >= 0 ? "status " + std::to_string(attempts[i].status)
                                           : "transport";
            if (!attempts[i].note.empty())
                out += " (" + attempts[i].note + ")";
        }
        return out;
    }
};

namespace detail {

// Splits "http://host:port/prefix" into client target and path prefix.
inline std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos)
        return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

inline httplib::Headers auth_headers(const EndpointConfig& config) {
    httplib::Headers headers;
    if (!config.api_key_env.empty()) {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    return headers;
}

// Runs one HTTP call per attempt under the retry policy. `call` returns an
// httplib::Result; 2xx wins, 5xx/429 and transport errors retry, anything
// else is a protocol error.
template <typename Call>
httplib::Response run_with_retries(const EndpointConfig& config, CallLog& log, Call&& call) {
    config.validate();
    auto backoff = config.retry.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        httplib::Result result = call();
        if (result) {
            const int status = result->status;
            if (status >= 200 && status < 300) {
                log.attempts.push_back({status, ""});
                return *result;
            }
            log.attempts.push_back({status, result->body.substr(0, 200)});
            if (status != 429 && status < 500)
                throw ProtocolError("endpoint rejected the request: " + log.describe());
        } else {
            log.attempts.push_back({-1, httplib::to_string(result.error())});
        }
        if (attempt >= config.retry.max_attempts)
            throw TransportError("retries exhausted: " + log.describe());
        if (config.sleep_on_retry)
            std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

inline nlohmann::json parse_body(const std::string& body) {
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError(std::string("malformed response body: ") + e.what());
    }
}

} // namespace detail

inline std::string png_data_uri(const Image& image) {
    return "data:image/png;base64," + base64_encode(encode_png(image));
}

// ── Chat (understander / judge) ──────────────────────────────────────

class HttpChatBackend : public ChatBackend {
  public:
    explicit HttpChatBackend(EndpointConfig config)
        : config_(std::move(config)), gate_(config_.max_in_flight) {
        config_.validate();
    }

    std::vector<std::string> complete(const std::vector<Image>& images,
                                      const std::string& prompt, double temperature,
                                      int n) override {
        if (n < 1)
            throw std::invalid_argument("complete: n must be >= 1");
        if (temperature < 0)
            throw std::invalid_argument("complete: temperature must be >= 0");

        nlohmann::json content = nlohmann::json::array();
        for (const auto& img : images)
            content.push_back({{"type", "image_url"},
                               {"image_url", {{"url", png_data_uri(img)}}}});
        content.push_back({{"type", "text"}, {"text", prompt}});
        nlohmann::json body = {
            {"model", config_.model},
            {"temperature", temperature},
            {"n", n},
            {"messages", nlohmann::json::array({nlohmann::json{
                             {"role", "user"}, {"content", std::move(content)}}})},
        };

        auto [host, prefix] = detail::split_base_url(config_.base_url);
        CallLog log;
        httplib::Response response;
        {
            SemaphoreGuard guard(gate_);
            httplib::Client client(host);
            client.set_connection_timeout(time_t(config_.timeout_s), 0);
            client.set_read_timeout(time_t(config_.timeout_s),
                                    long((config_.timeout_s - time_t(config_.timeout_s)) * 1e6));
            response = detail::run_with_retries(config_, log, [&] {
                return client.Post(prefix + "/chat/completions",
                                   detail::auth_headers(config_), body.dump(),
                                   "application/json");
            });
        }
        {
            std::lock_guard<std::mutex> lock(log_mutex_);
            last_log_ = log;
        }

        nlohmann::json parsed = detail::parse_body(response.body);
        if (!parsed.contains("choices") || !parsed["choices"].is_array())
            throw ProtocolError("chat response lacks choices");
        const auto& choices = parsed["choices"];
        if (int(choices.size()) != n)
            throw ProtocolError("chat response has " + std::to_string(choices.size()) +
                                " choices, expected " + std::to_string(n));
        std::vector<std::string> texts;
        for (const auto& choice : choices) {
            if (!choice.contains("message") || !choice["message"].contains("content") ||
                !choice["message"]["content"].is_string())
                throw ProtocolError("chat choice lacks message content");
            texts.push_back(choice["message"]["content"].get<std::string>());
        }
        return texts;
    }

    CallLog last_call_log() const {
        std::lock_guard<std::mutex> lock(log_mutex_);
        return last_log_;
    }

  private:
    EndpointConfig config_;
    Semaphore gate_;
    mutable std::mutex log_mutex_;
    CallLog last_log_;
};

// ── Image edit (editor) ──────────────────────────────────────────────

class HttpEditorBackend : public EditorBackend {
  public:
    explicit HttpEditorBackend(EndpointConfig config)
        : config_(std::move(config)), gate_(config_.max_in_flight) {
        config_.validate();
    }

    Image edit(const Image& image, const std::string& prompt,
               const GenerationParams& params) override {
        params.validate();
        auto [host, prefix] = detail::split_base_url(config_.base_url);
        CallLog log;
        httplib::Response response;
        {
            SemaphoreGuard guard(gate_);
            httplib::Client client(host);
            const double timeout = params.timeout_s > 0 ? params.timeout_s : config_.timeout_s;
            client.set_connection_timeout(time_t(timeout), 0);
            client.set_read_timeout(time_t(timeout), long((timeout - time_t(timeout)) * 1e6));
            response = detail::run_with_retries(config_, log, [&] {
                if (config_.edit_multipart) {
                    auto png = encode_png(image);
                    httplib::MultipartFormDataItems items = {
                        {"image", std::string(png.begin(), png.end()), "image.png",
                         "image/png"},
                        {"prompt", prompt, "", ""},
                        {"model", config_.model, "", ""},
                    };
                    return client.Post(prefix + "/images/edits", items);
                }
                nlohmann::json body = {
                    {"model", config_.model},
                    {"prompt", prompt},
                    {"image", base64_encode(encode_png(image))},
                };
                if (params.seed)
                    body["seed"] = *params.seed;
                if (params.guidance_scale)
                    body["guidance_scale"] = *params.guidance_scale;
                if (params.steps)
                    body["steps"] = *params.steps;
                return client.Post(prefix + "/images/edits", detail::auth_headers(config_),
                                   body.dump(), "application/json");
            });
        }
        {
            std::lock_guard<std::mutex> lock(log_mutex_);
            last_log_ = log;
        }

        nlohmann::json parsed = detail::parse_body(response.body);
        if (!parsed.contains("data") || !parsed["data"].is_array() ||
            parsed["data"].empty() || !parsed["data"][0].contains("b64_json") ||
            !parsed["data"][0]["b64_json"].is_string())
            throw ProtocolError("edit response lacks data[0].b64_json");
        Image out{1, 1};
        try {
            out = decode_png(base64_decode(parsed["data"][0]["b64_json"].get<std::string>()));
        } catch (const ParseError& e) {
            throw ProtocolError(std::string("undecodable edit payload: ") + e.what());
        }
        const int want_w = params.out_width.value_or(image.width());
        const int want_h = params.out_height.value_or(image.height());
        if (out.width() != want_w || out.height() != want_h)
            throw ProtocolError("edit returned " + std::to_string(out.width()) + "x" +
                                std::to_string(out.height()) + ", expected " +
                                std::to_string(want_w) + "x" + std::to_string(want_h));
        return out;
    }

    CallLog last_call_log() const {
        std::lock_guard<std::mutex> lock(log_mutex_);
        return last_log_;
    }

  private:
    EndpointConfig config_;
    Semaphore gate_;
    mutable std::mutex log_mutex_;
    CallLog last_log_;
};

} // namespace etchr
