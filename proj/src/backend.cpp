#include "prefrec/backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "prefrec/errors.hpp"
#include "prefrec/templates.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

using nlohmann::json;

MockExtractiveBackend::MockExtractiveBackend(std::string id, std::vector<std::string> extra_markers)
    : id_(std::move(id)), markers_{"like", "want", "prefer"} {
    for (auto& m : extra_markers) markers_.push_back(lowercase_ascii(m));
}

namespace {

// Lines strictly after the marker line, up to the next bracketed header.
std::string extract_section(const std::string& prompt, const char* marker) {
    std::vector<std::string> lines = split_lines(prompt);
    std::vector<std::string> section;
    bool in_section = false;
    for (const auto& line : lines) {
        if (!in_section) {
            if (line.find(marker) != std::string::npos) in_section = true;
            continue;
        }
        std::string t = trim(line);
        if (!t.empty() && t.front() == '[') break;
        if (!t.empty()) section.push_back(std::move(t));
    }
    return join(section, "\n");
}

// Splits a single unit into finer pieces so the seeded variants have
// something to permute: sentences first, words as a last resort.
std::vector<std::string> refine_units(std::vector<std::string> units) {
    if (units.size() >= 2) return units;
    if (units.size() == 1) {
        auto sentences = split_sentences(units[0]);
        if (sentences.size() >= 2) return sentences;
        auto words = split_whitespace(units[0]);
        if (words.size() >= 2) return words;
    }
    return units;
}

std::vector<std::string> apply_variant(std::vector<std::string> units, std::uint64_t seed) {
    units = refine_units(std::move(units));
    if (units.size() < 2) return units;
    switch (seed % 4) {
        case 1: units.pop_back(); break;
        case 2: units.erase(units.begin()); break;
        case 3: std::reverse(units.begin(), units.end()); break;
        default: break;
    }
    return units;
}

}  // namespace

std::string MockExtractiveBackend::generate(const GenerationRequest& req) const {
    if (req.temperature < 0) throw DomainError("temperature must be >= 0");
    if (req.max_tokens < 1) throw DomainError("max_tokens must be >= 1");
    const bool sampling = req.temperature > 0.0;

    if (req.prompt.find(kFinalSummarySourceMarker) != std::string::npos) {
        std::vector<std::string> partials = split_lines(extract_section(req.prompt, kFinalSummarySourceMarker));
        if (sampling) partials = apply_variant(std::move(partials), req.seed);
        return join(partials, " ");
    }

    if (req.prompt.find(kDialogueHistoryMarker) != std::string::npos) {
        std::string dialogue = extract_section(req.prompt, kDialogueHistoryMarker);
        std::vector<std::string> picked;
        for (const auto& line : split_lines(dialogue)) {
            if (line.rfind("Customer:", 0) != 0) continue;
            std::string content = line.substr(9);
            for (const auto& sentence : split_sentences(content)) {
                std::string low = lowercase_ascii(sentence);
                bool hit = std::any_of(markers_.begin(), markers_.end(), [&](const std::string& m) {
                    return low.find(m) != std::string::npos;
                });
                if (hit) picked.push_back(sentence);
            }
        }
        if (sampling) picked = apply_variant(std::move(picked), req.seed);
        return join(picked, " ");
    }

    if (req.prompt.find(kItemDescriptionMarker) != std::string::npos) {
        std::string description = extract_section(req.prompt, kItemDescriptionMarker);
        if (sampling && req.seed % 4 != 0) {
            auto units = apply_variant({description}, req.seed);
            return join(units, " ") + kRecInfoSuffix;
        }
        return description + kRecInfoSuffix;
    }

    throw BackendError("mock backend cannot classify prompt (no known section marker)");
}

namespace {

struct ParsedUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /a/b
};

ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("backend url missing scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

RemoteBackend::RemoteBackend(RemoteBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.url.empty()) throw ConfigError("remote backend requires a url");
    id_ = cfg_.id.empty() ? "remote:" + cfg_.model : cfg_.id;
}

std::string RemoteBackend::generate(const GenerationRequest& req) const {
    if (req.temperature < 0) throw DomainError("temperature must be >= 0");
    if (req.max_tokens < 1) throw DomainError("max_tokens must be >= 1");

    json body = {
        {"model", cfg_.model},
        {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
        {"temperature", req.temperature},
        {"seed", req.seed},
        {"max_tokens", req.max_tokens},
    };
    const std::string payload = body.dump();

    ParsedUrl url = parse_url(cfg_.url);
    httplib::Headers headers;
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, cfg_.attempts); ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(cfg_.backoff_ms * (1LL << (attempt - 1))));
        httplib::Client client(url.base);
        client.set_read_timeout(120, 0);
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            json reply;
            try {
                reply = json::parse(res->body);
            } catch (const json::exception& e) {
                throw ProtocolError(std::string("chat completion is not valid JSON: ") + e.what());
            }
            try {
                std::string content =
                    reply.at("choices").at(0).at("message").at("content").get<std::string>();
                return content;
            } catch (const json::exception&) {
                throw ProtocolError("chat completion missing choices[0].message.content");
            }
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (!retryable_status(res->status)) break;
    }
    throw BackendError("remote backend failed after retries: " + last_error);
}

}  // namespace prefrec
