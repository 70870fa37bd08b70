#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace prefrec {

struct GenerationRequest {
    std::string prompt;
    std::uint64_t seed = 0;
    double temperature = 0.0;  // >= 0
    int max_tokens = 512;      // >= 1
};

// Text-generation boundary. Implementations must be safe to call from
// multiple threads at once.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string generate(const GenerationRequest& req) const = 0;
    virtual std::string id() const = 0;
};

// Deterministic extractive stand-in for an LLM; the test oracle for every
// generation stage. Output is a pure function of (prompt, seed).
//
// The prompt is classified by the section markers the default templates emit:
//   [Source Text for Summarization]  -> re-join the partial summaries
//   [Dialogue History]               -> extract customer preference sentences
//   [Item Description]              -> echo the description + fixed suffix
//
// Greedy decoding (temperature == 0) returns the base extractive output. With
// temperature > 0 the seed picks one of four deterministic variants of the
// extracted units (identity / drop-last / drop-first / reverse), which is what
// gives seeded candidate sampling its diversity.
class MockExtractiveBackend : public Backend {
public:
    explicit MockExtractiveBackend(std::string id = "mock",
                                   std::vector<std::string> extra_markers = {});

    std::string generate(const GenerationRequest& req) const override;
    std::string id() const override { return id_; }

    static constexpr const char* kRecInfoSuffix = " Suitable for matching visitors.";

private:
    std::string id_;
    std::vector<std::string> markers_;  // lowercase
};

struct RemoteBackendConfig {
    std::string url;    // full endpoint, e.g. http://host:8000/v1/chat/completions
    std::string model;  // model name sent in the request body
    std::string id;     // provenance id; defaults to "remote:" + model
    int attempts = 3;   // total tries on 429/5xx/transport errors
    int backoff_ms = 250;
    std::string api_key_env = "PREFREC_API_KEY";
};

// OpenAI-compatible chat-completions client. Sends
//   {"model", "messages":[{"role":"user","content"}], "temperature", "seed",
//    "max_tokens"}
// and reads choices[0].message.content. Retries with exponential backoff on
// 429 and 5xx. Bearer auth from the PREFREC_API_KEY environment variable.
class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(RemoteBackendConfig cfg);

    std::string generate(const GenerationRequest& req) const override;
    std::string id() const override { return id_; }

private:
    RemoteBackendConfig cfg_;
    std::string id_;
};

}  // namespace prefrec
