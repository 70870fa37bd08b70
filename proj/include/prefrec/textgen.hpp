#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefrec/backend.hpp"
#include "prefrec/corpus.hpp"
#include "prefrec/templates.hpp"

namespace prefrec {

enum class TextKind { PartialSummary, FinalSummary, RecInfo };

std::string to_string(TextKind k);

// Backend output plus provenance. prompt_hash is FNV-1a over the prompt
// bytes, so reruns with the same prompt are detectable.
struct GeneratedText {
    std::string text;
    std::string backend_id;
    std::uint64_t seed = 0;
    std::uint64_t prompt_hash = 0;
    TextKind kind = TextKind::FinalSummary;
};

// Splits history into consecutive chunks of chunk_size utterances; the last
// chunk may be shorter. flatten(chunks) == history.
std::vector<std::vector<Utterance>> chunk_dialogue(const std::vector<Utterance>& history,
                                                   std::size_t chunk_size);

struct SummarizeConfig {
    std::size_t chunk_size = 30;
    std::uint64_t seed = 0;
    double temperature = 0.0;
    int max_tokens = 512;
};

struct SummaryResult {
    std::vector<GeneratedText> partials;  // one per chunk, in chunk order
    std::string ps;                       // partial texts joined with "\n"
    GeneratedText final_summary;
};

// Two-stage chunked summarization: one partial summary per chunk, then a
// final summary generated from the "\n"-joined partials. The final pass runs
// even for a single chunk, so every summary has the same provenance shape.
// Partial chunk i uses seed cfg.seed + i; the final pass uses cfg.seed.
SummaryResult summarize_dialogue(const std::vector<Utterance>& history, const Backend& backend,
                                 const TemplateSet& templates, const SummarizeConfig& cfg);

// Renders the final-summary prompt for a given PS text. This is also the DPO
// prompt for summary preference pairs.
std::string final_summary_prompt(const std::string& ps, const TemplateSet& templates);

std::string rec_info_prompt(const std::string& description, const TemplateSet& templates);

// K seeded samples from one prompt; candidate i uses seed base_seed + i.
// Duplicates are permitted and handled downstream. K < 2 -> DomainError.
std::vector<GeneratedText> generate_candidates(const std::string& context_prompt, int count,
                                               const Backend& backend, std::uint64_t base_seed,
                                               double temperature, int max_tokens, TextKind kind);

struct RecInfoConfig {
    std::uint64_t seed = 0;
    double temperature = 0.0;
    int max_tokens = 512;
};

GeneratedText generate_rec_info(const std::string& description, const Backend& backend,
                                const TemplateSet& templates, const RecInfoConfig& cfg);

}  // namespace prefrec
