#include "prefrec/textgen.hpp"

#include <exception>

#include "prefrec/errors.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

std::string to_string(TextKind k) {
    switch (k) {
        case TextKind::PartialSummary: return "partial_summary";
        case TextKind::FinalSummary: return "final_summary";
        default: return "rec_info";
    }
}

std::vector<std::vector<Utterance>> chunk_dialogue(const std::vector<Utterance>& history,
                                                   std::size_t chunk_size) {
    if (chunk_size == 0) throw DomainError("chunk_size must be >= 1");
    if (history.empty()) throw DomainError("cannot chunk an empty history");
    std::vector<std::vector<Utterance>> chunks;
    for (std::size_t start = 0; start < history.size(); start += chunk_size) {
        std::size_t end = std::min(start + chunk_size, history.size());
        chunks.emplace_back(history.begin() + static_cast<std::ptrdiff_t>(start),
                            history.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return chunks;
}

namespace {

GeneratedText run_generation(const Backend& backend, const std::string& prompt, std::uint64_t seed,
                             double temperature, int max_tokens, TextKind kind, int index) {
    GenerationRequest req{prompt, seed, temperature, max_tokens};
    std::string text;
    try {
        text = backend.generate(req);
    } catch (const BackendError& e) {
        throw BackendError(std::string(e.what()) + " (" + to_string(kind) + " index " +
                               std::to_string(index) + ")",
                           index);
    }
    if (text.empty())
        throw GenerationError("backend \"" + backend.id() + "\" returned empty text for " +
                              to_string(kind) + " index " + std::to_string(index));
    return GeneratedText{std::move(text), backend.id(), seed, fnv1a64(prompt), kind};
}

}  // namespace

SummaryResult summarize_dialogue(const std::vector<Utterance>& history, const Backend& backend,
                                 const TemplateSet& templates, const SummarizeConfig& cfg) {
    auto chunks = chunk_dialogue(history, cfg.chunk_size);
    std::size_t n = chunks.size();
    SummaryResult result;
    result.partials.resize(n);

    std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        try {
            std::string prompt = render_prompt(
                templates.partial_summary, {{"short_dialogue", render_dialogue(chunks[i])}});
            result.partials[i] =
                run_generation(backend, prompt, cfg.seed + i, cfg.temperature, cfg.max_tokens,
                               TextKind::PartialSummary, static_cast<int>(i));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::vector<std::string> texts;
    texts.reserve(n);
    for (const auto& p : result.partials) texts.push_back(p.text);
    result.ps = join(texts, "\n");

    std::string prompt = final_summary_prompt(result.ps, templates);
    result.final_summary = run_generation(backend, prompt, cfg.seed, cfg.temperature,
                                          cfg.max_tokens, TextKind::FinalSummary, 0);
    return result;
}

std::string final_summary_prompt(const std::string& ps, const TemplateSet& templates) {
    return render_prompt(templates.final_summary, {{"all_short_dialogue_summary", ps}});
}

std::string rec_info_prompt(const std::string& description, const TemplateSet& templates) {
    return render_prompt(templates.rec_info, {{"item_description", description}});
}

std::vector<GeneratedText> generate_candidates(const std::string& context_prompt, int count,
                                               const Backend& backend, std::uint64_t base_seed,
                                               double temperature, int max_tokens, TextKind kind) {
    if (count < 2) throw DomainError("candidate count must be >= 2, got " + std::to_string(count));
    std::vector<GeneratedText> out(static_cast<std::size_t>(count));
    std::vector<std::exception_ptr> errors(out.size());
#pragma omp parallel for schedule(dynamic)
    for (long long ii = 0; ii < static_cast<long long>(count); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        try {
            out[i] = run_generation(backend, context_prompt, base_seed + i, temperature,
                                    max_tokens, kind, static_cast<int>(i));
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

GeneratedText generate_rec_info(const std::string& description, const Backend& backend,
                                const TemplateSet& templates, const RecInfoConfig& cfg) {
    if (trim(description).empty()) throw DomainError("empty item description");
    std::string prompt = rec_info_prompt(description, templates);
    return run_generation(backend, prompt, cfg.seed, cfg.temperature, cfg.max_tokens,
                          TextKind::RecInfo, 0);
}

}  // namespace prefrec
