#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prefrec/backend.hpp"
#include "prefrec/corpus.hpp"
#include "prefrec/scorer.hpp"
#include "prefrec/templates.hpp"

namespace prefrec {

enum class PairKind { Summary, RecInfo };

std::string to_string(PairKind k);

struct PairMeta {
    std::string turn_id;
    std::string item_id;
    int y = 1;
    double dist_chosen = 0.0;    // |y - y_hat| of the winner
    double dist_rejected = 0.0;  // |y - y_hat| of the loser
    PairKind kind = PairKind::Summary;

    bool operator==(const PairMeta&) const = default;
};

// One DPO training unit. Invariants: dist_chosen <= dist_rejected and
// chosen != rejected byte-wise.
struct PreferencePair {
    std::string prompt;
    std::string chosen;
    std::string rejected;
    PairMeta meta;

    bool operator==(const PreferencePair&) const = default;
};

// winner = argmin |y - y_hat|, loser = argmax |y - y_hat|; ties go to the
// lowest index. Returns nullopt when all distances are equal (winner would
// equal loser), so no degenerate pair is emitted.
std::optional<std::pair<std::size_t, std::size_t>> select_pair(const std::vector<double>& scores,
                                                               int y);

struct PrefsConfig {
    int candidates = 4;  // K for summaries, J for rec-infos
    std::uint64_t seed = 0;
    double temperature = 0.8;  // candidate sampling temperature
    std::size_t chunk_size = 30;
    int max_tokens = 512;
};

// For each turn in the split: K candidate final summaries from PS, one
// rec-info per candidate item, the K x M score matrix, then one pair per
// non-degenerate item column. The pair prompt is the rendered final-summary
// prompt containing PS.
std::vector<PreferencePair> build_summary_prefs(const Corpus& corpus, Split split,
                                                const ScoreFn& scorer,
                                                const Backend& summary_backend,
                                                const Backend& recinfo_backend,
                                                const TemplateSet& templates,
                                                const PrefsConfig& cfg);

// For each turn: one summary, then J rec-info candidates per positive item
// only; the pair prompt is the raw item description.
std::vector<PreferencePair> build_recinfo_prefs(const Corpus& corpus, Split split,
                                                const ScoreFn& scorer,
                                                const Backend& summary_backend,
                                                const Backend& recinfo_backend,
                                                const TemplateSet& templates,
                                                const PrefsConfig& cfg);

// One JSON object per line with keys prompt/chosen/rejected (+ meta when
// requested); byte-stable across runs. Returns the number of lines written.
std::size_t export_jsonl(const std::vector<PreferencePair>& pairs, const std::string& path,
                         bool include_meta);

std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs, bool include_meta);

std::vector<PreferencePair> import_jsonl(const std::string& path);

}  // namespace prefrec
