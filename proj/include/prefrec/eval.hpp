#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prefrec/backend.hpp"
#include "prefrec/corpus.hpp"
#include "prefrec/scorer.hpp"
#include "prefrec/templates.hpp"

namespace prefrec {

enum class Variant { Baseline, SumRec, Ours, WithoutRecDPO, WithoutSumDPO };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Baseline feeds no rec-info to the scorer; every other variant does.
bool variant_uses_recinfo(Variant v);

struct RankedItem {
    std::string item_id;
    double score = 0.0;
};

struct RankedTurn {
    std::string turn_id;
    std::vector<RankedItem> ranking;      // descending score, ties by item_id
    std::vector<std::size_t> gold_ranks;  // 1-based ranks of y=1 items, ascending
};

// Everything rank_turn needs, resolved. The scorer is injected so native and
// remote predictors run through the same path.
struct Pipeline {
    Variant variant = Variant::Ours;
    const Backend* summary_backend = nullptr;
    const Backend* recinfo_backend = nullptr;  // may be null for Baseline
    ScoreFn scorer;
    TemplateSet templates;
    std::size_t chunk_size = 30;
    std::uint64_t seed = 0;
    int max_tokens = 512;
};

// Generates the summary once, one rec-info per candidate (unless Baseline),
// scores every candidate, and sorts. Output is invariant under permutation
// of the input candidate order.
RankedTurn rank_turn(const Corpus& corpus, const RecommendationTurn& turn,
                     const Pipeline& pipeline);

// Mean over turns of 1{min(gold_ranks) <= k}.
double hit_rate_at_k(const std::vector<RankedTurn>& turns, int k);

// Truncated MRR: mean of 1/min(gold_ranks) when <= k, else 0. Equals HR at
// k = 1 by construction.
double mrr_at_k(const std::vector<RankedTurn>& turns, int k);

struct EvalReport {
    Variant variant = Variant::Ours;
    std::vector<int> ks;
    std::map<int, double> hr;
    std::map<int, double> mrr;
    std::vector<RankedTurn> turns;
};

EvalReport evaluate(const Corpus& corpus, Split split, const Pipeline& pipeline,
                    const std::vector<int>& ks);

std::string report_to_json(const EvalReport& report);

// Plain-text table: one HR row and one MRR row, one column per k.
std::string render_report_table(const EvalReport& report);

}  // namespace prefrec
