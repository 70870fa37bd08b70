#include "prefrec/synth.hpp"

#include <cstdio>

#include "prefrec/errors.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

namespace {

const std::vector<std::string> kKeywords = {
    "onsen",  "hiking",  "museums",   "beaches", "skiing",
    "temples", "aquariums", "camping", "castles", "gardens",
};

// Filler vocabulary deliberately disjoint from the keywords, so filler
// descriptions carry no preference signal.
const std::vector<std::string> kAdjectives = {
    "peaceful", "lively", "historic", "modern",  "coastal",
    "rustic",   "busy",   "quiet",    "charming", "remote",
};

const std::vector<std::string> kNouns = {
    "markets",  "bridges", "cafes",    "towers",   "plazas",
    "harbors",  "lanterns", "workshops", "theaters", "fountains",
};

std::string pick(const std::vector<std::string>& pool, DetRng& rng) {
    return pool[static_cast<std::size_t>(rng.bounded(pool.size()))];
}

std::string gold_description(const std::string& keyword, DetRng& rng) {
    return "A " + pick(kAdjectives, rng) + " destination famous for " + keyword +
           ". Visitors praise the " + keyword + " season here.";
}

std::string filler_description(DetRng& rng) {
    return "A " + pick(kAdjectives, rng) + " place with " + pick(kNouns, rng) + " and " +
           pick(kNouns, rng) + ". Many travelers mention the " + pick(kNouns, rng) + ".";
}

}  // namespace

const std::vector<std::string>& synth_keywords() {
    return kKeywords;
}

Corpus make_synthetic_corpus(const SynthConfig& cfg) {
    if (cfg.dialogues < 3) throw DomainError("need at least 3 dialogues");
    if (cfg.turns_per_dialogue < 1) throw DomainError("need at least 1 turn per dialogue");
    if (cfg.candidates_per_turn < 2) throw DomainError("need at least 2 candidates per turn");

    Corpus corpus;
    DetRng rng(cfg.seed);
    char idbuf[64];

    for (int d = 0; d < cfg.dialogues; ++d) {
        const std::string& keyword = kKeywords[static_cast<std::size_t>(d) % kKeywords.size()];
        std::snprintf(idbuf, sizeof(idbuf), "dlg_%04d", d);
        Dialogue dlg;
        dlg.dialogue_id = idbuf;

        std::vector<Utterance> history;
        history.push_back({Speaker::Operator,
                           "Hello, thank you for calling. What are you hoping to see on your trip?"});
        history.push_back({Speaker::Customer, "I like " + keyword + " and I want somewhere " +
                                                  pick(kAdjectives, rng) + "."});
        history.push_back({Speaker::Operator, "Understood, let me check a few options for you."});

        for (int t = 0; t < cfg.turns_per_dialogue; ++t) {
            std::snprintf(idbuf, sizeof(idbuf), "d%04d_t%d", d, t);
            RecommendationTurn turn;
            turn.turn_id = idbuf;

            std::size_t gold_pos = static_cast<std::size_t>(
                rng.bounded(static_cast<std::uint64_t>(cfg.candidates_per_turn)));
            for (int j = 0; j < cfg.candidates_per_turn; ++j) {
                std::snprintf(idbuf, sizeof(idbuf), "spot_%04d_%d_%02d", d, t, j);
                Item item;
                item.id = idbuf;
                item.description = static_cast<std::size_t>(j) == gold_pos
                                       ? gold_description(keyword, rng)
                                       : filler_description(rng);
                turn.candidate_item_ids.push_back(item.id);
                turn.labels[item.id] = static_cast<std::size_t>(j) == gold_pos ? 1 : 0;
                corpus.items.emplace(item.id, std::move(item));
            }
            turn.history = history;
            dlg.turns.push_back(std::move(turn));

            // Grow the prefix for the next turn in this dialogue.
            history.push_back({Speaker::Customer, "I also want somewhere " +
                                                      pick(kAdjectives, rng) + " if possible."});
            history.push_back({Speaker::Operator, "Of course, one moment please."});
        }
        corpus.dialogues.push_back(std::move(dlg));
    }
    return split_corpus(corpus, cfg.ratios, cfg.seed);
}

}  // namespace prefrec
