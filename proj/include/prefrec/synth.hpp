#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefrec/corpus.hpp"

namespace prefrec {

// Desk-scale benchmark corpus. Every dialogue carries one of ten preference
// keywords; per turn, exactly one candidate description contains that
// keyword (the gold item) and the other candidates use keyword-free filler
// text. Customer utterances state the keyword with a preference marker, so
// the extractive mock summarizer surfaces it.
struct SynthConfig {
    int dialogues = 100;
    int turns_per_dialogue = 2;
    int candidates_per_turn = 10;
    std::uint64_t seed = 7;
    SplitRatios ratios{0.8, 0.1, 0.1};
};

const std::vector<std::string>& synth_keywords();

Corpus make_synthetic_corpus(const SynthConfig& cfg);

}  // namespace prefrec
