#pragma once

#include <map>
#include <string>
#include <vector>

namespace prefrec {

enum class Speaker { Operator, Customer };

std::string to_string(Speaker s);
Speaker speaker_from_string(const std::string& s);

struct Utterance {
    Speaker speaker = Speaker::Operator;
    std::string text;  // trimmed at load, non-empty

    bool operator==(const Utterance&) const = default;
};

struct Item {
    std::string id;
    std::string description;

    bool operator==(const Item&) const = default;
};

// One task unit: a dialogue prefix, the candidate set at that point, and
// binary gold labels over exactly the candidate set (at least one positive).
struct RecommendationTurn {
    std::string turn_id;
    std::vector<Utterance> history;
    std::vector<std::string> candidate_item_ids;
    std::map<std::string, int> labels;

    bool operator==(const RecommendationTurn&) const = default;
};

enum class Split { Train, Val, Test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Dialogue {
    std::string dialogue_id;
    Split split = Split::Train;
    std::vector<RecommendationTurn> turns;

    bool operator==(const Dialogue&) const = default;
};

struct Corpus {
    std::map<std::string, Item> items;
    std::vector<Dialogue> dialogues;

    bool operator==(const Corpus&) const = default;

    const Item& item(const std::string& id) const;
    std::size_t turn_count() const;
    // (dialogue index, turn index) pairs for one split, in corpus order.
    std::vector<std::pair<std::size_t, std::size_t>> turns_in_split(Split s) const;
};

enum class CorpusFormat { Native, ChatRecRatings };

// 1..5 rating to binary label: <=2 -> 0, >=3 -> 1.
int binarize_rating(int rating);

Corpus load_corpus(const std::string& path, CorpusFormat format = CorpusFormat::Native);
Corpus parse_corpus(const std::string& json_text, CorpusFormat format = CorpusFormat::Native);

std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::string& path);

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

// Dialogue-level split assignment, deterministic for a fixed seed. Val and
// test counts are the nearest-integer shares; train absorbs the remainder.
Corpus split_corpus(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace prefrec
