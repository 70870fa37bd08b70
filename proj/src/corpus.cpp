#include "prefrec/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>

#include "json.hpp"
#include "prefrec/errors.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

using nlohmann::json;

std::string to_string(Speaker s) {
    return s == Speaker::Operator ? "operator" : "customer";
}

Speaker speaker_from_string(const std::string& s) {
    std::string l = lowercase_ascii(s);
    if (l == "operator") return Speaker::Operator;
    if (l == "customer") return Speaker::Customer;
    throw ParseError("unknown speaker: " + s);
}

std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        default: return "test";
    }
}

Split split_from_string(const std::string& s) {
    std::string l = lowercase_ascii(s);
    if (l == "train") return Split::Train;
    if (l == "val" || l == "validation") return Split::Val;
    if (l == "test") return Split::Test;
    throw ParseError("unknown split: " + s);
}

const Item& Corpus::item(const std::string& id) const {
    auto it = items.find(id);
    if (it == items.end()) throw ValidationError("unknown item id: " + id);
    return it->second;
}

std::size_t Corpus::turn_count() const {
    std::size_t n = 0;
    for (const auto& d : dialogues) n += d.turns.size();
    return n;
}

std::vector<std::pair<std::size_t, std::size_t>> Corpus::turns_in_split(Split s) const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t di = 0; di < dialogues.size(); ++di) {
        if (dialogues[di].split != s) continue;
        for (std::size_t ti = 0; ti < dialogues[di].turns.size(); ++ti) out.emplace_back(di, ti);
    }
    return out;
}

int binarize_rating(int rating) {
    if (rating < 1 || rating > 5)
        throw DomainError("rating " + std::to_string(rating) + " outside 1..5");
    return rating <= 2 ? 0 : 1;
}

namespace {

std::string turn_context(const std::string& dialogue_id, const std::string& turn_id) {
    return "dialogue \"" + dialogue_id + "\" turn \"" + turn_id + "\"";
}

void validate_turn(const Corpus& corpus, const std::string& dialogue_id,
                   const RecommendationTurn& turn) {
    const std::string ctx = turn_context(dialogue_id, turn.turn_id);
    if (turn.candidate_item_ids.empty())
        throw ValidationError(ctx + ": empty candidate set");
    std::set<std::string> cand_set;
    for (const auto& id : turn.candidate_item_ids) {
        if (!corpus.items.count(id))
            throw ValidationError(ctx + ": candidate references unknown item \"" + id + "\"");
        if (!cand_set.insert(id).second)
            throw ValidationError(ctx + ": duplicate candidate \"" + id + "\"");
    }
    if (turn.labels.size() != cand_set.size())
        throw ValidationError(ctx + ": labels do not cover exactly the candidate set");
    bool any_gold = false;
    for (const auto& [id, y] : turn.labels) {
        if (!cand_set.count(id))
            throw ValidationError(ctx + ": label for non-candidate \"" + id + "\"");
        if (y != 0 && y != 1)
            throw ValidationError(ctx + ": label for \"" + id + "\" must be 0 or 1");
        if (y == 1) any_gold = true;
    }
    if (!any_gold) throw ValidationError(ctx + ": no candidate labeled 1");
    if (turn.history.empty()) throw ValidationError(ctx + ": empty history");
    for (const auto& u : turn.history)
        if (u.text.empty()) throw ValidationError(ctx + ": empty utterance text");
}

void validate(const Corpus& corpus) {
    for (const auto& [id, item] : corpus.items) {
        if (id.empty()) throw ValidationError("empty item id");
        if (item.description.empty())
            throw ValidationError("item \"" + id + "\" has empty description");
    }
    std::set<std::string> dialogue_ids;
    for (const auto& d : corpus.dialogues) {
        if (!dialogue_ids.insert(d.dialogue_id).second)
            throw ValidationError("duplicate dialogue_id \"" + d.dialogue_id + "\"");
        for (const auto& t : d.turns) validate_turn(corpus, d.dialogue_id, t);
    }
}

}  // namespace

Corpus parse_corpus(const std::string& json_text, CorpusFormat format) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("corpus JSON: ") + e.what());
    }

    Corpus corpus;
    try {
        for (const auto& jitem : root.at("items")) {
            Item item;
            item.id = jitem.at("id").get<std::string>();
            item.description = trim(jitem.at("description").get<std::string>());
            if (corpus.items.count(item.id))
                throw ValidationError("duplicate item id \"" + item.id + "\"");
            corpus.items.emplace(item.id, std::move(item));
        }
        for (const auto& jdlg : root.at("dialogues")) {
            Dialogue d;
            d.dialogue_id = jdlg.at("dialogue_id").get<std::string>();
            d.split = jdlg.contains("split")
                          ? split_from_string(jdlg.at("split").get<std::string>())
                          : Split::Train;
            for (const auto& jturn : jdlg.at("turns")) {
                RecommendationTurn t;
                t.turn_id = jturn.at("turn_id").get<std::string>();
                for (const auto& ju : jturn.at("history")) {
                    Utterance u;
                    u.speaker = speaker_from_string(ju.at("speaker").get<std::string>());
                    u.text = trim(ju.at("text").get<std::string>());
                    t.history.push_back(std::move(u));
                }
                for (const auto& jc : jturn.at("candidates"))
                    t.candidate_item_ids.push_back(jc.get<std::string>());
                if (format == CorpusFormat::ChatRecRatings) {
                    for (const auto& [id, jr] : jturn.at("ratings").items())
                        t.labels[id] = binarize_rating(jr.get<int>());
                } else {
                    for (const auto& [id, jl] : jturn.at("labels").items())
                        t.labels[id] = jl.get<int>();
                }
                d.turns.push_back(std::move(t));
            }
            corpus.dialogues.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("corpus JSON: ") + e.what());
    }

    validate(corpus);
    return corpus;
}

Corpus load_corpus(const std::string& path, CorpusFormat format) {
    return parse_corpus(read_file(path), format);
}

std::string serialize_corpus(const Corpus& corpus) {
    json root;
    root["items"] = json::array();
    for (const auto& [id, item] : corpus.items)
        root["items"].push_back({{"id", id}, {"description", item.description}});
    root["dialogues"] = json::array();
    for (const auto& d : corpus.dialogues) {
        json jd;
        jd["dialogue_id"] = d.dialogue_id;
        jd["split"] = to_string(d.split);
        jd["turns"] = json::array();
        for (const auto& t : d.turns) {
            json jt;
            jt["turn_id"] = t.turn_id;
            jt["history"] = json::array();
            for (const auto& u : t.history)
                jt["history"].push_back({{"speaker", to_string(u.speaker)}, {"text", u.text}});
            jt["candidates"] = t.candidate_item_ids;
            jt["labels"] = json::object();
            for (const auto& [id, y] : t.labels) jt["labels"][id] = y;
            jd["turns"].push_back(std::move(jt));
        }
        root["dialogues"].push_back(std::move(jd));
    }
    return root.dump(2) + "\n";
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    write_file(path, serialize_corpus(corpus));
}

Corpus split_corpus(const Corpus& corpus, const SplitRatios& ratios, std::uint64_t seed) {
    double sum = ratios.train + ratios.val + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9)
        throw DomainError("split ratios must sum to 1, got " + std::to_string(sum));
    if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0)
        throw DomainError("split ratios must be non-negative");
    std::size_t n = corpus.dialogues.size();
    if (n < 3) throw DomainError("need at least 3 dialogues to split");

    auto nearest = [](double x) { return static_cast<std::size_t>(std::llround(x)); };
    std::size_t n_val = std::min(nearest(ratios.val * static_cast<double>(n)), n);
    std::size_t n_test = std::min(nearest(ratios.test * static_cast<double>(n)), n - n_val);

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    DetRng rng(seed);
    rng.shuffle(order);

    Corpus out = corpus;
    for (std::size_t pos = 0; pos < n; ++pos) {
        Split s = Split::Train;
        if (pos < n_val)
            s = Split::Val;
        else if (pos < n_val + n_test)
            s = Split::Test;
        out.dialogues[order[pos]].split = s;
    }
    return out;
}

}  // namespace prefrec
