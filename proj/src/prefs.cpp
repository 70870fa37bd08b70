#include "prefrec/prefs.hpp"

#include <cmath>

#include "json.hpp"
#include "prefrec/errors.hpp"
#include "prefrec/textgen.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

using nlohmann::json;

std::string to_string(PairKind k) {
    return k == PairKind::Summary ? "summary" : "recinfo";
}

std::optional<std::pair<std::size_t, std::size_t>> select_pair(const std::vector<double>& scores,
                                                               int y) {
    if (scores.size() < 2) throw DomainError("select_pair needs at least 2 candidates");
    if (y != 0 && y != 1) throw DomainError("ground-truth label must be 0 or 1");
    std::size_t winner = 0, loser = 0;
    double best = std::abs(y - scores[0]);
    double worst = best;
    if (!std::isfinite(scores[0])) throw NumericalError("non-finite candidate score");
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw NumericalError("non-finite candidate score");
        double d = std::abs(y - scores[i]);
        if (d < best) {
            best = d;
            winner = i;
        }
        if (d > worst) {
            worst = d;
            loser = i;
        }
    }
    if (winner == loser) return std::nullopt;  // all distances equal
    return std::make_pair(winner, loser);
}

namespace {

std::uint64_t turn_seed(const PrefsConfig& cfg, const std::string& turn_id) {
    return fnv1a64(turn_id) ^ cfg.seed;
}

}  // namespace

std::vector<PreferencePair> build_summary_prefs(const Corpus& corpus, Split split,
                                                const ScoreFn& scorer,
                                                const Backend& summary_backend,
                                                const Backend& recinfo_backend,
                                                const TemplateSet& templates,
                                                const PrefsConfig& cfg) {
    if (cfg.candidates < 2) throw DomainError("K must be >= 2");
    std::vector<PreferencePair> pairs;
    for (auto [di, ti] : corpus.turns_in_split(split)) {
        const auto& turn = corpus.dialogues[di].turns[ti];
        const std::uint64_t seed = turn_seed(cfg, turn.turn_id);
        try {
            SummarizeConfig sum_cfg{cfg.chunk_size, seed, 0.0, cfg.max_tokens};
            SummaryResult sum = summarize_dialogue(turn.history, summary_backend, templates, sum_cfg);
            std::string prompt = final_summary_prompt(sum.ps, templates);
            auto candidates =
                generate_candidates(prompt, cfg.candidates, summary_backend, seed,
                                    cfg.temperature, cfg.max_tokens, TextKind::FinalSummary);

            std::vector<std::string> summaries, rec_infos, descriptions;
            for (const auto& c : candidates) summaries.push_back(c.text);
            for (const auto& item_id : turn.candidate_item_ids) {
                const std::string& desc = corpus.item(item_id).description;
                RecInfoConfig ri_cfg{seed, 0.0, cfg.max_tokens};
                rec_infos.push_back(
                    generate_rec_info(desc, recinfo_backend, templates, ri_cfg).text);
                descriptions.push_back(desc);
            }

            ScoreMatrix scores;
            scores.rows = summaries.size();
            scores.cols = descriptions.size();
            scores.values.assign(scores.rows * scores.cols, 0.0);
            for (std::size_t k = 0; k < summaries.size(); ++k)
                for (std::size_t m = 0; m < descriptions.size(); ++m)
                    scores.values[k * scores.cols + m] =
                        scorer(ScoreInput{summaries[k], rec_infos[m], descriptions[m]});

            for (std::size_t m = 0; m < turn.candidate_item_ids.size(); ++m) {
                const std::string& item_id = turn.candidate_item_ids[m];
                int y = turn.labels.at(item_id);
                std::vector<double> column(summaries.size());
                for (std::size_t k = 0; k < summaries.size(); ++k) column[k] = scores.at(k, m);
                auto sel = select_pair(column, y);
                if (!sel) continue;
                auto [w, l] = *sel;
                if (summaries[w] == summaries[l]) continue;  // chosen must differ from rejected
                PreferencePair pair;
                pair.prompt = prompt;
                pair.chosen = summaries[w];
                pair.rejected = summaries[l];
                pair.meta = PairMeta{turn.turn_id, item_id, y, std::abs(y - column[w]),
                                     std::abs(y - column[l]), PairKind::Summary};
                pairs.push_back(std::move(pair));
            }
        } catch (const BackendError& e) {
            throw BackendError("summary prefs, turn \"" + turn.turn_id + "\": " + e.what(),
                               e.index);
        } catch (const GenerationError& e) {
            throw GenerationError("summary prefs, turn \"" + turn.turn_id + "\": " + e.what());
        }
    }
    return pairs;
}

std::vector<PreferencePair> build_recinfo_prefs(const Corpus& corpus, Split split,
                                                const ScoreFn& scorer,
                                                const Backend& summary_backend,
                                                const Backend& recinfo_backend,
                                                const TemplateSet& templates,
                                                const PrefsConfig& cfg) {
    if (cfg.candidates < 2) throw DomainError("J must be >= 2");
    std::vector<PreferencePair> pairs;
    for (auto [di, ti] : corpus.turns_in_split(split)) {
        const auto& turn = corpus.dialogues[di].turns[ti];
        const std::uint64_t seed = turn_seed(cfg, turn.turn_id);
        try {
            SummarizeConfig sum_cfg{cfg.chunk_size, seed, 0.0, cfg.max_tokens};
            SummaryResult sum = summarize_dialogue(turn.history, summary_backend, templates, sum_cfg);
            const std::string& summary = sum.final_summary.text;

            for (const auto& item_id : turn.candidate_item_ids) {
                if (turn.labels.at(item_id) != 1) continue;  // positives only
                const std::string& desc = corpus.item(item_id).description;
                std::string prompt = rec_info_prompt(desc, templates);
                auto candidates =
                    generate_candidates(prompt, cfg.candidates, recinfo_backend,
                                        seed ^ fnv1a64(item_id), cfg.temperature, cfg.max_tokens,
                                        TextKind::RecInfo);
                std::vector<double> scores;
                scores.reserve(candidates.size());
                for (const auto& c : candidates)
                    scores.push_back(scorer(ScoreInput{summary, c.text, desc}));
                auto sel = select_pair(scores, 1);
                if (!sel) continue;
                auto [w, l] = *sel;
                if (candidates[w].text == candidates[l].text) continue;
                PreferencePair pair;
                pair.prompt = desc;  // the rec-info policy conditions on the description
                pair.chosen = candidates[w].text;
                pair.rejected = candidates[l].text;
                pair.meta = PairMeta{turn.turn_id, item_id, 1, std::abs(1.0 - scores[w]),
                                     std::abs(1.0 - scores[l]), PairKind::RecInfo};
                pairs.push_back(std::move(pair));
            }
        } catch (const BackendError& e) {
            throw BackendError("rec-info prefs, turn \"" + turn.turn_id + "\": " + e.what(),
                               e.index);
        } catch (const GenerationError& e) {
            throw GenerationError("rec-info prefs, turn \"" + turn.turn_id + "\": " + e.what());
        }
    }
    return pairs;
}

std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs, bool include_meta) {
    std::string out;
    for (const auto& p : pairs) {
        json j;
        j["prompt"] = p.prompt;
        j["chosen"] = p.chosen;
        j["rejected"] = p.rejected;
        if (include_meta) {
            j["meta"] = json{{"turn_id", p.meta.turn_id},       {"item_id", p.meta.item_id},
                             {"y", p.meta.y},                   {"dist_chosen", p.meta.dist_chosen},
                             {"dist_rejected", p.meta.dist_rejected},
                             {"kind", to_string(p.meta.kind)}};
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::size_t export_jsonl(const std::vector<PreferencePair>& pairs, const std::string& path,
                         bool include_meta) {
    write_file(path, pairs_to_jsonl(pairs, include_meta));
    return pairs.size();
}

std::vector<PreferencePair> import_jsonl(const std::string& path) {
    std::vector<PreferencePair> pairs;
    std::size_t line_no = 0;
    for (const auto& line : split_lines(read_file(path))) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("pairs JSONL line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            PreferencePair p;
            p.prompt = j.at("prompt").get<std::string>();
            p.chosen = j.at("chosen").get<std::string>();
            p.rejected = j.at("rejected").get<std::string>();
            if (j.contains("meta")) {
                const json& m = j.at("meta");
                p.meta.turn_id = m.at("turn_id").get<std::string>();
                p.meta.item_id = m.at("item_id").get<std::string>();
                p.meta.y = m.at("y").get<int>();
                p.meta.dist_chosen = m.at("dist_chosen").get<double>();
                p.meta.dist_rejected = m.at("dist_rejected").get<double>();
                p.meta.kind = m.at("kind").get<std::string>() == "recinfo" ? PairKind::RecInfo
                                                                           : PairKind::Summary;
            }
            pairs.push_back(std::move(p));
        } catch (const json::exception& e) {
            throw ParseError("pairs JSONL line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return pairs;
}

}  // namespace prefrec
