#include "prefrec/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <sstream>

#include "json.hpp"
#include "prefrec/errors.hpp"
#include "prefrec/textgen.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

using nlohmann::json;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Baseline: return "baseline";
        case Variant::SumRec: return "sumrec";
        case Variant::Ours: return "ours";
        case Variant::WithoutRecDPO: return "wo-rec-dpo";
        default: return "wo-sum-dpo";
    }
}

Variant variant_from_string(const std::string& s) {
    std::string l = lowercase_ascii(s);
    if (l == "baseline") return Variant::Baseline;
    if (l == "sumrec") return Variant::SumRec;
    if (l == "ours") return Variant::Ours;
    if (l == "wo-rec-dpo" || l == "without-rec-dpo") return Variant::WithoutRecDPO;
    if (l == "wo-sum-dpo" || l == "without-sum-dpo") return Variant::WithoutSumDPO;
    throw ConfigError("unknown variant: " + s);
}

bool variant_uses_recinfo(Variant v) {
    return v != Variant::Baseline;
}

RankedTurn rank_turn(const Corpus& corpus, const RecommendationTurn& turn,
                     const Pipeline& pipeline) {
    if (!pipeline.summary_backend) throw ConfigError("pipeline has no summary backend");
    const bool use_recinfo = variant_uses_recinfo(pipeline.variant);
    if (use_recinfo && !pipeline.recinfo_backend)
        throw ConfigError("variant " + to_string(pipeline.variant) + " needs a rec-info backend");

    const std::uint64_t seed = fnv1a64(turn.turn_id) ^ pipeline.seed;
    SummarizeConfig sum_cfg{pipeline.chunk_size, seed, 0.0, pipeline.max_tokens};
    SummaryResult sum =
        summarize_dialogue(turn.history, *pipeline.summary_backend, pipeline.templates, sum_cfg);

    RankedTurn out;
    out.turn_id = turn.turn_id;
    out.ranking.reserve(turn.candidate_item_ids.size());
    for (const auto& item_id : turn.candidate_item_ids) {
        const std::string& desc = corpus.item(item_id).description;
        ScoreInput input;
        input.summary = sum.final_summary.text;
        input.description = desc;
        if (use_recinfo) {
            RecInfoConfig ri_cfg{seed, 0.0, pipeline.max_tokens};
            input.rec_info =
                generate_rec_info(desc, *pipeline.recinfo_backend, pipeline.templates, ri_cfg).text;
        }
        out.ranking.push_back(RankedItem{item_id, pipeline.scorer(input)});
    }
    std::sort(out.ranking.begin(), out.ranking.end(), [](const RankedItem& a, const RankedItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.item_id < b.item_id;
    });
    for (std::size_t i = 0; i < out.ranking.size(); ++i)
        if (turn.labels.at(out.ranking[i].item_id) == 1) out.gold_ranks.push_back(i + 1);
    if (out.gold_ranks.empty()) throw ValidationError("turn \"" + turn.turn_id + "\" has no gold");
    return out;
}

namespace {

void check_metric_args(const std::vector<RankedTurn>& turns, int k) {
    if (turns.empty()) throw DomainError("metric over empty turn list");
    if (k < 1) throw DomainError("k must be >= 1");
}

}  // namespace

double hit_rate_at_k(const std::vector<RankedTurn>& turns, int k) {
    check_metric_args(turns, k);
    double hits = 0.0;
    for (const auto& t : turns)
        if (!t.gold_ranks.empty() && t.gold_ranks.front() <= static_cast<std::size_t>(k))
            hits += 1.0;
    return hits / static_cast<double>(turns.size());
}

double mrr_at_k(const std::vector<RankedTurn>& turns, int k) {
    check_metric_args(turns, k);
    double sum = 0.0;
    for (const auto& t : turns) {
        if (t.gold_ranks.empty()) continue;
        std::size_t first = t.gold_ranks.front();
        if (first <= static_cast<std::size_t>(k)) sum += 1.0 / static_cast<double>(first);
    }
    return sum / static_cast<double>(turns.size());
}

EvalReport evaluate(const Corpus& corpus, Split split, const Pipeline& pipeline,
                    const std::vector<int>& ks) {
    if (ks.empty()) throw DomainError("evaluate needs at least one rank cutoff");
    auto refs = corpus.turns_in_split(split);
    if (refs.empty()) throw DomainError("no turns in split " + to_string(split));

    EvalReport report;
    report.variant = pipeline.variant;
    report.ks = ks;
    report.turns.resize(refs.size());

    std::vector<std::exception_ptr> errors(refs.size());
#pragma omp parallel for schedule(dynamic)
    for (long long ii = 0; ii < static_cast<long long>(refs.size()); ++ii) {
        auto i = static_cast<std::size_t>(ii);
        try {
            const auto& turn = corpus.dialogues[refs[i].first].turns[refs[i].second];
            report.turns[i] = rank_turn(corpus, turn, pipeline);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (int k : ks) {
        report.hr[k] = hit_rate_at_k(report.turns, k);
        report.mrr[k] = mrr_at_k(report.turns, k);
    }
    return report;
}

std::string report_to_json(const EvalReport& report) {
    json j;
    j["variant"] = to_string(report.variant);
    j["ks"] = report.ks;
    j["hr"] = json::object();
    j["mrr"] = json::object();
    for (const auto& [k, v] : report.hr) j["hr"][std::to_string(k)] = v;
    for (const auto& [k, v] : report.mrr) j["mrr"][std::to_string(k)] = v;
    j["turns"] = json::array();
    for (const auto& t : report.turns) {
        json jt;
        jt["turn_id"] = t.turn_id;
        jt["ranking"] = json::array();
        for (const auto& r : t.ranking)
            jt["ranking"].push_back({{"item_id", r.item_id}, {"score", r.score}});
        jt["gold_ranks"] = t.gold_ranks;
        j["turns"].push_back(std::move(jt));
    }
    return j.dump(2) + "\n";
}

std::string render_report_table(const EvalReport& report) {
    std::ostringstream ss;
    char buf[64];
    ss << "Method      Metrics";
    for (int k : report.ks) {
        std::snprintf(buf, sizeof(buf), "%8s", ("@" + std::to_string(k)).c_str());
        ss << buf;
    }
    ss << '\n';
    std::snprintf(buf, sizeof(buf), "%-12s", to_string(report.variant).c_str());
    ss << buf << "HR     ";
    for (int k : report.ks) {
        std::snprintf(buf, sizeof(buf), "%8.4f", report.hr.at(k));
        ss << buf;
    }
    ss << '\n';
    ss << "            MRR    ";
    for (int k : report.ks) {
        std::snprintf(buf, sizeof(buf), "%8.4f", report.mrr.at(k));
        ss << buf;
    }
    ss << '\n';
    return ss.str();
}

}  // namespace prefrec
