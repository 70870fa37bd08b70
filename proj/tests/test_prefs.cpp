#include "prefrec/prefs.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "prefrec/errors.hpp"
#include "prefrec/synth.hpp"
#include "prefrec/textgen.hpp"
#include "prefrec/util.hpp"

using namespace prefrec;

TEST_CASE("select_pair worked examples") {
    auto p1 = select_pair({0.9, 0.2, 0.5}, 1);
    REQUIRE(p1.has_value());
    CHECK(p1->first == 0);
    CHECK(p1->second == 1);

    auto p2 = select_pair({0.1, 0.8, 0.4}, 0);
    REQUIRE(p2.has_value());
    CHECK(p2->first == 0);
    CHECK(p2->second == 1);

    CHECK_FALSE(select_pair({0.6, 0.6}, 1).has_value());
    CHECK_FALSE(select_pair({0.5, 0.5, 0.5, 0.5}, 0).has_value());

    CHECK_THROWS_AS(select_pair({0.5}, 1), DomainError);
    CHECK_THROWS_AS(select_pair({}, 1), DomainError);
}

TEST_CASE("select_pair ties break to the lowest index") {
    // Distances for y=1: {0.4, 0.4, 0.1} -> loser is index 0, not 1.
    auto p = select_pair({0.6, 0.6, 0.9}, 1);
    REQUIRE(p.has_value());
    CHECK(p->first == 2);
    CHECK(p->second == 0);

    // Two minima: winner is the first.
    auto q = select_pair({0.9, 0.9, 0.1}, 1);
    REQUIRE(q.has_value());
    CHECK(q->first == 0);
    CHECK(q->second == 2);
}

TEST_CASE("select_pair agrees with a brute-force oracle") {
    DetRng rng(77);
    for (int iter = 0; iter < 1000; ++iter) {
        std::size_t n = 2 + rng.bounded(7);  // K <= 8
        int y = static_cast<int>(rng.bounded(2));
        std::vector<double> scores(n);
        for (auto& s : scores) s = rng.uniform();
        // Engineer ties in a third of the cases, all-equal in a tenth.
        if (iter % 3 == 0 && n >= 3) scores[2] = scores[0];
        if (iter % 10 == 0)
            for (auto& s : scores) s = scores[0];

        std::vector<double> dist(n);
        for (std::size_t i = 0; i < n; ++i) dist[i] = std::abs(y - scores[i]);
        auto min_it = std::min_element(dist.begin(), dist.end());
        auto max_it = std::max_element(dist.begin(), dist.end());
        std::size_t w = static_cast<std::size_t>(min_it - dist.begin());
        std::size_t l = static_cast<std::size_t>(max_it - dist.begin());

        auto got = select_pair(scores, y);
        if (w == l) {
            CHECK_FALSE(got.has_value());
        } else {
            REQUIRE(got.has_value());
            CHECK(got->first == w);
            CHECK(got->second == l);
            CHECK(dist[got->first] <= dist[got->second]);
        }
    }
}

namespace {

struct PrefsFixture {
    Corpus corpus;
    MockExtractiveBackend backend;
    TemplateSet templates = builtin_templates("synthetic");
    ScoreFn scorer;
    PrefsConfig cfg;

    PrefsFixture() {
        SynthConfig scfg;
        scfg.dialogues = 6;
        scfg.turns_per_dialogue = 1;
        scfg.candidates_per_turn = 3;
        scfg.seed = 11;
        corpus = make_synthetic_corpus(scfg);
        // A content-sensitive stand-in scorer: hash-derived pseudo-scores,
        // deterministic and spread over (0,1).
        scorer = [](const ScoreInput& in) {
            std::uint64_t h = fnv1a64(in.summary) ^ (fnv1a64(in.description) * 3);
            if (in.rec_info) h ^= fnv1a64(*in.rec_info) * 7;
            return 0.05 + 0.9 * static_cast<double>(h % 10007) / 10007.0;
        };
        cfg.candidates = 4;
        cfg.seed = 5;
    }
};

}  // namespace

TEST_CASE("build_summary_prefs emits valid pairs with a shared prompt per turn") {
    PrefsFixture fx;
    auto pairs = build_summary_prefs(fx.corpus, Split::Train, fx.scorer, fx.backend, fx.backend,
                                     fx.templates, fx.cfg);
    REQUIRE_FALSE(pairs.empty());
    for (const auto& p : pairs) {
        CHECK(p.meta.dist_chosen <= p.meta.dist_rejected);
        CHECK(p.chosen != p.rejected);
        CHECK(p.meta.kind == PairKind::Summary);
        CHECK((p.meta.y == 0 || p.meta.y == 1));
        // The prompt is the rendered final-summary prompt, not the raw PS.
        CHECK(p.prompt.find("[Source Text for Summarization]") != std::string::npos);
    }
    // Pairs from one turn share one prompt.
    std::map<std::string, std::set<std::string>> prompts_by_turn;
    for (const auto& p : pairs) prompts_by_turn[p.meta.turn_id].insert(p.prompt);
    for (const auto& [turn, prompts] : prompts_by_turn) CHECK(prompts.size() == 1);

    // Deterministic across runs.
    auto again = build_summary_prefs(fx.corpus, Split::Train, fx.scorer, fx.backend, fx.backend,
                                     fx.templates, fx.cfg);
    CHECK(pairs == again);

    PrefsConfig bad = fx.cfg;
    bad.candidates = 1;
    CHECK_THROWS_AS(build_summary_prefs(fx.corpus, Split::Train, fx.scorer, fx.backend, fx.backend,
                                        fx.templates, bad),
                    DomainError);
}

TEST_CASE("re-scoring the emitted pairs reproduces the distance inequality") {
    PrefsFixture fx;
    auto pairs = build_summary_prefs(fx.corpus, Split::Train, fx.scorer, fx.backend, fx.backend,
                                     fx.templates, fx.cfg);
    REQUIRE_FALSE(pairs.empty());
    for (const auto& p : pairs) {
        const std::string& desc = fx.corpus.item(p.meta.item_id).description;
        RecInfoConfig ri{fnv1a64(p.meta.turn_id) ^ fx.cfg.seed, 0.0, 512};
        std::string rec = generate_rec_info(desc, fx.backend, fx.templates, ri).text;
        double chosen_score = fx.scorer(ScoreInput{p.chosen, rec, desc});
        double rejected_score = fx.scorer(ScoreInput{p.rejected, rec, desc});
        CHECK(std::abs(p.meta.y - chosen_score) ==
              doctest::Approx(p.meta.dist_chosen).epsilon(1e-12));
        CHECK(std::abs(p.meta.y - chosen_score) <= std::abs(p.meta.y - rejected_score) + 1e-12);
    }
}

TEST_CASE("identical candidates yield no pairs") {
    // A one-word extraction cannot be varied by the seed, so all K candidates
    // are byte-identical and every column is degenerate.
    PrefsFixture fx;
    Corpus corpus;
    corpus.items.emplace("a", Item{"a", "somewhere"});
    Dialogue d;
    d.dialogue_id = "d";
    RecommendationTurn t;
    t.turn_id = "t0";
    t.history.push_back({Speaker::Customer, "like"});
    t.candidate_item_ids = {"a"};
    t.labels["a"] = 1;
    d.turns.push_back(t);
    corpus.dialogues.push_back(d);

    auto pairs = build_summary_prefs(corpus, Split::Train, fx.scorer, fx.backend, fx.backend,
                                     fx.templates, fx.cfg);
    CHECK(pairs.empty());
}

TEST_CASE("build_recinfo_prefs only covers positive items and uses the description prompt") {
    PrefsFixture fx;
    auto pairs = build_recinfo_prefs(fx.corpus, Split::Train, fx.scorer, fx.backend, fx.backend,
                                     fx.templates, fx.cfg);
    REQUIRE_FALSE(pairs.empty());
    for (const auto& p : pairs) {
        CHECK(p.meta.kind == PairKind::RecInfo);
        CHECK(p.meta.y == 1);
        CHECK(fx.corpus.item(p.meta.item_id).description == p.prompt);
        CHECK(fx.corpus.dialogues.size() > 0);
    }
    // Exactly the positive items of train turns can contribute.
    std::size_t positives = 0;
    for (auto [di, ti] : fx.corpus.turns_in_split(Split::Train))
        for (const auto& [id, y] : fx.corpus.dialogues[di].turns[ti].labels) positives += y;
    CHECK(pairs.size() <= positives);
}

TEST_CASE("export_jsonl is byte-stable and round-trips") {
    PrefsFixture fx;
    auto pairs = build_summary_prefs(fx.corpus, Split::Train, fx.scorer, fx.backend, fx.backend,
                                     fx.templates, fx.cfg);
    REQUIRE_FALSE(pairs.empty());

    std::string path =
        (std::filesystem::temp_directory_path() / "prefrec_pairs_test.jsonl").string();
    std::size_t n1 = export_jsonl(pairs, path, true);
    CHECK(n1 == pairs.size());
    std::string bytes1 = read_file(path);
    export_jsonl(pairs, path, true);
    CHECK(read_file(path) == bytes1);

    auto imported = import_jsonl(path);
    CHECK(imported == pairs);

    // Without meta, the required keys survive.
    export_jsonl(pairs, path, false);
    auto slim = import_jsonl(path);
    REQUIRE(slim.size() == pairs.size());
    CHECK(slim[0].prompt == pairs[0].prompt);
    CHECK(slim[0].chosen == pairs[0].chosen);
    CHECK(slim[0].rejected == pairs[0].rejected);

    CHECK(export_jsonl({}, path, true) == 0);
    CHECK(read_file(path).empty());
    std::filesystem::remove(path);
}

TEST_CASE("jsonl round-trip survives newlines, quotes, and unicode in texts") {
    DetRng rng(404);
    const char* fragments[] = {"line\nbreak", "quo\"te", "tab\t", "日本語テキスト",
                               "back\\slash", "plain words", "{not a slot}"};
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 50; ++i) {
        auto text = [&] {
            std::string t;
            std::size_t n = 1 + rng.bounded(4);
            for (std::size_t k = 0; k < n; ++k) t += fragments[rng.bounded(7)];
            return t;
        };
        PreferencePair p;
        p.prompt = text();
        p.chosen = text();
        p.rejected = p.chosen + "x";  // keep the byte-distinct invariant
        p.meta = PairMeta{"t" + std::to_string(i), "item", static_cast<int>(rng.bounded(2)),
                          rng.uniform(), rng.uniform(),
                          i % 2 ? PairKind::Summary : PairKind::RecInfo};
        if (p.meta.dist_chosen > p.meta.dist_rejected)
            std::swap(p.meta.dist_chosen, p.meta.dist_rejected);
        pairs.push_back(std::move(p));
    }
    std::string path =
        (std::filesystem::temp_directory_path() / "prefrec_pairs_fuzz.jsonl").string();
    export_jsonl(pairs, path, true);
    CHECK(import_jsonl(path) == pairs);
    std::filesystem::remove(path);
}
