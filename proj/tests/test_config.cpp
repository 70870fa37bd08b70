#include "prefrec/config.hpp"

#include <set>

#include "doctest.h"
#include "json.hpp"
#include "prefrec/errors.hpp"
#include "prefrec/synth.hpp"
#include "prefrec/util.hpp"

using namespace prefrec;
using nlohmann::json;

TEST_CASE("config json parsing keeps defaults for missing fields") {
    RunConfig cfg = config_from_json(R"({"k": 6, "profile": "chatrec"})");
    CHECK(cfg.k_candidates == 6);
    CHECK(cfg.j_candidates == 4);
    CHECK(cfg.profile == "chatrec");
    CHECK(cfg.root_seed == 7);
    CHECK(cfg.variant == Variant::Ours);

    CHECK_THROWS_AS(config_from_json("{nope"), ConfigError);
    CHECK_THROWS_AS(config_from_json(R"({"k": "six"})"), ConfigError);

    RunConfig full = config_from_json(R"({
      "summary_backend": {"kind": "remote", "url": "http://h/v1", "model": "m"},
      "scorer": {"kind": "native", "features": {"hash_dim_log2": 12}, "hyper": {"lr": 0.1}},
      "variant": "wo-sum-dpo", "ks": [1, 5], "root_seed": 99
    })");
    CHECK(full.summary_backend.kind == "remote");
    CHECK(full.summary_backend.url == "http://h/v1");
    CHECK(full.scorer.features.hash_dim_log2 == 12);
    CHECK(full.scorer.hyper.lr == 0.1);
    CHECK(full.variant == Variant::WithoutSumDPO);
    CHECK(full.ks == std::vector<int>{1, 5});
    CHECK(full.root_seed == 99);
}

TEST_CASE("config hash separates variants and is stable") {
    RunConfig a, b;
    CHECK(config_hash(a) == config_hash(b));
    std::set<std::string> hashes;
    for (Variant v : {Variant::Baseline, Variant::SumRec, Variant::Ours, Variant::WithoutRecDPO,
                      Variant::WithoutSumDPO}) {
        RunConfig cfg;
        cfg.variant = v;
        hashes.insert(config_hash(cfg));
    }
    CHECK(hashes.size() == 5);
}

TEST_CASE("profile-dependent chunking and tokenizer defaults") {
    RunConfig cfg;
    cfg.profile = "tabidachi";
    CHECK(effective_chunk_size(cfg) == 30);
    CHECK(effective_tokenizer(cfg) == "char");

    cfg.profile = "chatrec";
    CHECK(effective_chunk_size(cfg) == 1000000);  // single-pass, whole dialogue
    CHECK(effective_tokenizer(cfg) == "char");

    cfg.profile = "synthetic";
    CHECK(effective_chunk_size(cfg) == 30);
    CHECK(effective_tokenizer(cfg) == "word");

    cfg.chunk_size = 12;  // explicit values win
    cfg.tokenizer = "char";
    cfg.profile = "chatrec";
    CHECK(effective_chunk_size(cfg) == 12);
    CHECK(effective_tokenizer(cfg) == "char");
}

TEST_CASE("mock backend ids encode the ablation wiring") {
    CHECK(make_backend(BackendSpec{}, "summary", Variant::Ours)->id() == "mock:summary-dpo");
    CHECK(make_backend(BackendSpec{}, "summary", Variant::WithoutSumDPO)->id() ==
          "mock:summary-base");
    CHECK(make_backend(BackendSpec{}, "recinfo", Variant::WithoutSumDPO)->id() ==
          "mock:recinfo-dpo");
    CHECK(make_backend(BackendSpec{}, "recinfo", Variant::SumRec)->id() == "mock:recinfo-base");
    BackendSpec named;
    named.id = "custom";
    CHECK(make_backend(named, "summary", Variant::Ours)->id() == "custom");
    BackendSpec bogus;
    bogus.kind = "nonsense";
    CHECK_THROWS_AS(make_backend(bogus, "summary", Variant::Ours), ConfigError);
}

TEST_CASE("manifests are byte-stable and carry input hashes") {
    RunConfig cfg;
    cfg.corpus_path = "x.json";
    ManifestInputs inputs;
    inputs.output_names = {"a.jsonl"};
    inputs.extra = {{"pairs", "3"}};
    std::string m1 = manifest_json("build-prefs", cfg, inputs);
    std::string m2 = manifest_json("build-prefs", cfg, inputs);
    CHECK(m1 == m2);
    json j = json::parse(m1);
    CHECK(j.at("stage") == "build-prefs");
    CHECK(j.at("config_hash").get<std::string>().size() == 64);
    CHECK(j.at("root_seed") == 7);
    CHECK(j.at("outputs") == json::array({"a.jsonl"}));
    CHECK(j.at("pairs") == "3");
}

TEST_CASE("trainer stubs carry the shipped DPO defaults per profile and kind") {
    json tab_sum = json::parse(trainer_stub_json("tabidachi", "summary"));
    CHECK(tab_sum.at("beta").get<double>() == 0.1768);
    CHECK(tab_sum.at("learning_rate").get<double>() == doctest::Approx(1.1593e-7));
    CHECK(tab_sum.at("per_device_train_batch_size") == 12);
    CHECK(tab_sum.at("num_train_epochs") == 1);

    json tab_rec = json::parse(trainer_stub_json("tabidachi", "recinfo"));
    CHECK(tab_rec.at("beta").get<double>() == 0.06109);
    CHECK(tab_rec.at("learning_rate").get<double>() == doctest::Approx(8.7340e-6));
    CHECK(tab_rec.at("per_device_train_batch_size") == 16);

    json chat_sum = json::parse(trainer_stub_json("chatrec", "summary"));
    CHECK(chat_sum.at("beta").get<double>() == 0.1253);
    CHECK(chat_sum.at("per_device_train_batch_size") == 8);
    json chat_rec = json::parse(trainer_stub_json("chatrec", "recinfo"));
    CHECK(chat_rec.at("beta").get<double>() == 0.03949);

    // Shipped asset files must not drift from the generator.
    for (const char* profile : {"tabidachi", "chatrec"}) {
        for (const char* kind : {"summary", "recinfo"}) {
            std::string path = std::string(PREFREC_SOURCE_DIR) + "/assets/configs/dpo_" + profile +
                               "_" + kind + ".json";
            CHECK(read_file(path) == trainer_stub_json(profile, kind));
        }
    }
}

TEST_CASE("synthetic corpus has the advertised shape") {
    SynthConfig cfg;  // defaults: 100 dialogues x 2 turns, 10 candidates
    Corpus corpus = make_synthetic_corpus(cfg);
    CHECK(corpus.turn_count() == 200);
    CHECK(corpus.dialogues.size() == 100);
    CHECK(corpus.turns_in_split(Split::Train).size() == 160);
    CHECK(corpus.turns_in_split(Split::Val).size() == 20);
    CHECK(corpus.turns_in_split(Split::Test).size() == 20);

    const auto& keywords = synth_keywords();
    REQUIRE(keywords.size() == 10);
    for (const auto& d : corpus.dialogues) {
        // The customer states a keyword with a preference marker.
        const std::string& opening = d.turns[0].history[1].text;
        CHECK(opening.find("I like ") != std::string::npos);
        for (const auto& t : d.turns) {
            CHECK(t.candidate_item_ids.size() == 10);
            // Exactly one candidate description contains a keyword, and it is
            // the gold item.
            int with_keyword = 0;
            for (const auto& id : t.candidate_item_ids) {
                const std::string& desc = corpus.item(id).description;
                bool has = false;
                for (const auto& kw : keywords) has |= desc.find(kw) != std::string::npos;
                if (has) {
                    ++with_keyword;
                    CHECK(t.labels.at(id) == 1);
                }
            }
            CHECK(with_keyword == 1);
        }
    }

    // Deterministic for a fixed seed.
    CHECK(make_synthetic_corpus(cfg) == corpus);
    SynthConfig other = cfg;
    other.seed = 8;
    CHECK_FALSE(make_synthetic_corpus(other) == corpus);
}
