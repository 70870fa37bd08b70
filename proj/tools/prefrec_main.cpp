#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"
#include "prefrec/config.hpp"
#include "prefrec/corpus.hpp"
#include "prefrec/dpo.hpp"
#include "prefrec/errors.hpp"
#include "prefrec/eval.hpp"
#include "prefrec/prefs.hpp"
#include "prefrec/scorer.hpp"
#include "prefrec/synth.hpp"
#include "prefrec/textgen.hpp"
#include "prefrec/textmetrics.hpp"
#include "prefrec/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace prefrec;

namespace {

// Missing required inputs are usage errors (exit 2), not stage failures.
struct UsageError : ConfigError {
    using ConfigError::ConfigError;
};

const char* error_type(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
    if (dynamic_cast<const TemplateError*>(&e)) return "TemplateError";
    if (dynamic_cast<const GenerationError*>(&e)) return "GenerationError";
    if (dynamic_cast<const BackendError*>(&e)) return "BackendError";
    if (dynamic_cast<const NumericalError*>(&e)) return "NumericalError";
    if (dynamic_cast<const FormatError*>(&e)) return "FormatError";
    if (dynamic_cast<const IoError*>(&e)) return "IoError";
    if (dynamic_cast<const ProtocolError*>(&e)) return "ProtocolError";
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const DomainError*>(&e)) return "DomainError";
    return "Error";
}

struct CliState {
    RunConfig cfg;
    std::string variant_str;
    std::string config_path;
    std::string summarize_split = "all";
    std::string prefs_split = "train";
    std::string eval_split = "test";
    std::vector<double> split_ratios;
    bool no_meta = false;
    bool recinfo_backend_explicit = false;

    // synth
    int synth_dialogues = 100;
    int synth_turns = 2;
    int synth_candidates = 10;

    // score
    std::string score_summary, score_recinfo, score_description, score_input;

    // dpo-check
    double beta = 0.1;
    double lr = 0.5;
    int steps = 50;
    std::string pairs_path, curve_name;

    // build-prefs / metrics
    std::string kind = "summary";
    std::string texts_path, refs_path;
};

Split parse_split(const std::string& s) {
    return split_from_string(s);
}

CorpusFormat parse_format(const std::string& s) {
    std::string l = lowercase_ascii(s);
    if (l == "native") return CorpusFormat::Native;
    if (l == "chatrec" || l == "chatrec-ratings") return CorpusFormat::ChatRecRatings;
    throw ConfigError("unknown corpus format: " + s);
}

void apply_jobs(const RunConfig& cfg) {
#ifdef _OPENMP
    if (cfg.jobs > 0) omp_set_num_threads(cfg.jobs);
#else
    (void)cfg;
#endif
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    fs::create_directories(cfg.out_dir);
    return (fs::path(cfg.out_dir) / name).string();
}

TemplateSet stage_templates(const RunConfig& cfg) {
    if (!cfg.templates_dir.empty()) return load_templates(cfg.templates_dir, cfg.profile);
    return builtin_templates(cfg.profile);
}

Corpus stage_corpus(const RunConfig& cfg) {
    if (cfg.corpus_path.empty()) throw UsageError("missing corpus path (--corpus)");
    return load_corpus(cfg.corpus_path, parse_format(cfg.corpus_format));
}

ScoreFn stage_scorer(const RunConfig& cfg, ScorerModel* loaded = nullptr) {
    if (cfg.scorer.kind == "remote") {
        if (cfg.scorer.url.empty()) throw UsageError("remote scorer requires --scorer-url");
        RemoteScorerConfig rcfg;
        rcfg.url = cfg.scorer.url;
        return make_remote_scorer(rcfg);
    }
    if (cfg.scorer.kind != "native") throw ConfigError("unknown scorer kind: " + cfg.scorer.kind);
    if (cfg.scorer.model_path.empty()) throw UsageError("native scorer requires --model");
    ScorerModel model = load_model(cfg.scorer.model_path);
    if (loaded) *loaded = model;
    return make_native_scorer(std::move(model));
}

// Refuses models whose feature configuration drifted from the hash recorded
// by the train-scorer stage (manifest next to the model file, when present).
void check_feature_cfg_gate(const RunConfig& cfg, const ScorerModel& model) {
    if (cfg.scorer.model_path.empty()) return;
    fs::path manifest = fs::path(cfg.scorer.model_path).parent_path() / "train-scorer_manifest.json";
    if (!fs::exists(manifest)) return;
    json j;
    try {
        j = json::parse(read_file(manifest.string()));
    } catch (const std::exception&) {
        return;  // unreadable manifest is not a gate
    }
    if (!j.contains("feature_cfg_hash")) return;
    std::string recorded = j["feature_cfg_hash"].get<std::string>();
    if (recorded != feature_cfg_hash(model.cfg))
        throw ConfigError("scorer feature_cfg hash " + feature_cfg_hash(model.cfg) +
                          " differs from the one recorded at training time (" + recorded + ")");
}

Pipeline make_pipeline(const RunConfig& cfg, const TemplateSet& templates,
                       const Backend& summary_backend, const Backend* recinfo_backend,
                       ScoreFn scorer) {
    Pipeline p;
    p.variant = cfg.variant;
    p.summary_backend = &summary_backend;
    p.recinfo_backend = recinfo_backend;
    p.scorer = std::move(scorer);
    p.templates = templates;
    p.chunk_size = effective_chunk_size(cfg);
    p.seed = stage_seed(cfg.root_seed, "evaluate");
    p.max_tokens = cfg.summary_backend.max_tokens;
    return p;
}

// Builds (summary, rec_info?, description, y) examples for every candidate of
// every turn in the split, with the same temperature-0 generation path the
// ranking pipeline uses.
std::vector<ScoredExample> collect_examples(const Corpus& corpus, Split split,
                                            const Backend& summary_backend,
                                            const Backend* recinfo_backend,
                                            const TemplateSet& templates, const RunConfig& cfg) {
    std::vector<ScoredExample> examples;
    const bool use_recinfo = variant_uses_recinfo(cfg.variant) && recinfo_backend;
    for (auto [di, ti] : corpus.turns_in_split(split)) {
        const auto& turn = corpus.dialogues[di].turns[ti];
        SummarizeConfig sum_cfg{effective_chunk_size(cfg), fnv1a64(turn.turn_id), 0.0,
                                cfg.summary_backend.max_tokens};
        SummaryResult sum = summarize_dialogue(turn.history, summary_backend, templates, sum_cfg);
        for (const auto& item_id : turn.candidate_item_ids) {
            const std::string& desc = corpus.item(item_id).description;
            ScoredExample ex;
            ex.input.summary = sum.final_summary.text;
            ex.input.description = desc;
            if (use_recinfo) {
                RecInfoConfig ri{fnv1a64(item_id), 0.0, cfg.recinfo_backend.max_tokens};
                ex.input.rec_info = generate_rec_info(desc, *recinfo_backend, templates, ri).text;
            }
            ex.target = turn.labels.at(item_id);
            examples.push_back(std::move(ex));
        }
    }
    return examples;
}

int cmd_synth(CliState& st) {
    SynthConfig scfg;
    scfg.dialogues = st.synth_dialogues;
    scfg.turns_per_dialogue = st.synth_turns;
    scfg.candidates_per_turn = st.synth_candidates;
    scfg.seed = st.cfg.root_seed;
    Corpus corpus = make_synthetic_corpus(scfg);
    std::string path = out_path(st.cfg, "corpus.json");
    save_corpus(corpus, path);
    write_manifest("synth", st.cfg,
                   ManifestInputs{{}, {"corpus.json"},
                                  {{"dialogues", std::to_string(scfg.dialogues)},
                                   {"turns", std::to_string(corpus.turn_count())}}});
    std::cout << "wrote " << path << " (" << corpus.turn_count() << " turns)\n";
    return 0;
}

int cmd_ingest(CliState& st) {
    Corpus corpus = stage_corpus(st.cfg);
    if (!st.split_ratios.empty()) {
        if (st.split_ratios.size() != 3)
            throw ConfigError("--split-ratios needs train,val,test");
        corpus = split_corpus(corpus,
                              SplitRatios{st.split_ratios[0], st.split_ratios[1], st.split_ratios[2]},
                              stage_seed(st.cfg.root_seed, "ingest"));
    }
    std::string path = out_path(st.cfg, "corpus.json");
    save_corpus(corpus, path);
    write_manifest("ingest", st.cfg,
                   ManifestInputs{{st.cfg.corpus_path}, {"corpus.json"},
                                  {{"turns", std::to_string(corpus.turn_count())}}});
    std::cout << "wrote " << path << " (" << corpus.dialogues.size() << " dialogues, "
              << corpus.turn_count() << " turns)\n";
    return 0;
}

int cmd_summarize(CliState& st) {
    Corpus corpus = stage_corpus(st.cfg);
    TemplateSet templates = stage_templates(st.cfg);
    auto backend = make_backend(st.cfg.summary_backend, "summary", st.cfg.variant);
    std::uint64_t seed = stage_seed(st.cfg.root_seed, "summarize");

    std::vector<std::pair<std::size_t, std::size_t>> refs;
    if (st.summarize_split == "all") {
        for (std::size_t di = 0; di < corpus.dialogues.size(); ++di)
            for (std::size_t ti = 0; ti < corpus.dialogues[di].turns.size(); ++ti)
                refs.emplace_back(di, ti);
    } else {
        refs = corpus.turns_in_split(parse_split(st.summarize_split));
    }

    std::string out;
    for (auto [di, ti] : refs) {
        const auto& turn = corpus.dialogues[di].turns[ti];
        SummarizeConfig sum_cfg{effective_chunk_size(st.cfg), seed ^ fnv1a64(turn.turn_id), 0.0,
                                st.cfg.summary_backend.max_tokens};
        SummaryResult sum = summarize_dialogue(turn.history, *backend, templates, sum_cfg);
        json j;
        j["dialogue_id"] = corpus.dialogues[di].dialogue_id;
        j["turn_id"] = turn.turn_id;
        j["summary"] = sum.final_summary.text;
        json parts = json::array();
        for (const auto& p : sum.partials) parts.push_back(p.text);
        j["partials"] = parts;
        j["ps"] = sum.ps;
        j["backend_id"] = sum.final_summary.backend_id;
        j["seed"] = sum.final_summary.seed;
        j["prompt_hash"] = to_hex(sum.final_summary.prompt_hash);
        out += j.dump();
        out += '\n';
    }
    std::string path = out_path(st.cfg, "summaries.jsonl");
    write_file(path, out);
    write_manifest("summarize", st.cfg,
                   ManifestInputs{{st.cfg.corpus_path}, {"summaries.jsonl"},
                                  {{"turns", std::to_string(refs.size())}}});
    std::cout << "wrote " << path << " (" << refs.size() << " turns)\n";
    return 0;
}

int cmd_recinfo(CliState& st) {
    Corpus corpus = stage_corpus(st.cfg);
    TemplateSet templates = stage_templates(st.cfg);
    auto backend = make_backend(st.cfg.recinfo_backend, "recinfo", st.cfg.variant);
    std::uint64_t seed = stage_seed(st.cfg.root_seed, "recinfo");

    std::string out;
    for (const auto& [item_id, item] : corpus.items) {
        RecInfoConfig ri{seed ^ fnv1a64(item_id), 0.0, st.cfg.recinfo_backend.max_tokens};
        GeneratedText text = generate_rec_info(item.description, *backend, templates, ri);
        json j;
        j["item_id"] = item_id;
        j["rec_info"] = text.text;
        j["backend_id"] = text.backend_id;
        j["seed"] = text.seed;
        j["prompt_hash"] = to_hex(text.prompt_hash);
        out += j.dump();
        out += '\n';
    }
    std::string path = out_path(st.cfg, "recinfo.jsonl");
    write_file(path, out);
    write_manifest("recinfo", st.cfg,
                   ManifestInputs{{st.cfg.corpus_path}, {"recinfo.jsonl"},
                                  {{"items", std::to_string(corpus.items.size())}}});
    std::cout << "wrote " << path << " (" << corpus.items.size() << " items)\n";
    return 0;
}

int cmd_train_scorer(CliState& st) {
    Corpus corpus = stage_corpus(st.cfg);
    TemplateSet templates = stage_templates(st.cfg);
    auto summary_backend = make_backend(st.cfg.summary_backend, "summary", st.cfg.variant);
    std::unique_ptr<Backend> recinfo_backend;
    if (variant_uses_recinfo(st.cfg.variant))
        recinfo_backend = make_backend(st.cfg.recinfo_backend, "recinfo", st.cfg.variant);

    auto train = collect_examples(corpus, Split::Train, *summary_backend, recinfo_backend.get(),
                                  templates, st.cfg);
    auto val = collect_examples(corpus, Split::Val, *summary_backend, recinfo_backend.get(),
                                templates, st.cfg);

    TrainHyper hyper = st.cfg.scorer.hyper;
    hyper.seed = stage_seed(st.cfg.root_seed, "train-scorer") ^ hyper.seed;
    TrainResult result = train_scorer(train, val, st.cfg.scorer.features, hyper);

    std::string model_path = out_path(st.cfg, "scorer.json");
    save_model(result.model, model_path);

    std::string csv = "epoch,train_mse,val_mse\n";
    for (std::size_t i = 0; i < result.history.size(); ++i)
        csv += std::to_string(i) + "," + std::to_string(result.history[i].train_mse) + "," +
               std::to_string(result.history[i].val_mse) + "\n";
    write_file(out_path(st.cfg, "train_history.csv"), csv);

    write_manifest("train-scorer", st.cfg,
                   ManifestInputs{{st.cfg.corpus_path}, {"scorer.json", "train_history.csv"},
                                  {{"feature_cfg_hash", feature_cfg_hash(result.model.cfg)},
                                   {"train_examples", std::to_string(train.size())},
                                   {"val_examples", std::to_string(val.size())}}});
    std::cout << "wrote " << model_path << " (" << train.size() << " train examples, "
              << result.history.size() << " epochs)\n";
    return 0;
}

int cmd_score(CliState& st) {
    ScorerModel model;
    ScoreFn scorer = stage_scorer(st.cfg, &model);
    if (st.cfg.scorer.kind == "native") check_feature_cfg_gate(st.cfg, model);

    if (!st.score_input.empty()) {
        std::string out;
        std::size_t line_no = 0;
        for (const auto& line : split_lines(read_file(st.score_input))) {
            ++line_no;
            if (trim(line).empty()) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw ParseError("score input line " + std::to_string(line_no) + ": " + e.what());
            }
            ScoreInput input;
            try {
                input.summary = j.at("summary").get<std::string>();
                input.description = j.at("description").get<std::string>();
                if (j.contains("rec_info") && !j.at("rec_info").is_null())
                    input.rec_info = j.at("rec_info").get<std::string>();
            } catch (const json::exception& e) {
                throw ParseError("score input line " + std::to_string(line_no) + ": " + e.what());
            }
            json out_j;
            out_j["score"] = scorer(input);
            out += out_j.dump();
            out += '\n';
        }
        std::string path = out_path(st.cfg, "scores.jsonl");
        write_file(path, out);
        write_manifest("score", st.cfg, ManifestInputs{{st.score_input}, {"scores.jsonl"}, {}});
        std::cout << "wrote " << path << "\n";
        return 0;
    }

    if (st.score_summary.empty() || st.score_description.empty())
        throw UsageError("score needs --input or both --summary and --description");
    ScoreInput input;
    input.summary = st.score_summary;
    input.description = st.score_description;
    if (!st.score_recinfo.empty()) input.rec_info = st.score_recinfo;
    double value = scorer(input);
    write_manifest("score", st.cfg,
                   ManifestInputs{{}, {}, {{"score", std::to_string(value)}}});
    printf("%.6f\n", value);
    return 0;
}

int cmd_build_prefs(CliState& st) {
    Corpus corpus = stage_corpus(st.cfg);
    TemplateSet templates = stage_templates(st.cfg);
    ScorerModel model;
    ScoreFn scorer = stage_scorer(st.cfg, &model);
    if (st.cfg.scorer.kind == "native") check_feature_cfg_gate(st.cfg, model);

    auto summary_backend = make_backend(st.cfg.summary_backend, "summary", st.cfg.variant);
    auto recinfo_backend = make_backend(st.cfg.recinfo_backend, "recinfo", st.cfg.variant);

    PrefsConfig pcfg;
    pcfg.seed = stage_seed(st.cfg.root_seed, "build-prefs");
    pcfg.chunk_size = effective_chunk_size(st.cfg);
    pcfg.max_tokens = st.cfg.summary_backend.max_tokens;

    Split split = parse_split(st.prefs_split);
    std::vector<PreferencePair> pairs;
    if (st.kind == "summary") {
        pcfg.candidates = st.cfg.k_candidates;
        pcfg.temperature = st.cfg.summary_backend.temperature;
        pairs = build_summary_prefs(corpus, split, scorer, *summary_backend, *recinfo_backend,
                                    templates, pcfg);
    } else if (st.kind == "recinfo") {
        pcfg.candidates = st.cfg.j_candidates;
        pcfg.temperature = st.cfg.recinfo_backend.temperature;
        pairs = build_recinfo_prefs(corpus, split, scorer, *summary_backend, *recinfo_backend,
                                    templates, pcfg);
    } else {
        throw ConfigError("--kind must be summary or recinfo");
    }

    std::string name = "prefs_" + st.kind + ".jsonl";
    std::size_t written = export_jsonl(pairs, out_path(st.cfg, name), !st.no_meta);
    std::string stub_name = "dpo_trainer_" + st.kind + ".json";
    write_file(out_path(st.cfg, stub_name), trainer_stub_json(st.cfg.profile, st.kind));

    write_manifest("build-prefs", st.cfg,
                   ManifestInputs{{st.cfg.corpus_path, st.cfg.scorer.model_path},
                                  {name, stub_name},
                                  {{"pairs", std::to_string(written)}, {"kind", st.kind}}});
    std::cout << "wrote " << out_path(st.cfg, name) << " (" << written << " pairs)\n";
    return 0;
}

int cmd_dpo_check(CliState& st) {
    using namespace prefrec::dpo;
    bool ok = true;

    // Exactness on the identity quad and the worked example.
    LogProbQuad same{-1.0, -2.0, -1.0, -2.0};
    double identity = dpo_loss(same, st.beta);
    bool identity_ok = std::abs(identity - std::log(2.0)) < 1e-12;
    ok &= identity_ok;
    printf("[%s] identity quad loss = ln 2 (got %.12f)\n", identity_ok ? "PASS" : "FAIL", identity);

    LogProbQuad worked{-1.0, -3.0, -2.0, -2.0};
    double wl = dpo_loss(worked, 0.1);
    bool worked_ok = std::abs(wl - 0.598139) < 1e-6;
    ok &= worked_ok;
    printf("[%s] worked example loss 0.598139 (got %.6f)\n", worked_ok ? "PASS" : "FAIL", wl);

    // Gradient vs central finite differences.
    DetRng rng(stage_seed(st.cfg.root_seed, "dpo-check"));
    const double betas[] = {0.01, 0.06109, 0.1, 0.1768};
    double max_rel = 0.0;
    for (int i = 0; i < 1000; ++i) {
        LogProbQuad q{rng.uniform(-5, 0), rng.uniform(-5, 0), rng.uniform(-5, 0),
                      rng.uniform(-5, 0)};
        double beta = betas[i % 4];
        Grad g = dpo_grad(q, beta);
        const double eps = 1e-6;
        LogProbQuad up = q, dn = q;
        up.policy_chosen += eps;
        dn.policy_chosen -= eps;
        double fd = (dpo_loss(up, beta) - dpo_loss(dn, beta)) / (2 * eps);
        max_rel = std::max(max_rel, std::abs(g.d_policy_chosen - fd) / std::max(std::abs(fd), 1e-12));
    }
    bool grad_ok = max_rel < 1e-5;
    ok &= grad_ok;
    printf("[%s] gradient check, max rel err %.2e\n", grad_ok ? "PASS" : "FAIL", max_rel);

    // Toy training, either on canned tokens or on mapped pairs from a JSONL.
    std::vector<TokenPair> pairs;
    if (!st.pairs_path.empty()) {
        std::size_t skipped = 0;
        for (const auto& p : import_jsonl(st.pairs_path)) {
            auto to_tokens = [](const std::string& text) {
                std::vector<std::size_t> toks(8);
                std::uint64_t h = fnv1a64(text);
                for (std::size_t pos = 0; pos < 8; ++pos) toks[pos] = (h >> (4 * pos)) & 0xF;
                return toks;
            };
            TokenPair tp{to_tokens(p.chosen), to_tokens(p.rejected)};
            if (tp.chosen == tp.rejected) {
                ++skipped;
                continue;
            }
            pairs.push_back(std::move(tp));
        }
        printf("mapped %zu pairs from %s (%zu hash-collided, skipped)\n", pairs.size(),
               st.pairs_path.c_str(), skipped);
    }
    if (pairs.empty()) pairs.push_back(TokenPair{{0, 1, 2, 3, 0, 1, 2, 3}, {4, 5, 6, 7, 4, 5, 6, 7}});

    ToyPolicy policy(16, 8);
    auto curve = toy_dpo_train(policy, pairs, st.beta, st.lr, st.steps);
    bool monotone = true;
    for (std::size_t i = 1; i < curve.size(); ++i) monotone &= curve[i].loss <= curve[i - 1].loss + 1e-12;
    bool train_ok = monotone && curve.back().loss < std::log(2.0) && curve.back().margin > 0.0;
    ok &= train_ok;
    printf("[%s] toy training: %d steps, loss %.6f -> %.6f, final margin %.6f\n",
           train_ok ? "PASS" : "FAIL", st.steps, curve.front().loss, curve.back().loss,
           curve.back().margin);

    std::vector<std::string> outputs;
    if (!st.curve_name.empty()) {
        std::string path = out_path(st.cfg, st.curve_name);
        write_file(path, curve_to_csv(curve));
        printf("wrote %s\n", path.c_str());
        outputs.push_back(st.curve_name);
    }
    write_manifest("dpo-check", st.cfg,
                   ManifestInputs{{st.pairs_path}, outputs,
                                  {{"beta", std::to_string(st.beta)},
                                   {"steps", std::to_string(st.steps)},
                                   {"result", ok ? "pass" : "fail"}}});
    if (!ok) throw NumericalError("dpo-check failed");
    return 0;
}

int cmd_evaluate(CliState& st) {
    Corpus corpus = stage_corpus(st.cfg);
    TemplateSet templates = stage_templates(st.cfg);
    ScorerModel model;
    ScoreFn scorer = stage_scorer(st.cfg, &model);
    if (st.cfg.scorer.kind == "native") check_feature_cfg_gate(st.cfg, model);

    if (st.cfg.variant == Variant::Baseline && st.recinfo_backend_explicit)
        std::cerr << "warning: variant=baseline ignores the configured rec-info backend\n";

    auto summary_backend = make_backend(st.cfg.summary_backend, "summary", st.cfg.variant);
    std::unique_ptr<Backend> recinfo_backend;
    if (variant_uses_recinfo(st.cfg.variant))
        recinfo_backend = make_backend(st.cfg.recinfo_backend, "recinfo", st.cfg.variant);

    Pipeline pipeline =
        make_pipeline(st.cfg, templates, *summary_backend, recinfo_backend.get(), scorer);
    EvalReport report = evaluate(corpus, parse_split(st.eval_split), pipeline, st.cfg.ks);

    write_file(out_path(st.cfg, "report.json"), report_to_json(report));
    std::string table = render_report_table(report);
    write_file(out_path(st.cfg, "report.txt"), table);
    write_manifest("evaluate", st.cfg,
                   ManifestInputs{{st.cfg.corpus_path, st.cfg.scorer.model_path},
                                  {"report.json", "report.txt"},
                                  {{"split", st.eval_split},
                                   {"turns", std::to_string(report.turns.size())}}});
    std::cout << table;
    return 0;
}

int cmd_metrics(CliState& st) {
    if (st.texts_path.empty()) throw ConfigError("metrics needs --texts");
    std::vector<std::string> texts;
    std::vector<std::string> item_ids;
    std::size_t line_no = 0;
    for (const auto& line : split_lines(read_file(st.texts_path))) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError("metrics input line " + std::to_string(line_no) + ": " + e.what());
        }
        bool found = false;
        for (const char* key : {"text", "summary", "rec_info"}) {
            if (j.contains(key)) {
                texts.push_back(j.at(key).get<std::string>());
                found = true;
                break;
            }
        }
        if (!found)
            throw ParseError("metrics input line " + std::to_string(line_no) +
                             " has no text/summary/rec_info key");
        item_ids.push_back(j.contains("item_id") ? j.at("item_id").get<std::string>() : "");
    }
    if (texts.empty()) throw DomainError("no texts found in " + st.texts_path);

    std::optional<std::vector<std::string>> refs;
    if (!st.refs_path.empty()) {
        std::vector<std::string> r;
        std::size_t ref_line = 0;
        for (const auto& line : split_lines(read_file(st.refs_path))) {
            ++ref_line;
            if (trim(line).empty()) continue;
            try {
                json j = json::parse(line);
                r.push_back(j.contains("text") ? j.at("text").get<std::string>()
                                               : j.at("description").get<std::string>());
            } catch (const json::exception& e) {
                throw ParseError("refs line " + std::to_string(ref_line) + ": " + e.what());
            }
        }
        if (r.size() != texts.size())
            throw DomainError("references do not align with texts (" + std::to_string(r.size()) +
                              " vs " + std::to_string(texts.size()) + ")");
        refs = std::move(r);
    } else if (!st.cfg.corpus_path.empty()) {
        // References = original item descriptions, matched by item_id.
        Corpus corpus = stage_corpus(st.cfg);
        std::vector<std::string> r;
        bool all_found = true;
        for (const auto& id : item_ids) {
            if (id.empty() || !corpus.items.count(id)) {
                all_found = false;
                break;
            }
            r.push_back(corpus.items.at(id).description);
        }
        if (all_found && r.size() == texts.size()) refs = std::move(r);
    }

    TokenizerConfig tok;
    tok.mode = tokenizer_mode_from_string(effective_tokenizer(st.cfg));
    MetricReport report = compute_metrics(texts, refs, tok);
    write_file(out_path(st.cfg, "metrics.json"), metric_report_to_json(report));
    std::string table = render_metrics_table(report, to_string(st.cfg.variant));
    write_file(out_path(st.cfg, "metrics.txt"), table);
    write_manifest("metrics", st.cfg,
                   ManifestInputs{{st.texts_path}, {"metrics.json", "metrics.txt"}, {}});
    std::cout << table;
    return 0;
}

void add_common_options(CLI::App* sub, CliState& st) {
    sub->add_option("--config", st.config_path,
                    "JSON config file (parsed before flags; flags override)");
    sub->add_option("--corpus", st.cfg.corpus_path, "corpus JSON path");
    sub->add_option("--format", st.cfg.corpus_format, "corpus format: native|chatrec");
    sub->add_option("--profile", st.cfg.profile, "corpus profile: tabidachi|chatrec|synthetic");
    sub->add_option("--templates-dir", st.cfg.templates_dir, "prompt template override directory");
    sub->add_option("--out", st.cfg.out_dir, "output directory");
    sub->add_option("--seed", st.cfg.root_seed, "root seed (fanned out per stage)");
    sub->add_option("--jobs", st.cfg.jobs, "parallelism bound (0 = default)");
    sub->add_option("--variant", st.variant_str,
                    "pipeline variant: baseline|sumrec|ours|wo-sum-dpo|wo-rec-dpo");
    sub->add_option("--backend", st.cfg.summary_backend.kind, "summary backend kind: mock|remote");
    sub->add_option("--backend-url", st.cfg.summary_backend.url, "summary backend endpoint");
    sub->add_option("--backend-model", st.cfg.summary_backend.model, "summary backend model name");
    sub->add_option("--temperature", st.cfg.summary_backend.temperature,
                    "candidate sampling temperature");
    auto* rk = sub->add_option("--recinfo-backend", st.cfg.recinfo_backend.kind,
                               "rec-info backend kind: mock|remote");
    auto* ru = sub->add_option("--recinfo-backend-url", st.cfg.recinfo_backend.url,
                               "rec-info endpoint");
    auto* rm = sub->add_option("--recinfo-backend-model", st.cfg.recinfo_backend.model,
                               "rec-info backend model name");
    auto mark_explicit = [&st](const std::string&) { st.recinfo_backend_explicit = true; };
    rk->each(mark_explicit);
    ru->each(mark_explicit);
    rm->each(mark_explicit);
    sub->add_option("--marker", st.cfg.summary_backend.extra_markers,
                    "extra preference marker for the mock lexicon (repeatable)");
    sub->add_option("--scorer", st.cfg.scorer.kind, "scorer kind: native|remote");
    sub->add_option("--scorer-url", st.cfg.scorer.url, "remote scorer endpoint");
    sub->add_option("--model", st.cfg.scorer.model_path, "scorer model path");
    sub->add_option("--hash-dim", st.cfg.scorer.features.hash_dim_log2,
                    "feature hash dimension (log2)");
    sub->add_option("--lr", st.cfg.scorer.hyper.lr, "scorer learning rate")
        ->group("train-scorer");
    sub->add_option("--epochs", st.cfg.scorer.hyper.epochs, "scorer training epochs");
    sub->add_option("--batch-size", st.cfg.scorer.hyper.batch_size, "scorer batch size");
    sub->add_option("--l2", st.cfg.scorer.hyper.l2, "scorer L2 regularization");
    sub->add_option("--k", st.cfg.k_candidates, "summary candidates per turn (K)");
    sub->add_option("--j", st.cfg.j_candidates, "rec-info candidates per item (J)");
    sub->add_option("--chunk-size", st.cfg.chunk_size, "utterances per summarization chunk");
    sub->add_option("--ks", st.cfg.ks, "rank cutoffs")->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
    CliState st;

    // The config file seeds the defaults; flags parsed afterwards override.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                st.cfg = config_from_json_file(argv[i + 1]);
            } catch (const std::exception& e) {
                std::cerr << json{{"error", {{"type", error_type(e)}, {"message", e.what()}}}}.dump()
                          << "\n";
                return 1;
            }
        }
    }
    st.variant_str = to_string(st.cfg.variant);

    CLI::App app{"prefrec: preference-optimized conversational recommendation toolkit"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark corpus");
    add_common_options(synth, st);
    synth->add_option("--dialogues", st.synth_dialogues, "number of dialogues");
    synth->add_option("--turns-per-dialogue", st.synth_turns, "turns per dialogue");
    synth->add_option("--candidates", st.synth_candidates, "candidate items per turn");

    auto* ingest = app.add_subcommand("ingest", "validate, binarize, and split a corpus");
    add_common_options(ingest, st);
    ingest->add_option("--split-ratios", st.split_ratios, "train,val,test fractions")
        ->delimiter(',');

    auto* summarize = app.add_subcommand("summarize", "chunked dialogue summarization");
    add_common_options(summarize, st);
    summarize->add_option("--split", st.summarize_split, "train|val|test|all");

    auto* recinfo = app.add_subcommand("recinfo", "generate item recommendation information");
    add_common_options(recinfo, st);

    auto* train = app.add_subcommand("train-scorer", "train the native score predictor");
    add_common_options(train, st);

    auto* score = app.add_subcommand("score", "score (summary, rec_info, description) triples");
    add_common_options(score, st);
    score->add_option("--summary", st.score_summary, "summary text");
    score->add_option("--rec-info", st.score_recinfo, "rec-info text");
    score->add_option("--description", st.score_description, "item description text");
    score->add_option("--input", st.score_input, "JSONL of triples to score");

    auto* prefs = app.add_subcommand("build-prefs", "construct DPO preference pairs");
    add_common_options(prefs, st);
    prefs->add_option("--kind", st.kind, "summary|recinfo");
    prefs->add_option("--split", st.prefs_split, "corpus split to build from");
    prefs->add_flag("--no-meta", st.no_meta, "omit meta from the exported JSONL");

    auto* dpo_check = app.add_subcommand("dpo-check", "verify the DPO loss/gradient machinery");
    add_common_options(dpo_check, st);
    dpo_check->add_option("--beta", st.beta, "DPO temperature parameter");
    dpo_check->add_option("--dpo-lr", st.lr, "toy policy learning rate");
    dpo_check->add_option("--steps", st.steps, "toy training steps");
    dpo_check->add_option("--pairs", st.pairs_path, "preference JSONL to map onto the toy policy");
    dpo_check->add_option("--curve", st.curve_name, "CSV filename for the training curve");

    auto* eval_cmd = app.add_subcommand("evaluate", "rank candidates and report HR/MRR");
    add_common_options(eval_cmd, st);
    eval_cmd->add_option("--split", st.eval_split, "corpus split to evaluate");

    auto* metrics = app.add_subcommand("metrics", "text statistics (length, distinct-n, BLEU, ROUGE-L)");
    add_common_options(metrics, st);
    metrics->add_option("--texts", st.texts_path, "JSONL of generated texts");
    metrics->add_option("--refs", st.refs_path, "JSONL of aligned references");
    metrics->add_option("--tokenizer", st.cfg.tokenizer, "char|word");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        st.cfg.variant = variant_from_string(st.variant_str);
        apply_jobs(st.cfg);
        if (synth->parsed()) return cmd_synth(st);
        if (ingest->parsed()) return cmd_ingest(st);
        if (summarize->parsed()) return cmd_summarize(st);
        if (recinfo->parsed()) return cmd_recinfo(st);
        if (train->parsed()) return cmd_train_scorer(st);
        if (score->parsed()) return cmd_score(st);
        if (prefs->parsed()) return cmd_build_prefs(st);
        if (dpo_check->parsed()) return cmd_dpo_check(st);
        if (eval_cmd->parsed()) return cmd_evaluate(st);
        if (metrics->parsed()) return cmd_metrics(st);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\nRun 'prefrec <subcommand> --help'.\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"type", error_type(e)}, {"message", e.what()}}}}.dump()
                  << "\n";
        return 1;
    }
    return 0;
}
