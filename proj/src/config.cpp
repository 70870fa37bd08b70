#include "prefrec/config.hpp"

#include <filesystem>

#include "json.hpp"
#include "prefrec/errors.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

using nlohmann::json;

namespace {

json backend_spec_to_json(const BackendSpec& s) {
    return json{{"kind", s.kind},
                {"url", s.url},
                {"model", s.model},
                {"id", s.id},
                {"temperature", s.temperature},
                {"max_tokens", s.max_tokens},
                {"attempts", s.attempts},
                {"backoff_ms", s.backoff_ms},
                {"extra_markers", s.extra_markers}};
}

void backend_spec_from_json(const json& j, BackendSpec& s) {
    if (j.contains("kind")) s.kind = j.at("kind").get<std::string>();
    if (j.contains("url")) s.url = j.at("url").get<std::string>();
    if (j.contains("model")) s.model = j.at("model").get<std::string>();
    if (j.contains("id")) s.id = j.at("id").get<std::string>();
    if (j.contains("temperature")) s.temperature = j.at("temperature").get<double>();
    if (j.contains("max_tokens")) s.max_tokens = j.at("max_tokens").get<int>();
    if (j.contains("attempts")) s.attempts = j.at("attempts").get<int>();
    if (j.contains("backoff_ms")) s.backoff_ms = j.at("backoff_ms").get<int>();
    if (j.contains("extra_markers"))
        s.extra_markers = j.at("extra_markers").get<std::vector<std::string>>();
}

json scorer_spec_to_json(const ScorerSpec& s) {
    return json{{"kind", s.kind},
                {"model_path", s.model_path},
                {"url", s.url},
                {"features",
                 {{"hash_dim_log2", s.features.hash_dim_log2},
                  {"ngram_min", s.features.ngram_min},
                  {"ngram_max", s.features.ngram_max},
                  {"word_ngrams", s.features.word_ngrams}}},
                {"hyper",
                 {{"lr", s.hyper.lr},
                  {"epochs", s.hyper.epochs},
                  {"batch_size", s.hyper.batch_size},
                  {"seed", s.hyper.seed},
                  {"l2", s.hyper.l2}}}};
}

void scorer_spec_from_json(const json& j, ScorerSpec& s) {
    if (j.contains("kind")) s.kind = j.at("kind").get<std::string>();
    if (j.contains("model_path")) s.model_path = j.at("model_path").get<std::string>();
    if (j.contains("url")) s.url = j.at("url").get<std::string>();
    if (j.contains("features")) {
        const json& f = j.at("features");
        if (f.contains("hash_dim_log2")) s.features.hash_dim_log2 = f.at("hash_dim_log2").get<int>();
        if (f.contains("ngram_min")) s.features.ngram_min = f.at("ngram_min").get<int>();
        if (f.contains("ngram_max")) s.features.ngram_max = f.at("ngram_max").get<int>();
        if (f.contains("word_ngrams")) s.features.word_ngrams = f.at("word_ngrams").get<bool>();
    }
    if (j.contains("hyper")) {
        const json& h = j.at("hyper");
        if (h.contains("lr")) s.hyper.lr = h.at("lr").get<double>();
        if (h.contains("epochs")) s.hyper.epochs = h.at("epochs").get<int>();
        if (h.contains("batch_size")) s.hyper.batch_size = h.at("batch_size").get<int>();
        if (h.contains("seed")) s.hyper.seed = h.at("seed").get<std::uint64_t>();
        if (h.contains("l2")) s.hyper.l2 = h.at("l2").get<double>();
    }
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        if (j.contains("corpus_path")) cfg.corpus_path = j.at("corpus_path").get<std::string>();
        if (j.contains("corpus_format"))
            cfg.corpus_format = j.at("corpus_format").get<std::string>();
        if (j.contains("profile")) cfg.profile = j.at("profile").get<std::string>();
        if (j.contains("templates_dir")) cfg.templates_dir = j.at("templates_dir").get<std::string>();
        if (j.contains("summary_backend"))
            backend_spec_from_json(j.at("summary_backend"), cfg.summary_backend);
        if (j.contains("recinfo_backend"))
            backend_spec_from_json(j.at("recinfo_backend"), cfg.recinfo_backend);
        if (j.contains("scorer")) scorer_spec_from_json(j.at("scorer"), cfg.scorer);
        if (j.contains("k")) cfg.k_candidates = j.at("k").get<int>();
        if (j.contains("j")) cfg.j_candidates = j.at("j").get<int>();
        if (j.contains("chunk_size")) cfg.chunk_size = j.at("chunk_size").get<std::size_t>();
        if (j.contains("root_seed")) cfg.root_seed = j.at("root_seed").get<std::uint64_t>();
        if (j.contains("ks")) cfg.ks = j.at("ks").get<std::vector<int>>();
        if (j.contains("variant")) cfg.variant = variant_from_string(j.at("variant").get<std::string>());
        if (j.contains("tokenizer")) cfg.tokenizer = j.at("tokenizer").get<std::string>();
        if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field: ") + e.what());
    }
    return cfg;
}

RunConfig config_from_json_file(const std::string& path) {
    return config_from_json(read_file(path));
}

std::string config_to_json(const RunConfig& cfg) {
    json j;
    j["corpus_path"] = cfg.corpus_path;
    j["corpus_format"] = cfg.corpus_format;
    j["profile"] = cfg.profile;
    j["templates_dir"] = cfg.templates_dir;
    j["summary_backend"] = backend_spec_to_json(cfg.summary_backend);
    j["recinfo_backend"] = backend_spec_to_json(cfg.recinfo_backend);
    j["scorer"] = scorer_spec_to_json(cfg.scorer);
    j["k"] = cfg.k_candidates;
    j["j"] = cfg.j_candidates;
    j["chunk_size"] = cfg.chunk_size;
    j["root_seed"] = cfg.root_seed;
    j["ks"] = cfg.ks;
    j["variant"] = to_string(cfg.variant);
    j["tokenizer"] = cfg.tokenizer;
    j["out_dir"] = cfg.out_dir;
    j["jobs"] = cfg.jobs;
    return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
    return sha256_hex(config_to_json(cfg));
}

std::size_t effective_chunk_size(const RunConfig& cfg) {
    if (cfg.chunk_size > 0) return cfg.chunk_size;
    if (cfg.profile == "chatrec") return 1000000;  // whole dialogue, one chunk
    return 30;
}

std::string effective_tokenizer(const RunConfig& cfg) {
    if (!cfg.tokenizer.empty()) return cfg.tokenizer;
    return (cfg.profile == "tabidachi" || cfg.profile == "chatrec") ? "char" : "word";
}

std::unique_ptr<Backend> make_backend(const BackendSpec& spec, const std::string& role,
                                      Variant variant) {
    if (spec.kind == "mock") {
        std::string id = spec.id;
        if (id.empty()) {
            bool dpo = role == "summary"
                           ? (variant == Variant::Ours || variant == Variant::WithoutRecDPO)
                           : (variant == Variant::Ours || variant == Variant::WithoutSumDPO);
            id = "mock:" + role + (dpo ? "-dpo" : "-base");
        }
        return std::make_unique<MockExtractiveBackend>(id, spec.extra_markers);
    }
    if (spec.kind == "remote") {
        RemoteBackendConfig cfg;
        cfg.url = spec.url;
        cfg.model = spec.model;
        cfg.id = spec.id;
        cfg.attempts = spec.attempts;
        cfg.backoff_ms = spec.backoff_ms;
        return std::make_unique<RemoteBackend>(cfg);
    }
    throw ConfigError("unknown backend kind: " + spec.kind);
}

std::string manifest_json(const std::string& stage, const RunConfig& cfg,
                          const ManifestInputs& inputs) {
    json j;
    j["stage"] = stage;
    j["config"] = json::parse(config_to_json(cfg));
    j["config_hash"] = config_hash(cfg);
    j["root_seed"] = cfg.root_seed;
    j["inputs"] = json::object();
    for (const auto& path : inputs.input_paths)
        if (!path.empty()) j["inputs"][path] = sha256_file_hex(path);
    j["outputs"] = inputs.output_names;
    for (const auto& [k, v] : inputs.extra) j[k] = v;
    return j.dump(2) + "\n";
}

std::string write_manifest(const std::string& stage, const RunConfig& cfg,
                           const ManifestInputs& inputs) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    std::string path = (fs::path(cfg.out_dir) / (stage + "_manifest.json")).string();
    write_file(path, manifest_json(stage, cfg, inputs));
    return path;
}

std::string trainer_stub_json(const std::string& profile, const std::string& kind) {
    // Shipped DPO fine-tuning defaults per corpus profile and pair kind, for
    // the external trainer consuming the exported JSONL.
    struct Stub {
        double lr;
        int batch_size;
        double beta;
    };
    Stub stub;
    bool summary = kind == "summary";
    if (profile == "chatrec") {
        stub = summary ? Stub{6.4087e-7, 8, 0.1253} : Stub{1.7718e-7, 8, 0.03949};
    } else {  // tabidachi and the synthetic profile modeled on it
        stub = summary ? Stub{1.1593e-7, 12, 0.1768} : Stub{8.7340e-6, 16, 0.06109};
    }
    json j;
    j["beta"] = stub.beta;
    j["learning_rate"] = stub.lr;
    j["per_device_train_batch_size"] = stub.batch_size;
    j["num_train_epochs"] = 1;
    j["optimizer"] = {{"name", "adamw"}, {"beta1", 0.9},          {"beta2", 0.999},
                      {"epsilon", 1e-8}, {"weight_decay", 0.0}};
    j["max_grad_norm"] = 1.0;
    j["gradient_checkpointing"] = true;
    j["bf16"] = true;
    j["disable_dropout"] = true;
    j["dataset_format"] = {{"keys", {"prompt", "chosen", "rejected"}}, {"encoding", "jsonl"}};
    return j.dump(2) + "\n";
}

}  // namespace prefrec
