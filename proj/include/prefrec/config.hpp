#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "prefrec/backend.hpp"
#include "prefrec/eval.hpp"
#include "prefrec/scorer.hpp"

namespace prefrec {

struct BackendSpec {
    std::string kind = "mock";  // mock | remote
    std::string url;
    std::string model;
    std::string id;  // provenance label; defaulted per role/variant when empty
    double temperature = 0.8;
    int max_tokens = 512;
    int attempts = 3;
    int backoff_ms = 250;
    std::vector<std::string> extra_markers;  // mock preference lexicon additions
};

struct ScorerSpec {
    std::string kind = "native";  // native | remote
    std::string model_path;
    std::string url;
    FeatureConfig features;
    TrainHyper hyper{0.05, 20, 32, 0, 0.0};
};

// One resolved run. All randomness fans out from root_seed by stage name.
struct RunConfig {
    std::string corpus_path;
    std::string corpus_format = "native";  // native | chatrec
    std::string profile = "tabidachi";     // tabidachi | chatrec | synthetic
    std::string templates_dir;             // optional override directory
    BackendSpec summary_backend;
    BackendSpec recinfo_backend;
    ScorerSpec scorer;
    int k_candidates = 4;
    int j_candidates = 4;
    std::size_t chunk_size = 0;  // 0 = auto: 30, but whole-dialogue for chatrec
    std::uint64_t root_seed = 7;
    std::vector<int> ks = {1, 3, 5};
    Variant variant = Variant::Ours;
    std::string tokenizer;  // metric tokenizer; empty = auto per profile
    std::string out_dir = "out";
    int jobs = 0;  // 0 = library default
};

// chunk_size 0 resolves to 30 utterances, except the chatrec profile, whose
// prompt takes the whole dialogue in a single pass.
std::size_t effective_chunk_size(const RunConfig& cfg);

// Empty tokenizer resolves to char for the CJK-dominant profiles (tabidachi,
// chatrec) and word otherwise.
std::string effective_tokenizer(const RunConfig& cfg);

// Parses a JSON config file into a RunConfig (missing fields keep their
// defaults). Flags override afterwards in the CLI layer.
RunConfig config_from_json_file(const std::string& path);
RunConfig config_from_json(const std::string& text);

// Canonical JSON echo of a resolved config; hashing this pins a run.
std::string config_to_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

// Builds the generation backend for one role ("summary" or "recinfo").
// Mock ids default to a variant-dependent label so ablation manifests and
// provenance stay distinguishable.
std::unique_ptr<Backend> make_backend(const BackendSpec& spec, const std::string& role,
                                      Variant variant);

// {config_hash, root_seed, inputs: {path: sha256}, outputs: [...]} plus the
// echoed config. No timestamps; manifests are byte-stable across runs.
struct ManifestInputs {
    std::vector<std::string> input_paths;
    std::vector<std::string> output_names;
    std::map<std::string, std::string> extra;  // stage-specific fields
};

std::string manifest_json(const std::string& stage, const RunConfig& cfg,
                          const ManifestInputs& inputs);

// Writes "<stage>_manifest.json" under cfg.out_dir and returns the path.
std::string write_manifest(const std::string& stage, const RunConfig& cfg,
                           const ManifestInputs& inputs);

// DPO trainer hyperparameter stub for external preference training, keyed by
// corpus profile and pair kind. Mirrors the shipped default configs.
std::string trainer_stub_json(const std::string& profile, const std::string& kind);

}  // namespace prefrec
