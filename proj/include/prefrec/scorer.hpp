#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace prefrec {

// Scorer input triple. rec_info is genuinely absent (not empty) in the
// Baseline configuration, which keeps the ablations apart in feature space.
struct ScoreInput {
    std::string summary;
    std::optional<std::string> rec_info;
    std::string description;
};

struct FeatureConfig {
    int hash_dim_log2 = 18;  // weights span 2^h buckets
    int ngram_min = 2;       // char n-gram range over Unicode code points
    int ngram_max = 3;
    bool word_ngrams = true;  // whitespace word unigrams in addition

    bool operator==(const FeatureConfig&) const = default;
};

std::string feature_cfg_hash(const FeatureConfig& cfg);

// index -> count, sorted by index.
using SparseVec = std::vector<std::pair<std::uint32_t, double>>;

// Character n-grams and optional word unigrams, each prefixed by its field
// tag ("S:", "R:", "D:") before hashing, so identical text in different
// fields lands in different buckets. Absent rec_info contributes nothing.
SparseVec featurize(const ScoreInput& input, const FeatureConfig& cfg);

struct ScorerModel {
    FeatureConfig cfg;
    std::vector<double> weights;  // size 2^hash_dim_log2
    double bias = 0.0;

    ScorerModel() : ScorerModel(FeatureConfig{}) {}
    explicit ScorerModel(const FeatureConfig& c)
        : cfg(c), weights(std::size_t(1) << c.hash_dim_log2, 0.0) {}
};

// sigmoid(weights . featurize(input) + bias); strictly inside (0,1).
double predict_score(const ScorerModel& model, const ScoreInput& input);

struct ScoredExample {
    ScoreInput input;
    int target = 0;  // y in {0,1}
};

struct TrainHyper {
    double lr = 0.1;
    int epochs = 10;
    int batch_size = 32;
    std::uint64_t seed = 0;
    double l2 = 0.0;
};

struct EpochStats {
    double train_mse = 0.0;
    double val_mse = 0.0;  // NaN when no validation set was given
};

struct TrainResult {
    ScorerModel model;
    std::vector<EpochStats> history;  // one entry per epoch
};

// Full-dataset mean squared error of the model on featurized examples.
double mse(const ScorerModel& model, const std::vector<ScoredExample>& examples);

// Full-batch MSE loss (without L2) and its gradient; the same math the
// trainer applies per mini-batch. Exposed so the gradient can be checked
// against finite differences.
struct LossGrad {
    double loss = 0.0;
    std::vector<double> d_weights;
    double d_bias = 0.0;
};
LossGrad mse_loss_and_grad(const ScorerModel& model, const std::vector<ScoredExample>& examples);

// Mini-batch gradient descent on MSE with L2, shuffled per epoch by seed.
// Returns the epoch snapshot with the lowest validation MSE (train MSE when
// val is empty); deterministic for a fixed seed.
TrainResult train_scorer(const std::vector<ScoredExample>& train,
                         const std::vector<ScoredExample>& val, const FeatureConfig& cfg,
                         const TrainHyper& hyper);

// Row-major K x M score matrix: entry (k, m) = predict_score on
// (summaries[k], rec_infos[m], descriptions[m]).
struct ScoreMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    double at(std::size_t k, std::size_t m) const { return values[k * cols + m]; }
};

// OpenMP-parallel over cells; bit-identical to score_matrix_serial, which is
// kept as the reference implementation for tests and benchmarks.
ScoreMatrix score_matrix(const std::vector<std::string>& summaries,
                         const std::vector<std::string>& rec_infos,
                         const std::vector<std::string>& descriptions, const ScorerModel& model);
ScoreMatrix score_matrix_serial(const std::vector<std::string>& summaries,
                                const std::vector<std::string>& rec_infos,
                                const std::vector<std::string>& descriptions,
                                const ScorerModel& model);

// Versioned JSON container; round-trips predictions bit-exactly.
void save_model(const ScorerModel& model, const std::string& path);
ScorerModel load_model(const std::string& path);
std::string model_to_json(const ScorerModel& model);
ScorerModel model_from_json(const std::string& text);

struct RemoteScorerConfig {
    std::string url;  // full endpoint
    int attempts = 3;
    int backoff_ms = 250;
    std::string api_key_env = "PREFREC_API_KEY";
};

// POSTs {"summary","rec_info","description"} and reads {"score": number}.
// Scores are clamped to [0,1]; replies outside [-10,10] are a protocol
// violation.
double remote_score(const RemoteScorerConfig& cfg, const ScoreInput& input);

// Uniform scoring interface for the evaluation pipeline.
using ScoreFn = std::function<double(const ScoreInput&)>;

ScoreFn make_native_scorer(ScorerModel model);
ScoreFn make_remote_scorer(RemoteScorerConfig cfg);

}  // namespace prefrec
