#include "prefrec/scorer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "prefrec/errors.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

using nlohmann::json;

namespace {

json feature_cfg_to_json(const FeatureConfig& cfg) {
    return json{{"hash_dim_log2", cfg.hash_dim_log2},
                {"ngram_min", cfg.ngram_min},
                {"ngram_max", cfg.ngram_max},
                {"word_ngrams", cfg.word_ngrams}};
}

FeatureConfig feature_cfg_from_json(const json& j) {
    FeatureConfig cfg;
    cfg.hash_dim_log2 = j.at("hash_dim_log2").get<int>();
    cfg.ngram_min = j.at("ngram_min").get<int>();
    cfg.ngram_max = j.at("ngram_max").get<int>();
    cfg.word_ngrams = j.at("word_ngrams").get<bool>();
    return cfg;
}

void validate_feature_cfg(const FeatureConfig& cfg) {
    if (cfg.hash_dim_log2 < 1 || cfg.hash_dim_log2 > 26)
        throw DomainError("hash_dim_log2 must be in 1..26");
    if (cfg.ngram_min < 1 || cfg.ngram_max < cfg.ngram_min)
        throw DomainError("invalid char n-gram range");
}

void validate_input(const ScoreInput& input) {
    if (input.summary.empty()) throw DomainError("score input: empty summary");
    if (input.description.empty()) throw DomainError("score input: empty description");
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_update(std::uint64_t h, std::string_view bytes) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

// Code-point boundaries of a UTF-8 string (byte offsets, ending sentinel
// included). Validity was already checked at corpus load; lenient here.
std::vector<std::size_t> cp_boundaries(std::string_view s) {
    std::vector<std::size_t> b;
    b.reserve(s.size() + 1);
    for (std::size_t i = 0; i < s.size(); ++i)
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) b.push_back(i);
    b.push_back(s.size());
    return b;
}

void hash_field(const std::string& text, std::string_view tag, const FeatureConfig& cfg,
                std::map<std::uint32_t, double>& acc) {
    const std::uint32_t mask = (std::uint32_t(1) << cfg.hash_dim_log2) - 1;
    const std::uint64_t tag_state = fnv_update(kFnvOffset, tag);

    auto bounds = cp_boundaries(text);
    const std::size_t n_cp = bounds.size() - 1;
    for (int n = cfg.ngram_min; n <= cfg.ngram_max; ++n) {
        if (n_cp < static_cast<std::size_t>(n)) break;
        for (std::size_t i = 0; i + n <= n_cp; ++i) {
            std::string_view gram(text.data() + bounds[i], bounds[i + n] - bounds[i]);
            std::uint64_t h = fnv_update(tag_state, gram);
            acc[static_cast<std::uint32_t>(h) & mask] += 1.0;
        }
    }
    if (cfg.word_ngrams) {
        const std::uint64_t word_state = fnv_update(tag_state, "w:");
        for (const auto& word : split_whitespace(text)) {
            std::uint64_t h = fnv_update(word_state, word);
            acc[static_cast<std::uint32_t>(h) & mask] += 1.0;
        }
    }
}

}  // namespace

std::string feature_cfg_hash(const FeatureConfig& cfg) {
    return to_hex(fnv1a64(feature_cfg_to_json(cfg).dump()));
}

SparseVec featurize(const ScoreInput& input, const FeatureConfig& cfg) {
    validate_feature_cfg(cfg);
    validate_input(input);
    std::map<std::uint32_t, double> acc;
    hash_field(input.summary, "S:", cfg, acc);
    if (input.rec_info) hash_field(*input.rec_info, "R:", cfg, acc);
    hash_field(input.description, "D:", cfg, acc);
    return SparseVec(acc.begin(), acc.end());
}

namespace {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double predict_featurized(const ScorerModel& model, const SparseVec& features) {
    double z = model.bias;
    for (const auto& [idx, count] : features) z += model.weights[idx] * count;
    if (!std::isfinite(z)) throw NumericalError("non-finite score pre-activation");
    // |z| <= 36 keeps sigmoid strictly inside (0,1) in double precision.
    return sigmoid(std::clamp(z, -36.0, 36.0));
}

}  // namespace

double predict_score(const ScorerModel& model, const ScoreInput& input) {
    if (model.weights.size() != std::size_t(1) << model.cfg.hash_dim_log2)
        throw DomainError("model weight vector does not match feature config");
    return predict_featurized(model, featurize(input, model.cfg));
}

double mse(const ScorerModel& model, const std::vector<ScoredExample>& examples) {
    if (examples.empty()) throw DomainError("mse over empty example set");
    double sum = 0.0;
    for (const auto& ex : examples) {
        double diff = predict_score(model, ex.input) - ex.target;
        sum += diff * diff;
    }
    return sum / static_cast<double>(examples.size());
}

LossGrad mse_loss_and_grad(const ScorerModel& model, const std::vector<ScoredExample>& examples) {
    if (examples.empty()) throw DomainError("gradient over empty example set");
    LossGrad out;
    out.d_weights.assign(model.weights.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(examples.size());
    for (const auto& ex : examples) {
        SparseVec feats = featurize(ex.input, model.cfg);
        double y_hat = predict_featurized(model, feats);
        double diff = y_hat - ex.target;
        out.loss += diff * diff * inv_n;
        // d/dz of (sigmoid(z) - y)^2 = 2 (y_hat - y) y_hat (1 - y_hat)
        double dz = 2.0 * diff * y_hat * (1.0 - y_hat) * inv_n;
        for (const auto& [idx, count] : feats) out.d_weights[idx] += dz * count;
        out.d_bias += dz;
    }
    return out;
}

TrainResult train_scorer(const std::vector<ScoredExample>& train,
                         const std::vector<ScoredExample>& val, const FeatureConfig& cfg,
                         const TrainHyper& hyper) {
    if (train.empty()) throw DomainError("empty training set");
    if (hyper.lr <= 0) throw DomainError("lr must be > 0");
    if (hyper.epochs < 1) throw DomainError("epochs must be >= 1");
    if (hyper.batch_size < 1) throw DomainError("batch_size must be >= 1");
    validate_feature_cfg(cfg);
    for (const auto& ex : train)
        if (ex.target != 0 && ex.target != 1) throw DomainError("target must be 0 or 1");

    // Features are deterministic; compute them once.
    std::vector<SparseVec> train_feats, val_feats;
    train_feats.reserve(train.size());
    for (const auto& ex : train) train_feats.push_back(featurize(ex.input, cfg));
    val_feats.reserve(val.size());
    for (const auto& ex : val) val_feats.push_back(featurize(ex.input, cfg));

    auto dataset_mse = [&](const ScorerModel& m, const std::vector<SparseVec>& feats,
                           const std::vector<ScoredExample>& exs) {
        double sum = 0.0;
        for (std::size_t i = 0; i < exs.size(); ++i) {
            double diff = predict_featurized(m, feats[i]) - exs[i].target;
            sum += diff * diff;
        }
        return sum / static_cast<double>(exs.size());
    };

    ScorerModel model(cfg);
    ScorerModel best = model;
    double best_sel = std::numeric_limits<double>::infinity();
    TrainResult result;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    DetRng rng(hyper.seed);

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(hyper.batch_size)) {
            std::size_t end =
                std::min(start + static_cast<std::size_t>(hyper.batch_size), order.size());
            const double inv_b = 1.0 / static_cast<double>(end - start);

            if (hyper.l2 > 0.0) {
                const double decay = 1.0 - 2.0 * hyper.lr * hyper.l2;
                for (double& w : model.weights) w *= decay;
            }
            // Accumulate sparse gradient for this batch, then apply.
            std::map<std::uint32_t, double> grad;
            double grad_bias = 0.0;
            for (std::size_t p = start; p < end; ++p) {
                const auto& feats = train_feats[order[p]];
                double y_hat = predict_featurized(model, feats);
                double diff = y_hat - train[order[p]].target;
                double dz = 2.0 * diff * y_hat * (1.0 - y_hat) * inv_b;
                for (const auto& [idx, count] : feats) grad[idx] += dz * count;
                grad_bias += dz;
            }
            for (const auto& [idx, g] : grad) model.weights[idx] -= hyper.lr * g;
            model.bias -= hyper.lr * grad_bias;
        }

        EpochStats stats;
        stats.train_mse = dataset_mse(model, train_feats, train);
        stats.val_mse = val.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : dataset_mse(model, val_feats, val);
        if (!std::isfinite(stats.train_mse) || (!val.empty() && !std::isfinite(stats.val_mse)))
            throw NumericalError("training diverged at epoch " + std::to_string(epoch));
        result.history.push_back(stats);

        double sel = val.empty() ? stats.train_mse : stats.val_mse;
        if (sel < best_sel) {
            best_sel = sel;
            best = model;
        }
    }
    result.model = std::move(best);
    return result;
}

namespace {

ScoreMatrix scored(const std::vector<std::string>& summaries,
                   const std::vector<std::string>& rec_infos,
                   const std::vector<std::string>& descriptions, const ScorerModel& model,
                   bool parallel) {
    if (summaries.empty()) throw DomainError("score_matrix: no summaries");
    if (descriptions.empty()) throw DomainError("score_matrix: no items");
    if (rec_infos.size() != descriptions.size())
        throw DomainError("score_matrix: rec_infos and descriptions must align");
    ScoreMatrix m;
    m.rows = summaries.size();
    m.cols = descriptions.size();
    m.values.assign(m.rows * m.cols, 0.0);
    const long long total = static_cast<long long>(m.rows * m.cols);

    std::exception_ptr error;
#pragma omp parallel for schedule(static) if (parallel)
    for (long long cell = 0; cell < total; ++cell) {
        try {
            auto k = static_cast<std::size_t>(cell) / m.cols;
            auto j = static_cast<std::size_t>(cell) % m.cols;
            ScoreInput input{summaries[k], rec_infos[j], descriptions[j]};
            m.values[static_cast<std::size_t>(cell)] = predict_score(model, input);
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    return m;
}

}  // namespace

ScoreMatrix score_matrix(const std::vector<std::string>& summaries,
                         const std::vector<std::string>& rec_infos,
                         const std::vector<std::string>& descriptions, const ScorerModel& model) {
    return scored(summaries, rec_infos, descriptions, model, true);
}

ScoreMatrix score_matrix_serial(const std::vector<std::string>& summaries,
                                const std::vector<std::string>& rec_infos,
                                const std::vector<std::string>& descriptions,
                                const ScorerModel& model) {
    return scored(summaries, rec_infos, descriptions, model, false);
}

std::string model_to_json(const ScorerModel& model) {
    json j;
    j["version"] = 1;
    j["feature_cfg"] = feature_cfg_to_json(model.cfg);
    j["feature_cfg_hash"] = feature_cfg_hash(model.cfg);
    j["bias"] = model.bias;
    j["weights"] = model.weights;
    return j.dump();
}

ScorerModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw FormatError("unsupported model version " + j.at("version").dump());
        ScorerModel model(feature_cfg_from_json(j.at("feature_cfg")));
        std::string stored_hash = j.at("feature_cfg_hash").get<std::string>();
        if (stored_hash != feature_cfg_hash(model.cfg))
            throw FormatError("feature_cfg hash mismatch (stored " + stored_hash + ")");
        model.bias = j.at("bias").get<double>();
        auto weights = j.at("weights").get<std::vector<double>>();
        if (weights.size() != model.weights.size())
            throw FormatError("weight count " + std::to_string(weights.size()) +
                              " does not match hash_dim_log2 " +
                              std::to_string(model.cfg.hash_dim_log2));
        model.weights = std::move(weights);
        for (double w : model.weights)
            if (!std::isfinite(w)) throw FormatError("non-finite weight in model file");
        return model;
    } catch (const json::exception& e) {
        throw FormatError(std::string("model file missing field: ") + e.what());
    }
}

void save_model(const ScorerModel& model, const std::string& path) {
    write_file(path, model_to_json(model));
}

ScorerModel load_model(const std::string& path) {
    return model_from_json(read_file(path));
}

double remote_score(const RemoteScorerConfig& cfg, const ScoreInput& input) {
    if (cfg.url.empty()) throw ConfigError("remote scorer requires a url");
    validate_input(input);

    json body;
    body["summary"] = input.summary;
    if (input.rec_info) body["rec_info"] = *input.rec_info;
    body["description"] = input.description;
    const std::string payload = body.dump();

    auto scheme_end = cfg.url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("scorer url missing scheme: " + cfg.url);
    auto path_start = cfg.url.find('/', scheme_end + 3);
    std::string base = path_start == std::string::npos ? cfg.url : cfg.url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : cfg.url.substr(path_start);

    httplib::Headers headers;
    if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error;
    for (int attempt = 0; attempt < std::max(1, cfg.attempts); ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(cfg.backoff_ms * (1LL << (attempt - 1))));
        httplib::Client client(base);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            double score;
            try {
                score = json::parse(res->body).at("score").get<double>();
            } catch (const json::exception& e) {
                throw ProtocolError(std::string("scorer reply missing numeric score: ") + e.what());
            }
            if (!std::isfinite(score) || score < -10.0 || score > 10.0)
                throw ProtocolError("scorer returned out-of-range score " + std::to_string(score));
            if (score < 0.0 || score > 1.0) {
                std::cerr << "warning: remote score " << score << " clamped to [0,1]\n";
                score = std::clamp(score, 0.0, 1.0);
            }
            return score;
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (res->status != 429 && (res->status < 500 || res->status >= 600)) break;
    }
    throw BackendError("remote scorer failed after retries: " + last_error);
}

ScoreFn make_native_scorer(ScorerModel model) {
    auto shared = std::make_shared<ScorerModel>(std::move(model));
    return [shared](const ScoreInput& input) { return predict_score(*shared, input); };
}

ScoreFn make_remote_scorer(RemoteScorerConfig cfg) {
    return [cfg = std::move(cfg)](const ScoreInput& input) { return remote_score(cfg, input); };
}

}  // namespace prefrec
