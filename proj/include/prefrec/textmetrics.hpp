#pragma once

#include <optional>
#include <string>
#include <vector>

namespace prefrec {

// char: one token per Unicode scalar value (suits CJK-dominant text).
// word: whitespace-separated tokens.
struct TokenizerConfig {
    enum class Mode { Char, Word };
    Mode mode = Mode::Char;
};

std::string to_string(TokenizerConfig::Mode m);
TokenizerConfig::Mode tokenizer_mode_from_string(const std::string& s);

std::vector<std::string> tokenize(const std::string& text, const TokenizerConfig& cfg);

// Mean Unicode scalar count per text.
double avg_length(const std::vector<std::string>& texts);

// Corpus-pooled: unique n-grams across all texts / total n-gram tokens.
double distinct_n(const std::vector<std::string>& texts, int n, const TokenizerConfig& cfg);

// Corpus BLEU, n-grams 1..4 with uniform weights and brevity penalty.
// Smoothing (declared, fixed): for orders >= 2 with zero matches, the
// precision becomes (matches+1)/(total+1); a zero unigram precision keeps
// BLEU at 0. Result in [0,1].
double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
            const TokenizerConfig& cfg);

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// LCS-based ROUGE-L: P = LCS/|candidate|, R = LCS/|reference|,
// F1 = 2PR/(P+R) (0 when P+R = 0).
RougeScore rouge_l(const std::string& candidate, const std::string& reference,
                   const TokenizerConfig& cfg);

struct MetricReport {
    double avg_len = 0.0;
    double distinct_1 = 0.0;
    double distinct_2 = 0.0;
    std::optional<double> bleu;     // only with references
    std::optional<double> rouge_l;  // mean F1 over aligned pairs
    std::string tokenizer;          // stamped so reports are comparable
};

// references, when present, must align with texts one-to-one.
MetricReport compute_metrics(const std::vector<std::string>& texts,
                             const std::optional<std::vector<std::string>>& references,
                             const TokenizerConfig& cfg);

std::string metric_report_to_json(const MetricReport& report);
std::string render_metrics_table(const MetricReport& report, const std::string& label);

}  // namespace prefrec
