#include "prefrec/textmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "prefrec/errors.hpp"
#include "prefrec/util.hpp"

namespace prefrec {

using nlohmann::json;

std::string to_string(TokenizerConfig::Mode m) {
    return m == TokenizerConfig::Mode::Char ? "char" : "word";
}

TokenizerConfig::Mode tokenizer_mode_from_string(const std::string& s) {
    std::string l = lowercase_ascii(s);
    if (l == "char") return TokenizerConfig::Mode::Char;
    if (l == "word") return TokenizerConfig::Mode::Word;
    throw ConfigError("unknown tokenizer mode: " + s);
}

std::vector<std::string> tokenize(const std::string& text, const TokenizerConfig& cfg) {
    if (cfg.mode == TokenizerConfig::Mode::Word) return split_whitespace(text);
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t len = 1;
        unsigned char c = static_cast<unsigned char>(text[i]);
        if ((c & 0xE0) == 0xC0)
            len = 2;
        else if ((c & 0xF0) == 0xE0)
            len = 3;
        else if ((c & 0xF8) == 0xF0)
            len = 4;
        tokens.push_back(text.substr(i, len));
        i += len;
    }
    return tokens;
}

double avg_length(const std::vector<std::string>& texts) {
    if (texts.empty()) throw DomainError("avg_length over empty list");
    double sum = 0.0;
    for (const auto& t : texts) sum += static_cast<double>(codepoint_count(t));
    return sum / static_cast<double>(texts.size());
}

namespace {

// n-gram key: tokens joined by 0x1f so token boundaries stay unambiguous.
std::string ngram_key(const std::vector<std::string>& tokens, std::size_t start, int n) {
    std::string key;
    for (int j = 0; j < n; ++j) {
        if (j) key.push_back('\x1f');
        key += tokens[start + static_cast<std::size_t>(j)];
    }
    return key;
}

}  // namespace

double distinct_n(const std::vector<std::string>& texts, int n, const TokenizerConfig& cfg) {
    if (n < 1) throw DomainError("n must be >= 1");
    std::set<std::string> unique;
    std::size_t total = 0;
    for (const auto& text : texts) {
        auto tokens = tokenize(text, cfg);
        if (tokens.size() < static_cast<std::size_t>(n)) continue;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            unique.insert(ngram_key(tokens, i, n));
            ++total;
        }
    }
    if (total == 0) throw DomainError("no " + std::to_string(n) + "-grams extractable");
    return static_cast<double>(unique.size()) / static_cast<double>(total);
}

double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
            const TokenizerConfig& cfg) {
    if (candidates.empty()) throw DomainError("bleu over empty corpus");
    if (candidates.size() != references.size())
        throw DomainError("bleu: candidates and references must align");

    constexpr int kMaxOrder = 4;
    double matches[kMaxOrder + 1] = {0};
    double totals[kMaxOrder + 1] = {0};
    std::size_t cand_len = 0, ref_len = 0;

    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto cand = tokenize(candidates[i], cfg);
        auto ref = tokenize(references[i], cfg);
        cand_len += cand.size();
        ref_len += ref.size();
        for (int n = 1; n <= kMaxOrder; ++n) {
            if (cand.size() < static_cast<std::size_t>(n)) continue;
            std::map<std::string, std::size_t> ref_counts;
            if (ref.size() >= static_cast<std::size_t>(n))
                for (std::size_t j = 0; j + n <= ref.size(); ++j) ++ref_counts[ngram_key(ref, j, n)];
            std::map<std::string, std::size_t> cand_counts;
            for (std::size_t j = 0; j + n <= cand.size(); ++j) ++cand_counts[ngram_key(cand, j, n)];
            for (const auto& [gram, count] : cand_counts) {
                totals[n] += static_cast<double>(count);
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end())
                    matches[n] += static_cast<double>(std::min(count, it->second));
            }
        }
    }

    double log_sum = 0.0;
    for (int n = 1; n <= kMaxOrder; ++n) {
        double p;
        if (n == 1) {
            if (totals[1] == 0 || matches[1] == 0) return 0.0;
            p = matches[1] / totals[1];
        } else if (matches[n] == 0) {
            p = (matches[n] + 1.0) / (totals[n] + 1.0);  // add-one smoothing
        } else {
            p = matches[n] / totals[n];
        }
        log_sum += 0.25 * std::log(p);
    }
    if (cand_len == 0) return 0.0;
    double bp = cand_len >= ref_len
                    ? 1.0
                    : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
    return bp * std::exp(log_sum);
}

RougeScore rouge_l(const std::string& candidate, const std::string& reference,
                   const TokenizerConfig& cfg) {
    auto cand = tokenize(candidate, cfg);
    auto ref = tokenize(reference, cfg);
    if (cand.empty() || ref.empty()) throw DomainError("rouge_l: empty tokenization");

    // Standard O(|cand| * |ref|) LCS table with two rolling rows.
    std::vector<std::size_t> prev(ref.size() + 1, 0), cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            if (cand[i - 1] == ref[j - 1])
                cur[j] = prev[j - 1] + 1;
            else
                cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    double lcs = static_cast<double>(prev[ref.size()]);
    RougeScore score;
    score.precision = lcs / static_cast<double>(cand.size());
    score.recall = lcs / static_cast<double>(ref.size());
    score.f1 = (score.precision + score.recall) > 0
                   ? 2.0 * score.precision * score.recall / (score.precision + score.recall)
                   : 0.0;
    return score;
}

MetricReport compute_metrics(const std::vector<std::string>& texts,
                             const std::optional<std::vector<std::string>>& references,
                             const TokenizerConfig& cfg) {
    MetricReport report;
    report.avg_len = avg_length(texts);
    report.distinct_1 = distinct_n(texts, 1, cfg);
    report.distinct_2 = distinct_n(texts, 2, cfg);
    report.tokenizer = to_string(cfg.mode);
    if (references) {
        report.bleu = bleu(texts, *references, cfg);
        double f1_sum = 0.0;
        for (std::size_t i = 0; i < texts.size(); ++i)
            f1_sum += rouge_l(texts[i], (*references)[i], cfg).f1;
        report.rouge_l = f1_sum / static_cast<double>(texts.size());
    }
    return report;
}

std::string metric_report_to_json(const MetricReport& report) {
    json j;
    j["avg_len"] = report.avg_len;
    j["distinct_1"] = report.distinct_1;
    j["distinct_2"] = report.distinct_2;
    j["bleu"] = report.bleu ? json(*report.bleu) : json(nullptr);
    j["rouge_l"] = report.rouge_l ? json(*report.rouge_l) : json(nullptr);
    j["tokenizer"] = report.tokenizer;
    return j.dump(2) + "\n";
}

std::string render_metrics_table(const MetricReport& report, const std::string& label) {
    std::ostringstream ss;
    char buf[128];
    ss << "Method      Avg. Len.  Distinct-1/2     BLEU   ROUGE-L\n";
    std::snprintf(buf, sizeof(buf), "%-12s%9.1f  %.3f / %.3f", label.c_str(), report.avg_len,
                  report.distinct_1, report.distinct_2);
    ss << buf;
    if (report.bleu)
        std::snprintf(buf, sizeof(buf), "  %7.3f", *report.bleu * 100.0);  // 0-100 display scale
    else
        std::snprintf(buf, sizeof(buf), "  %7s", "--");
    ss << buf;
    if (report.rouge_l)
        std::snprintf(buf, sizeof(buf), "  %8.3f", *report.rouge_l);
    else
        std::snprintf(buf, sizeof(buf), "  %8s", "--");
    ss << buf << '\n';
    return ss.str();
}

}  // namespace prefrec
