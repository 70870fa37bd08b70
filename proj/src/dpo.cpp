#include "prefrec/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "prefrec/errors.hpp"

namespace prefrec::dpo {

namespace {

void require_finite(const LogProbQuad& q) {
    if (!std::isfinite(q.policy_chosen) || !std::isfinite(q.policy_rejected) ||
        !std::isfinite(q.ref_chosen) || !std::isfinite(q.ref_rejected))
        throw NumericalError("non-finite log-probability in quad");
}

// softplus(x) = ln(1 + e^x) without overflow.
double softplus(double x) {
    if (x > 0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

double implicit_reward_margin(const LogProbQuad& q, double beta) {
    require_finite(q);
    double margin_chosen = q.policy_chosen - q.ref_chosen;
    double margin_rejected = q.policy_rejected - q.ref_rejected;
    return beta * (margin_chosen - margin_rejected);
}

double dpo_loss(const LogProbQuad& q, double beta) {
    if (beta < 0) throw DomainError("beta must be >= 0");
    double z = implicit_reward_margin(q, beta);
    return softplus(-z);
}

Grad dpo_grad(const LogProbQuad& q, double beta) {
    if (beta < 0) throw DomainError("beta must be >= 0");
    double z = implicit_reward_margin(q, beta);
    double s = sigmoid(-z);
    return Grad{-beta * s, beta * s};
}

double mean_dpo_loss_serial(const std::vector<LogProbQuad>& quads, double beta) {
    if (quads.empty()) throw DomainError("empty quad batch");
    double sum = 0.0;
    for (const auto& q : quads) sum += dpo_loss(q, beta);
    return sum / static_cast<double>(quads.size());
}

double mean_dpo_loss(const std::vector<LogProbQuad>& quads, double beta) {
    if (quads.empty()) throw DomainError("empty quad batch");
    std::vector<double> losses(quads.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(quads.size()); ++i) {
        try {
            losses[static_cast<std::size_t>(i)] =
                dpo_loss(quads[static_cast<std::size_t>(i)], beta);
        } catch (...) {
#pragma omp critical
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
    // Fixed reduction order keeps the result bit-identical to the serial path.
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / static_cast<double>(quads.size());
}

ToyPolicy::ToyPolicy(std::size_t vocab_size, std::size_t seq_len)
    : vocab_(vocab_size), len_(seq_len), logits_(vocab_size * seq_len, 0.0) {
    if (vocab_ == 0 || vocab_ > 64) throw DomainError("vocab size must be in 1..64");
    if (len_ == 0 || len_ > 16) throw DomainError("sequence length must be in 1..16");
}

double ToyPolicy::logit(std::size_t pos, std::size_t symbol) const {
    return logits_[pos * vocab_ + symbol];
}

void ToyPolicy::set_logit(std::size_t pos, std::size_t symbol, double v) {
    logits_[pos * vocab_ + symbol] = v;
}

double ToyPolicy::sequence_logprob(const std::vector<std::size_t>& tokens) const {
    if (tokens.size() != len_)
        throw DomainError("token sequence length " + std::to_string(tokens.size()) +
                          " != policy length " + std::to_string(len_));
    double lp = 0.0;
    for (std::size_t pos = 0; pos < len_; ++pos) {
        std::size_t tok = tokens[pos];
        if (tok >= vocab_) throw DomainError("symbol " + std::to_string(tok) + " outside vocab");
        const double* row = logits_.data() + pos * vocab_;
        double mx = row[0];
        for (std::size_t v = 1; v < vocab_; ++v) mx = std::max(mx, row[v]);
        double sum = 0.0;
        for (std::size_t v = 0; v < vocab_; ++v) sum += std::exp(row[v] - mx);
        lp += row[tok] - mx - std::log(sum);
    }
    return lp;
}

namespace {

// d log softmax(row)[tok] / d row[v] = 1{v == tok} - softmax(row)[v]
void accumulate_seq_grad(const ToyPolicy& p, const std::vector<std::size_t>& tokens,
                         double coeff, std::vector<double>& grad) {
    std::size_t vocab = p.vocab_size();
    for (std::size_t pos = 0; pos < p.seq_len(); ++pos) {
        double mx = p.logit(pos, 0);
        for (std::size_t v = 1; v < vocab; ++v) mx = std::max(mx, p.logit(pos, v));
        double sum = 0.0;
        for (std::size_t v = 0; v < vocab; ++v) sum += std::exp(p.logit(pos, v) - mx);
        for (std::size_t v = 0; v < vocab; ++v) {
            double soft = std::exp(p.logit(pos, v) - mx) / sum;
            double ind = (v == tokens[pos]) ? 1.0 : 0.0;
            grad[pos * vocab + v] += coeff * (ind - soft);
        }
    }
}

}  // namespace

StepResult toy_dpo_step(ToyPolicy& policy, const ToyPolicy& reference,
                        const std::vector<TokenPair>& pairs, double beta, double lr) {
    if (pairs.empty()) throw DomainError("empty pair list");
    if (lr < 0) throw DomainError("lr must be >= 0");
    if (policy.vocab_size() != reference.vocab_size() || policy.seq_len() != reference.seq_len())
        throw DomainError("policy/reference shape mismatch");

    std::size_t n = pairs.size();
    std::vector<double> grad(policy.logits().size(), 0.0);
    double loss_sum = 0.0;
    double margin_sum = 0.0;
    for (const auto& pair : pairs)
        if (pair.chosen == pair.rejected)
            throw DomainError("pair has identical chosen and rejected sequences");
    for (const auto& pair : pairs) {
        LogProbQuad q;
        q.policy_chosen = policy.sequence_logprob(pair.chosen);
        q.policy_rejected = policy.sequence_logprob(pair.rejected);
        q.ref_chosen = reference.sequence_logprob(pair.chosen);
        q.ref_rejected = reference.sequence_logprob(pair.rejected);
        loss_sum += dpo_loss(q, beta);
        margin_sum += implicit_reward_margin(q, beta);
        Grad g = dpo_grad(q, beta);
        double scale = 1.0 / static_cast<double>(n);
        accumulate_seq_grad(policy, pair.chosen, g.d_policy_chosen * scale, grad);
        accumulate_seq_grad(policy, pair.rejected, g.d_policy_rejected * scale, grad);
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        std::size_t pos = i / policy.vocab_size();
        std::size_t sym = i % policy.vocab_size();
        policy.set_logit(pos, sym, policy.logit(pos, sym) - lr * grad[i]);
    }
    return StepResult{loss_sum / static_cast<double>(n), margin_sum / static_cast<double>(n)};
}

std::vector<CurvePoint> toy_dpo_train(ToyPolicy& policy, const std::vector<TokenPair>& pairs,
                                      double beta, double lr, int steps) {
    if (steps < 0) throw DomainError("steps must be >= 0");
    if (pairs.empty()) throw DomainError("empty pair list");
    ToyPolicy reference = policy;  // frozen snapshot before the first step
    std::vector<CurvePoint> curve;
    curve.reserve(static_cast<std::size_t>(steps) + 1);
    for (int s = 0; s < steps; ++s) {
        StepResult r = toy_dpo_step(policy, reference, pairs, beta, lr);
        curve.push_back(CurvePoint{s, r.mean_loss, r.mean_margin});
    }
    // Final evaluation row after the last update.
    double loss_sum = 0.0, margin_sum = 0.0;
    for (const auto& pair : pairs) {
        LogProbQuad q;
        q.policy_chosen = policy.sequence_logprob(pair.chosen);
        q.policy_rejected = policy.sequence_logprob(pair.rejected);
        q.ref_chosen = reference.sequence_logprob(pair.chosen);
        q.ref_rejected = reference.sequence_logprob(pair.rejected);
        loss_sum += dpo_loss(q, beta);
        margin_sum += implicit_reward_margin(q, beta);
    }
    curve.push_back(CurvePoint{steps, loss_sum / static_cast<double>(pairs.size()),
                               margin_sum / static_cast<double>(pairs.size())});
    return curve;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "step,loss,margin\n";
    for (const auto& p : curve) ss << p.step << ',' << p.loss << ',' << p.margin << '\n';
    return ss.str();
}

}  // namespace prefrec::dpo
