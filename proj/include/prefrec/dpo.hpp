#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace prefrec::dpo {

// Sequence log-probabilities of one preference pair under the trained policy
// and the frozen reference policy. Proper sequence probabilities are <= 0 but
// unconstrained reals are accepted.
struct LogProbQuad {
    double policy_chosen = 0.0;
    double policy_rejected = 0.0;
    double ref_chosen = 0.0;
    double ref_rejected = 0.0;
};

// beta * [(policy_chosen - ref_chosen) - (policy_rejected - ref_rejected)].
// Positive iff the policy prefers the chosen continuation relative to the
// reference.
double implicit_reward_margin(const LogProbQuad& q, double beta);

// -ln sigmoid(z) evaluated as softplus(-z). Stable for large |z|; always > 0
// and -> 0 as z -> +inf. beta == 0 is permitted (degenerate, returns ln 2).
double dpo_loss(const LogProbQuad& q, double beta);

struct Grad {
    double d_policy_chosen = 0.0;
    double d_policy_rejected = 0.0;
};

// Analytic derivative of dpo_loss w.r.t. the two policy log-probs. The
// reference terms are frozen and carry zero gradient.
Grad dpo_grad(const LogProbQuad& q, double beta);

// Mean loss over a batch of quads. Parallel version evaluates per-pair losses
// concurrently but reduces in fixed index order, so it is bit-identical to
// the serial reference.
double mean_dpo_loss_serial(const std::vector<LogProbQuad>& quads, double beta);
double mean_dpo_loss(const std::vector<LogProbQuad>& quads, double beta);

// Per-position categorical policy over fixed-length symbol sequences.
// sequence_logprob sums position-wise log-softmax terms, so exponentials over
// the whole length-L sequence space sum to 1.
class ToyPolicy {
public:
    ToyPolicy(std::size_t vocab_size, std::size_t seq_len);

    std::size_t vocab_size() const { return vocab_; }
    std::size_t seq_len() const { return len_; }

    double logit(std::size_t pos, std::size_t symbol) const;
    void set_logit(std::size_t pos, std::size_t symbol, double v);
    const std::vector<double>& logits() const { return logits_; }

    // Sum over positions of log softmax(logits[pos])[token]; <= 0.
    double sequence_logprob(const std::vector<std::size_t>& tokens) const;

private:
    std::size_t vocab_;
    std::size_t len_;
    std::vector<double> logits_;  // len_ x vocab_, row-major
};

struct TokenPair {
    std::vector<std::size_t> chosen;
    std::vector<std::size_t> rejected;
};

struct StepResult {
    double mean_loss = 0.0;    // loss at the pre-step policy
    double mean_margin = 0.0;  // implicit reward margin at the pre-step policy
};

// One full-batch gradient-descent step on the mean DPO loss. Mutates policy
// logits only; the reference is never touched.
StepResult toy_dpo_step(ToyPolicy& policy, const ToyPolicy& reference,
                        const std::vector<TokenPair>& pairs, double beta, double lr);

struct CurvePoint {
    int step = 0;
    double loss = 0.0;
    double margin = 0.0;
};

// Runs `steps` toy_dpo_step calls and records (step, loss, margin) per step
// plus a final evaluation row. The reference is a deep copy of the policy
// taken before the first step.
std::vector<CurvePoint> toy_dpo_train(ToyPolicy& policy, const std::vector<TokenPair>& pairs,
                                      double beta, double lr, int steps);

std::string curve_to_csv(const std::vector<CurvePoint>& curve);

}  // namespace prefrec::dpo
