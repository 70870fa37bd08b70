#include "prefrec/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "prefrec/errors.hpp"
#include "prefrec/util.hpp"

using namespace prefrec;
using namespace prefrec::dpo;

namespace {

// Independent high-precision oracle: softplus(-z) in long double, straight
// from the definition.
long double softplus_oracle(long double z) {
    if (-z > 0) return -z + std::log1p(std::exp(z));
    return std::log1p(std::exp(-z));
}

LogProbQuad random_quad(DetRng& rng) {
    LogProbQuad q;
    q.policy_chosen = rng.uniform(-5.0, 0.0);
    q.policy_rejected = rng.uniform(-5.0, 0.0);
    q.ref_chosen = rng.uniform(-5.0, 0.0);
    q.ref_rejected = rng.uniform(-5.0, 0.0);
    return q;
}

}  // namespace

TEST_CASE("dpo_loss identity and degenerate cases") {
    LogProbQuad same{-1.3, -2.6, -1.3, -2.6};
    CHECK(dpo_loss(same, 0.1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

    // beta = 0 collapses z to 0 regardless of the log-probs.
    LogProbQuad q{-0.2, -9.0, -4.4, -0.5};
    CHECK(dpo_loss(q, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

    CHECK_THROWS_AS(dpo_loss(q, -0.1), DomainError);
    LogProbQuad bad = q;
    bad.ref_chosen = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(dpo_loss(bad, 0.1), NumericalError);
}

TEST_CASE("dpo_loss worked example beta=0.1 margins +1/-1") {
    LogProbQuad q;
    q.policy_chosen = -1.0;
    q.ref_chosen = -2.0;  // margin chosen = +1
    q.policy_rejected = -3.0;
    q.ref_rejected = -2.0;  // margin rejected = -1
    double z = implicit_reward_margin(q, 0.1);
    CHECK(z == doctest::Approx(0.2).epsilon(1e-14));
    double loss = dpo_loss(q, 0.1);
    CHECK(loss == doctest::Approx(0.598139).epsilon(1e-6));
    CHECK(std::abs(static_cast<double>(softplus_oracle(0.2L)) - loss) < 1e-12);
}

TEST_CASE("dpo_loss equals stable softplus over a sweep, including extremes") {
    DetRng rng(11);
    for (int i = 0; i < 500; ++i) {
        LogProbQuad q = random_quad(rng);
        double beta = rng.uniform(0.0, 0.5);
        double z = implicit_reward_margin(q, beta);
        double loss = dpo_loss(q, beta);
        CHECK(loss > 0.0);
        CHECK(std::abs(static_cast<double>(softplus_oracle(z)) - loss) <= 1e-12);
    }
    // Extreme margins must not overflow. z = 700 is near the limit of what
    // exp can represent; the loss stays positive and tiny.
    LogProbQuad wide{0.0, -700.0, 0.0, 0.0};
    double big = dpo_loss(wide, 1.0);  // z = +700
    CHECK(big > 0.0);
    CHECK(big < 1e-100);
    double worst = dpo_loss(LogProbQuad{-2000.0, 0.0, 0.0, 0.0}, 1.0);  // z = -2000
    CHECK(worst == doctest::Approx(2000.0).epsilon(1e-12));
}

TEST_CASE("dpo_loss monotone in the policy log-probs") {
    DetRng rng(23);
    for (int i = 0; i < 200; ++i) {
        LogProbQuad q = random_quad(rng);
        double beta = rng.uniform(0.01, 0.3);
        double base = dpo_loss(q, beta);
        LogProbQuad up = q;
        up.policy_chosen += 0.1;
        CHECK(dpo_loss(up, beta) < base);  // strictly decreasing in chosen
        LogProbQuad worse = q;
        worse.policy_rejected += 0.1;
        CHECK(dpo_loss(worse, beta) > base);  // strictly increasing in rejected
    }
}

TEST_CASE("dpo_grad trivial values and saturation") {
    LogProbQuad same{-1.0, -1.0, -1.0, -1.0};
    Grad g = dpo_grad(same, 0.1);
    CHECK(g.d_policy_chosen == doctest::Approx(-0.05).epsilon(1e-14));
    CHECK(g.d_policy_rejected == doctest::Approx(0.05).epsilon(1e-14));

    LogProbQuad sat{0.0, -500.0, 0.0, 0.0};  // z very large
    Grad gs = dpo_grad(sat, 1.0);
    CHECK(std::abs(gs.d_policy_chosen) < 1e-100);
    CHECK(std::abs(gs.d_policy_rejected) < 1e-100);
}

TEST_CASE("dpo_grad matches central finite differences") {
    const double betas[] = {0.01, 0.06109, 0.1, 0.1768};
    const double eps = 1e-6;
    DetRng rng(42);
    for (int i = 0; i < 1000; ++i) {
        LogProbQuad q = random_quad(rng);
        double beta = betas[i % 4];
        Grad g = dpo_grad(q, beta);

        LogProbQuad up = q, dn = q;
        up.policy_chosen += eps;
        dn.policy_chosen -= eps;
        double fd_c = (dpo_loss(up, beta) - dpo_loss(dn, beta)) / (2 * eps);

        up = q;
        dn = q;
        up.policy_rejected += eps;
        dn.policy_rejected -= eps;
        double fd_r = (dpo_loss(up, beta) - dpo_loss(dn, beta)) / (2 * eps);

        CHECK(std::abs(g.d_policy_chosen - fd_c) / std::max(std::abs(fd_c), 1e-12) < 1e-5);
        CHECK(std::abs(g.d_policy_rejected - fd_r) / std::max(std::abs(fd_r), 1e-12) < 1e-5);
    }
}

TEST_CASE("implicit_reward_margin basics") {
    LogProbQuad same{-1.0, -2.0, -1.0, -2.0};
    CHECK(implicit_reward_margin(same, 0.3) == 0.0);

    LogProbQuad q{-1.0, -3.0, -2.0, -2.0};
    double m1 = implicit_reward_margin(q, 0.1);
    double m2 = implicit_reward_margin(q, 0.2);
    CHECK(m2 == doctest::Approx(2.0 * m1).epsilon(1e-14));
}

TEST_CASE("sequence_logprob uniform and near-deterministic policies") {
    ToyPolicy uniform(4, 2);
    CHECK(uniform.sequence_logprob({0, 3}) == doctest::Approx(2.0 * std::log(0.25)).epsilon(1e-12));

    ToyPolicy peaky(2, 1);
    peaky.set_logit(0, 0, 10.0);
    peaky.set_logit(0, 1, -10.0);
    double lp = peaky.sequence_logprob({0});
    CHECK(lp == doctest::Approx(-2.0611536e-9).epsilon(1e-3));
    CHECK(lp < 0.0);

    CHECK_THROWS_AS(uniform.sequence_logprob({0, 4}), DomainError);
    CHECK_THROWS_AS(uniform.sequence_logprob({0}), DomainError);
}

TEST_CASE("sequence_logprob normalizes over the full sequence space") {
    // V^L = 4096; brute-force sum of probabilities must be 1.
    ToyPolicy p(8, 4);
    DetRng rng(7);
    for (std::size_t pos = 0; pos < 4; ++pos)
        for (std::size_t v = 0; v < 8; ++v) p.set_logit(pos, v, rng.uniform(-2.0, 2.0));

    double total = 0.0;
    std::vector<std::size_t> toks(4, 0);
    for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = 0; b < 8; ++b)
            for (std::size_t c = 0; c < 8; ++c)
                for (std::size_t d = 0; d < 8; ++d) {
                    toks = {a, b, c, d};
                    double lp = p.sequence_logprob(toks);
                    CHECK(lp <= 0.0);
                    total += std::exp(lp);
                }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("toy_dpo_step increases the margin and leaves the reference alone") {
    ToyPolicy policy(4, 2);
    ToyPolicy reference = policy;
    std::vector<double> ref_logits_before = reference.logits();
    std::vector<TokenPair> pairs{{{0, 1}, {2, 3}}};

    StepResult r0 = toy_dpo_step(policy, reference, pairs, 0.1, 0.1);
    CHECK(r0.mean_loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(r0.mean_margin == 0.0);

    LogProbQuad q;
    q.policy_chosen = policy.sequence_logprob(pairs[0].chosen);
    q.policy_rejected = policy.sequence_logprob(pairs[0].rejected);
    q.ref_chosen = reference.sequence_logprob(pairs[0].chosen);
    q.ref_rejected = reference.sequence_logprob(pairs[0].rejected);
    CHECK(implicit_reward_margin(q, 0.1) > 0.0);
    CHECK(reference.logits() == ref_logits_before);
}

TEST_CASE("toy_dpo_step with lr=0 is the identity") {
    ToyPolicy policy(3, 2);
    policy.set_logit(0, 1, 0.7);
    ToyPolicy reference = policy;
    std::vector<double> before = policy.logits();
    std::vector<TokenPair> pairs{{{0, 1}, {1, 0}}};
    StepResult r = toy_dpo_step(policy, reference, pairs, 0.1, 0.0);
    CHECK(policy.logits() == before);
    CHECK(r.mean_loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("50 toy steps descend below ln 2 with positive final margin") {
    ToyPolicy policy(4, 2);
    std::vector<TokenPair> pairs{{{0, 1}, {2, 3}}};
    std::vector<CurvePoint> curve = toy_dpo_train(policy, pairs, 0.1, 0.5, 50);
    REQUIRE(curve.size() == 51);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].loss <= curve[i - 1].loss);
    CHECK(curve.back().loss < std::log(2.0));
    CHECK(curve.back().margin > 0.0);
    CHECK_THROWS_AS(toy_dpo_step(policy, policy, {}, 0.1, 0.5), DomainError);
}

TEST_CASE("parallel mean loss is bit-identical to the serial reference") {
    DetRng rng(99);
    std::vector<LogProbQuad> quads;
    for (int i = 0; i < 513; ++i) quads.push_back(random_quad(rng));
    CHECK(mean_dpo_loss(quads, 0.1768) == mean_dpo_loss_serial(quads, 0.1768));
    CHECK(mean_dpo_loss(quads, 0.01) == mean_dpo_loss_serial(quads, 0.01));

    quads[200].ref_chosen = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(mean_dpo_loss(quads, 0.1), NumericalError);
}

TEST_CASE("toy_dpo_step rejects identical chosen/rejected sequences") {
    ToyPolicy policy(4, 2);
    ToyPolicy reference = policy;
    std::vector<TokenPair> degenerate{{{0, 1}, {0, 1}}};
    CHECK_THROWS_AS(toy_dpo_step(policy, reference, degenerate, 0.1, 0.1), DomainError);
}

TEST_CASE("curve csv shape") {
    std::vector<CurvePoint> curve{{0, 0.5, 0.1}, {1, 0.4, 0.2}};
    std::string csv = curve_to_csv(curve);
    CHECK(csv.substr(0, 17) == "step,loss,margin\n");
    CHECK(csv.find("0,0.5,0.1") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
