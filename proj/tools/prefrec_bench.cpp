// Benchmark comparing the OpenMP score-matrix and batch DPO-loss kernels
// against their serial reference implementations. The parallel paths must be
// bit-identical to the serial ones; this also re-checks that here.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "prefrec/dpo.hpp"
#include "prefrec/scorer.hpp"
#include "prefrec/util.hpp"

using namespace prefrec;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

std::string random_text(DetRng& rng, std::size_t words) {
    static const char* pool[] = {"onsen",  "river",  "castle", "garden", "market", "trail",
                                 "museum", "harbor", "shrine", "valley", "plaza",  "tower"};
    std::vector<std::string> out;
    out.reserve(words);
    for (std::size_t i = 0; i < words; ++i)
        out.push_back(pool[rng.bounded(sizeof(pool) / sizeof(pool[0]))]);
    return join(out, " ");
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e100;
    for (int r = 0; r < reps; ++r) {
        double t0 = now_ms();
        f();
        best = std::min(best, now_ms() - t0);
    }
    return best;
}

}  // namespace

int main() {
#ifdef _OPENMP
    printf("OpenMP enabled, max threads = %d\n", omp_get_max_threads());
#else
    printf("OpenMP disabled; parallel kernels run serially\n");
#endif

    DetRng rng(12345);

    // Score matrix: K summaries x M items, realistic text lengths.
    const std::size_t K = 64, M = 256;
    std::vector<std::string> summaries, rec_infos, descriptions;
    for (std::size_t k = 0; k < K; ++k) summaries.push_back(random_text(rng, 40));
    for (std::size_t m = 0; m < M; ++m) {
        descriptions.push_back(random_text(rng, 30));
        rec_infos.push_back(descriptions.back() + " Suitable for matching visitors.");
    }
    FeatureConfig fcfg;
    fcfg.hash_dim_log2 = 16;
    ScorerModel model(fcfg);
    for (double& w : model.weights) w = rng.uniform(-0.05, 0.05);

    ScoreMatrix serial, parallel;
    double t_serial = time_best_of(
        3, [&] { serial = score_matrix_serial(summaries, rec_infos, descriptions, model); });
    double t_parallel =
        time_best_of(3, [&] { parallel = score_matrix(summaries, rec_infos, descriptions, model); });
    bool equal = serial.values == parallel.values;
    printf("score_matrix %zux%zu: serial %8.2f ms | omp %8.2f ms | speedup %5.2fx | %s\n", K, M,
           t_serial, t_parallel, t_serial / t_parallel,
           equal ? "bit-identical" : "MISMATCH");

    // Batch DPO loss over a large quad set.
    std::vector<dpo::LogProbQuad> quads(1 << 20);
    for (auto& q : quads)
        q = {rng.uniform(-5, 0), rng.uniform(-5, 0), rng.uniform(-5, 0), rng.uniform(-5, 0)};
    double serial_loss = 0.0, parallel_loss = 0.0;
    double t_loss_serial =
        time_best_of(3, [&] { serial_loss = dpo::mean_dpo_loss_serial(quads, 0.1); });
    double t_loss_parallel = time_best_of(3, [&] { parallel_loss = dpo::mean_dpo_loss(quads, 0.1); });
    printf("mean_dpo_loss %zu quads: serial %8.2f ms | omp %8.2f ms | speedup %5.2fx | %s\n",
           quads.size(), t_loss_serial, t_loss_parallel, t_loss_serial / t_loss_parallel,
           serial_loss == parallel_loss ? "bit-identical" : "MISMATCH");

    return equal && serial_loss == parallel_loss ? 0 : 1;
}
