#include <benchmark/benchmark.h>

#include "geomlab/gradients.hpp"
#include "geomlab/losses.hpp"
#include "geomlab/rng.hpp"
#include "geomlab/synthdata.hpp"
#include "geomlab/trainer.hpp"

using namespace geomlab;

namespace {

std::vector<Vec> random_batch(Rng& rng, int batch, int n) {
    std::vector<Vec> out;
    out.reserve(batch);
    for (int i = 0; i < batch; ++i) out.push_back(rng.normal_vec(n));
    return out;
}

GeometryConfig cfg_for(GeometryKind kind, LogitVariant variant, int n, double lambda) {
    GeometryConfig cfg = GeometryConfig::defaults(kind, variant, n);
    cfg.lambda_entail = lambda;
    return cfg;
}

void BM_similarity(benchmark::State& state, GeometryKind kind, LogitVariant variant) {
    Rng rng(1);
    const int n = static_cast<int>(state.range(0));
    const GeometryConfig cfg = cfg_for(kind, variant, n, 0.0);
    const Vec x = rng.normal_vec(n);
    const Vec y = rng.normal_vec(n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(similarity(cfg, x, y));
    }
}

void BM_total_loss(benchmark::State& state, GeometryKind kind, LogitVariant variant,
                   double lambda) {
    Rng rng(2);
    const int batch = static_cast<int>(state.range(0));
    const int n = 32;
    const GeometryConfig cfg = cfg_for(kind, variant, n, lambda);
    const auto texts = random_batch(rng, batch, n);
    const auto images = random_batch(rng, batch, n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(total_loss(cfg, texts, images).total);
    }
}

void BM_grad_total_loss(benchmark::State& state, GeometryKind kind, LogitVariant variant,
                        double lambda) {
    Rng rng(3);
    const int batch = static_cast<int>(state.range(0));
    const int n = 32;
    const GeometryConfig cfg = cfg_for(kind, variant, n, lambda);
    const auto texts = random_batch(rng, batch, n);
    const auto images = random_batch(rng, batch, n);
    for (auto _ : state) {
        benchmark::DoNotOptimize(grad_total_loss(cfg, texts, images).first.total);
    }
}

void BM_train_step(benchmark::State& state) {
    TrainBundle bundle;
    bundle.tree.seed = 5;
    bundle.cfg = cfg_for(GeometryKind::euclidean, LogitVariant::d2, 32, 0.2);
    bundle.schedule = {5e-4, 10, 1 << 20};
    bundle.batch_size = static_cast<int>(state.range(0));
    bundle.seed = 5;
    const PrototypeTree tree = gen_tree(bundle.tree);
    TrainState st = init_train_state(bundle, tree);
    const PairBatch batch = sample_batch(tree, bundle.batch_size, 6,
                                         uniform_depth_weights(tree.spec.depth));
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_step(st, batch, bundle.schedule, bundle.optimizer).total);
    }
}

void BM_exp_map(benchmark::State& state) {
    Rng rng(7);
    const Vec u = rng.normal_vec(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(exp_map_origin(u, 1.0).time);
    }
}

}  // namespace

BENCHMARK_CAPTURE(BM_similarity, clip, GeometryKind::clip, LogitVariant::d)->Arg(32)->Arg(512);
BENCHMARK_CAPTURE(BM_similarity, euclidean_d2, GeometryKind::euclidean, LogitVariant::d2)
    ->Arg(32)
    ->Arg(512);
BENCHMARK_CAPTURE(BM_similarity, hyperbolic_d, GeometryKind::hyperbolic, LogitVariant::d)
    ->Arg(32)
    ->Arg(512);
BENCHMARK_CAPTURE(BM_total_loss, clip, GeometryKind::clip, LogitVariant::d, 0.0)->Arg(8)->Arg(64);
BENCHMARK_CAPTURE(BM_total_loss, euclidean_d2_entail, GeometryKind::euclidean, LogitVariant::d2,
                  0.2)
    ->Arg(8)
    ->Arg(64);
BENCHMARK_CAPTURE(BM_total_loss, hyperbolic_d2_entail, GeometryKind::hyperbolic, LogitVariant::d2,
                  0.2)
    ->Arg(8)
    ->Arg(64);
BENCHMARK_CAPTURE(BM_grad_total_loss, euclidean_d2_entail, GeometryKind::euclidean,
                  LogitVariant::d2, 0.2)
    ->Arg(8)
    ->Arg(64);
BENCHMARK_CAPTURE(BM_grad_total_loss, hyperbolic_d2_entail, GeometryKind::hyperbolic,
                  LogitVariant::d2, 0.2)
    ->Arg(8)
    ->Arg(64);
BENCHMARK(BM_train_step)->Arg(16)->Arg(64);
BENCHMARK(BM_exp_map)->Arg(32)->Arg(512);

BENCHMARK_MAIN();
