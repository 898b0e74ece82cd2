#include <benchmark/benchmark.h>

#include "dtfl/dqn.hpp"
#include "dtfl/federation.hpp"
#include "dtfl/trainer.hpp"
#include "dtfl/trust.hpp"

using namespace dtfl;

namespace {

ScenarioConfig bench_scenario() {
    ScenarioConfig cfg;
    cfg.num_nodes = 8;
    cfg.num_clusters = 2;
    cfg.seed = 99;
    cfg.num_classes = 5;
    cfg.hidden_dim = 50;
    cfg.rounds_max = 5;
    cfg.dataset.feature_dim = 10;
    cfg.dataset.samples_per_node = 100;
    cfg.dataset.test_samples = 100;
    return cfg;
}

void BM_Gradient(benchmark::State& state) {
    const Scenario s = init_scenario(bench_scenario());
    const DeviceNode& node = s.nodes[0];
    for (auto _ : state) {
        benchmark::DoNotOptimize(gradient(s.initial_params, node.shard.samples));
    }
}
BENCHMARK(BM_Gradient);

void BM_LocalTrainRound(benchmark::State& state) {
    const Scenario s = init_scenario(bench_scenario());
    TrainerConfig cfg;
    cfg.batch_size = 32;
    for (auto _ : state) {
        Rng rng(1);
        benchmark::DoNotOptimize(
            local_train_steps(s.nodes[0], s.initial_params, 5, cfg, rng));
    }
}
BENCHMARK(BM_LocalTrainRound);

void BM_TrustAggregate(benchmark::State& state) {
    const Scenario s = init_scenario(bench_scenario());
    std::vector<Upload> uploads;
    std::map<int, double> reps;
    Rng rng(2);
    for (const DeviceNode& n : s.nodes) {
        Upload u;
        u.node_id = n.id;
        u.params = s.initial_params;
        for (double& v : u.params.flat) v += rng.uniform(-0.01, 0.01);
        uploads.push_back(std::move(u));
        reps[n.id] = rng.uniform(0.1, 1.0);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(trust_weighted_aggregate(uploads, reps));
        benchmark::DoNotOptimize(gradient_diversity_flags(uploads, s.initial_params));
    }
}
BENCHMARK(BM_TrustAggregate);

void BM_DqnTrainStep(benchmark::State& state) {
    Rng rng(3);
    const int state_dim = 27;
    QNetwork eval(state_dim, 200, 10, rng), target = eval;
    ReplayBuffer buf(256);
    for (int i = 0; i < 256; ++i) {
        Experience e;
        e.state.encoded.resize(state_dim);
        e.next_state.encoded.resize(state_dim);
        for (double& v : e.state.encoded) v = rng.uniform();
        for (double& v : e.next_state.encoded) v = rng.uniform();
        e.action = {1 + static_cast<int>(rng.below(10))};
        e.reward = rng.uniform(-1.0, 1.0);
        buf.push(e);
    }
    DqnConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_step(eval, target, buf, cfg, rng));
    }
}
BENCHMARK(BM_DqnTrainStep);

void BM_KMeans(benchmark::State& state) {
    const Scenario s = init_scenario(bench_scenario());
    for (auto _ : state) {
        Rng rng(4);
        benchmark::DoNotOptimize(cluster_nodes(s.nodes, 2, rng));
    }
}
BENCHMARK(BM_KMeans);

void BM_FederationEpoch(benchmark::State& state) {
    const Scenario s = init_scenario(bench_scenario());
    FederationConfig fed;
    fed.mode = FedMode::AsyncFixed;
    fed.fixed_frequency = 2;
    fed.trainer.batch_size = 32;
    for (auto _ : state) {
        benchmark::DoNotOptimize(run_federation(s, fed, 2));
    }
}
BENCHMARK(BM_FederationEpoch);

}  // namespace
