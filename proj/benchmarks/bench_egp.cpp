#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "egp/engine.hpp"
#include "egp/forest.hpp"
#include "egp/stats.hpp"

namespace {

using namespace egp;

Dataset synthetic_dataset(std::size_t n_obs, std::size_t n_feat, std::uint64_t seed) {
    Dataset ds;
    ds.n_obs = n_obs;
    ds.n_feat = n_feat;
    Rng rng(seed);
    for (std::size_t i = 0; i < n_obs * n_feat; ++i) ds.features.push_back(rng.real01() * 4 - 2);
    for (std::size_t r = 0; r < n_obs; ++r)
        ds.labels.push_back(ds.features[r * n_feat] > ds.features[r * n_feat + 1] ? 1 : 0);
    for (std::size_t f = 0; f < n_feat; ++f) ds.feature_names.push_back("f" + std::to_string(f));
    return ds;
}

std::shared_ptr<const Bag> full_bag(std::size_t n_obs, std::size_t n_feat) {
    Bag bag;
    for (std::size_t i = 0; i < n_obs; ++i) bag.obs_indices.push_back(i);
    for (std::size_t f = 0; f < n_feat; ++f) bag.feature_mask.push_back(static_cast<std::uint32_t>(f));
    return std::make_shared<const Bag>(std::move(bag));
}

void BM_TreeEval(benchmark::State& state) {
    Rng rng(1);
    const auto bag = full_bag(1, 8);
    const auto tree = ramped_half_and_half(bag, {6, 6}, rng);
    std::vector<double> row(8, 1.5);
    for (auto _ : state) benchmark::DoNotOptimize(tree.eval(row));
    state.SetItemsProcessed(state.iterations() * tree.node_count());
}
BENCHMARK(BM_TreeEval);

void BM_RampedInit(benchmark::State& state) {
    Rng rng(2);
    const auto bag = full_bag(1, 16);
    for (auto _ : state) {
        const auto tree = ramped_half_and_half(bag, {2, 6}, rng);
        benchmark::DoNotOptimize(tree.node_count());
    }
}
BENCHMARK(BM_RampedInit);

void BM_ECrossover(benchmark::State& state) {
    Rng rng(3);
    const std::size_t n_feat = 16;
    std::vector<double> matrix(n_feat * n_feat, 0.5);
    const FeatureSimilarity sim(n_feat, std::move(matrix));
    const auto bag = full_bag(1, n_feat);
    const auto p1 = ramped_half_and_half(bag, {5, 6}, rng);
    const auto p2 = ramped_half_and_half(bag, {5, 6}, rng);
    for (auto _ : state) {
        auto [c1, c2] = e_crossover(p1, p2, sim, rng);
        benchmark::DoNotOptimize(c1.node_count() + c2.node_count());
    }
}
BENCHMARK(BM_ECrossover);

void BM_ForestFitness(benchmark::State& state) {
    const auto members = static_cast<std::size_t>(state.range(0));
    const Dataset ds = synthetic_dataset(480, 8, 4);
    DataSplit sp;
    for (std::size_t i = 0; i < 480; ++i) sp.train_indices.push_back(i);
    Rng rng(5);
    TreeArchive archive(sp.train_indices);
    Forest forest;
    for (std::size_t m = 0; m < members; ++m) {
        auto tree = ramped_half_and_half(full_bag(480, 8), {3, 5}, rng);
        const double f = rmse_fitness(tree, ds);
        forest.member_ids.push_back(archive.add(TreeIndividual{std::move(tree), f}, ds));
    }
    archive.set_live(forest.member_ids);
    for (auto _ : state)
        benchmark::DoNotOptimize(accuracy_fitness(forest, archive, ds, sp, Voting::Weighted, rng));
    state.SetItemsProcessed(state.iterations() * 480 * members);
}
BENCHMARK(BM_ForestFitness)->Arg(4)->Arg(16);

void BM_KruskalWallis(benchmark::State& state) {
    Rng rng(6);
    SampleSet s;
    for (int g = 0; g < 10; ++g) {
        std::vector<double> group;
        for (int i = 0; i < 30; ++i) group.push_back(rng.real01());
        s.names.push_back("g");
        s.groups.push_back(std::move(group));
    }
    for (auto _ : state) benchmark::DoNotOptimize(kruskal_wallis(s).p_value);
}
BENCHMARK(BM_KruskalWallis);

void BM_DeskTrain(benchmark::State& state) {
    const Dataset ds = synthetic_dataset(200, 8, 7);
    for (auto _ : state) {
        EngineConfig cfg;
        cfg.variant = Variant::eGPn;
        cfg.generations = 5;
        cfg.subpop_size = 30;
        cfg.seed = 9;
        benchmark::DoNotOptimize(train(ds, cfg).train_accuracy);
    }
}
BENCHMARK(BM_DeskTrain)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
