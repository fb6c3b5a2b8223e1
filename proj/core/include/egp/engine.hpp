#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egp/dataset.hpp"
#include "egp/forest.hpp"
#include "egp/tree_pop.hpp"

namespace egp {

/// The six ensemble variants. N/W select normal/weighted voting; the -5
/// variants use subpopulations of 500 instead of 250; the lowercase n/w
/// variants disable feature sampling (60% observation bags, all features).
enum class Variant { eGP_N, eGP_W, eGP_N5, eGP_W5, eGPn, eGPw };

Voting variant_voting(Variant v);
BagMode variant_bag_mode(Variant v);
std::size_t variant_subpop_size(Variant v);
const char* variant_name(Variant v);

struct EngineConfig {
    Variant variant = Variant::eGP_N;
    unsigned generations = 100;
    /// 0 means "use the variant default" (250, or 500 for the -5 variants).
    std::size_t subpop_size = 0;
    double cx_prob = 0.5;
    unsigned tournament_k = 5;
    std::uint64_t seed = 0;
    DepthRange init_depth{2, 6};
    DepthRange mutation_depth{0, 4};
    std::optional<std::size_t> size_cap;  // off by default: eGP uses no bloat control
};

struct GenerationTrace {
    unsigned generation;
    double best_tree_rmse;
    double best_forest_acc;
    std::size_t best_forest_size;
    // prune bookkeeping for the generation's best forest (equal at gen 0)
    double prune_before_acc;
    double prune_after_acc;
};

/// The final model: the best-training-accuracy forest with its member trees
/// materialized, plus everything needed to reproduce and inspect the run.
struct TrainedModel {
    Variant variant;
    Voting voting;
    std::vector<ExpressionTree> trees;
    std::size_t n_features = 0;
    double train_accuracy = 0.0;
    std::size_t total_nodes = 0;
    DataSplit split;
    std::vector<GenerationTrace> trace;
    std::size_t terminal_repairs = 0;
    std::uint64_t seed = 0;

    std::string to_json() const;
    /// Pinned columns: generation,best_tree_rmse,best_forest_acc,best_forest_size
    void write_trace_csv(std::ostream& os) const;
};

/// Run the co-evolutionary loop: split the data, generate bagged trees and
/// singleton forests, then per generation breed both subpopulations
/// (tournament size 5, elitism in both) and prune the best forest.
TrainedModel train(const Dataset& ds, const EngineConfig& cfg);

/// Ensemble votes exactly as during training-time fitness. Throws
/// std::invalid_argument on a column-count mismatch.
std::vector<int> predict(const TrainedModel& m, std::span<const double> features_row_major,
                         std::size_t n_rows, std::size_t n_cols, Rng& rng);

/// Convenience overload over dataset rows.
std::vector<int> predict_rows(const TrainedModel& m, const Dataset& ds,
                              std::span<const std::size_t> rows, Rng& rng);

/// Seed salt for the post-training accuracy evaluation; predict() with
/// Rng(mix64(model.seed ^ kEvalSeedSalt)) on the training rows reproduces
/// model.train_accuracy exactly.
inline constexpr std::uint64_t kEvalSeedSalt = 0x45474d4f44454cULL;

}  // namespace egp
