#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "egp/dataset.hpp"
#include "egp/expr_tree.hpp"

namespace egp {

/// A tree plus its cached bag-restricted fitness. The bag travels inside the
/// tree; fitness is computed once because trees are immutable.
struct TreeIndividual {
    ExpressionTree tree;
    double fitness_rmse = 0.0;
};

using TreeId = std::uint64_t;

/// RMSE between the tree's outputs and the labels, over the tree's own bag
/// observations only. Lower is better.
double rmse_fitness(const ExpressionTree& tree, const Dataset& ds);

/// Append-only store of tree individuals with stable ids. Forests reference
/// trees by id, and ids stay resolvable for as long as any live forest
/// references them; collect() drops everything else that is no longer live.
///
/// When constructed with a row set, the archive caches each tree's outputs
/// on those rows so forest evaluation does not re-run the trees.
class TreeArchive {
public:
    TreeArchive() = default;
    explicit TreeArchive(std::vector<std::size_t> cached_rows)
        : cached_rows_(std::move(cached_rows)) {}

    TreeId add(TreeIndividual ind, const Dataset& ds);

    void set_live(std::vector<TreeId> ids) { live_ = std::move(ids); }
    std::span<const TreeId> live() const { return live_; }

    bool contains(TreeId id) const { return entries_.count(id) != 0; }
    const TreeIndividual& at(TreeId id) const { return entries_.at(id).ind; }

    /// Cached outputs on the archive's row set; empty when caching is off.
    const std::vector<double>& predictions(TreeId id) const { return entries_.at(id).predictions; }
    const std::vector<std::size_t>& cached_rows() const { return cached_rows_; }

    /// Drop entries that are neither live nor in `referenced`.
    void collect(const std::unordered_set<TreeId>& referenced);

    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        TreeIndividual ind;
        std::vector<double> predictions;
    };
    std::unordered_map<TreeId, Entry> entries_;
    std::vector<TreeId> live_;
    std::vector<std::size_t> cached_rows_;
    TreeId next_id_ = 0;
};

/// k draws with replacement from the live ids, best RMSE wins, ties keep the
/// earliest draw.
TreeId tournament(const TreeArchive& archive, std::span<const TreeId> pool, unsigned k, Rng& rng);

/// Luke & Panait double tournament, fitness first: two RMSE tournaments give
/// two finalists, the smaller one wins with probability parsimony_prob.
TreeId double_tournament(const TreeArchive& archive, std::span<const TreeId> pool,
                         unsigned k_fitness, double parsimony_prob, Rng& rng);

using TreeSelector = std::function<TreeId(const TreeArchive&, std::span<const TreeId>, Rng&)>;

TreeSelector make_tournament_selector(unsigned k);
TreeSelector make_double_tournament_selector(unsigned k_fitness, double parsimony_prob);

struct BreedOptions {
    double cx_prob = 0.5;
    DepthRange mutation_depth{0, 4};
    /// Optional node-count cap; an offspring over the cap is replaced by the
    /// parent that provided its root. Off by default.
    std::optional<std::size_t> size_cap;
};

/// One generational step of the tree subpopulation: copy the best individual
/// unchanged, then fill with e_crossover (probability cx_prob) or e_mutation
/// offspring. Offspring inherit their parents' bags. The new generation is
/// appended to the archive and becomes the live set; its ids are returned.
std::vector<TreeId> breed_generation(TreeArchive& archive, const Dataset& ds,
                                     const FeatureSimilarity& sim, const BreedOptions& opts,
                                     const TreeSelector& select, Rng& rng,
                                     std::size_t* repair_count = nullptr);

}  // namespace egp
