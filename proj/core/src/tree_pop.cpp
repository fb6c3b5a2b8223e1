#include "egp/tree_pop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "egp/selection.hpp"

namespace egp {

double rmse_fitness(const ExpressionTree& tree, const Dataset& ds) {
    const auto& obs = tree.bag().obs_indices;
    if (obs.empty()) throw std::invalid_argument("rmse_fitness: empty bag");
    double sum_sq = 0.0;
    for (std::size_t row : obs) {
        const double r = tree.eval(ds.row(row)) - static_cast<double>(ds.labels[row]);
        sum_sq += r * r;
    }
    return std::sqrt(sum_sq / static_cast<double>(obs.size()));
}

TreeId TreeArchive::add(TreeIndividual ind, const Dataset& ds) {
    Entry entry{std::move(ind), {}};
    if (!cached_rows_.empty()) {
        entry.predictions.reserve(cached_rows_.size());
        for (std::size_t row : cached_rows_)
            entry.predictions.push_back(entry.ind.tree.eval(ds.row(row)));
    }
    const TreeId id = next_id_++;
    entries_.emplace(id, std::move(entry));
    return id;
}

void TreeArchive::collect(const std::unordered_set<TreeId>& referenced) {
    std::unordered_set<TreeId> keep(live_.begin(), live_.end());
    for (auto it = entries_.begin(); it != entries_.end();) {
        if (keep.count(it->first) || referenced.count(it->first))
            ++it;
        else
            it = entries_.erase(it);
    }
}

TreeId tournament(const TreeArchive& archive, std::span<const TreeId> pool, unsigned k, Rng& rng) {
    const std::size_t i = tournament_index(pool.size(), k, rng, [&](std::size_t a, std::size_t b) {
        return archive.at(pool[a]).fitness_rmse < archive.at(pool[b]).fitness_rmse;
    });
    return pool[i];
}

TreeId double_tournament(const TreeArchive& archive, std::span<const TreeId> pool,
                         unsigned k_fitness, double parsimony_prob, Rng& rng) {
    const std::size_t i = double_tournament_index(
        pool.size(), k_fitness, parsimony_prob, rng,
        [&](std::size_t a, std::size_t b) {
            return archive.at(pool[a]).fitness_rmse < archive.at(pool[b]).fitness_rmse;
        },
        [&](std::size_t a) { return archive.at(pool[a]).tree.node_count(); });
    return pool[i];
}

TreeSelector make_tournament_selector(unsigned k) {
    return [k](const TreeArchive& a, std::span<const TreeId> pool, Rng& rng) {
        return tournament(a, pool, k, rng);
    };
}

TreeSelector make_double_tournament_selector(unsigned k_fitness, double parsimony_prob) {
    return [=](const TreeArchive& a, std::span<const TreeId> pool, Rng& rng) {
        return double_tournament(a, pool, k_fitness, parsimony_prob, rng);
    };
}

namespace {

// Offspring over the size cap revert to the parent that provided their root.
ExpressionTree apply_cap(ExpressionTree child, const ExpressionTree& parent,
                         const std::optional<std::size_t>& cap) {
    if (cap && child.node_count() > *cap) return parent;
    return child;
}

}  // namespace

std::vector<TreeId> breed_generation(TreeArchive& archive, const Dataset& ds,
                                     const FeatureSimilarity& sim, const BreedOptions& opts,
                                     const TreeSelector& select, Rng& rng,
                                     std::size_t* repair_count) {
    const std::vector<TreeId> parents(archive.live().begin(), archive.live().end());
    if (parents.empty()) throw std::invalid_argument("breed_generation: empty live generation");
    const std::size_t n = parents.size();

    std::vector<TreeId> next;
    next.reserve(n);

    // Elitism: the best parent is copied into the new population.
    TreeId elite = parents[0];
    for (TreeId id : parents)
        if (archive.at(id).fitness_rmse < archive.at(elite).fitness_rmse) elite = id;
    {
        const TreeIndividual& e = archive.at(elite);
        next.push_back(archive.add(TreeIndividual{e.tree, e.fitness_rmse}, ds));
    }

    auto push_child = [&](ExpressionTree tree) {
        const double f = rmse_fitness(tree, ds);
        next.push_back(archive.add(TreeIndividual{std::move(tree), f}, ds));
    };

    while (next.size() < n) {
        if (rng.chance(opts.cx_prob)) {
            const ExpressionTree& p1 = archive.at(select(archive, parents, rng)).tree;
            const ExpressionTree& p2 = archive.at(select(archive, parents, rng)).tree;
            auto [c1, c2] = e_crossover(p1, p2, sim, rng, repair_count);
            push_child(apply_cap(std::move(c1), p1, opts.size_cap));
            if (next.size() < n) push_child(apply_cap(std::move(c2), p2, opts.size_cap));
        } else {
            const ExpressionTree& p = archive.at(select(archive, parents, rng)).tree;
            ExpressionTree c = e_mutation(p, opts.mutation_depth, rng);
            push_child(apply_cap(std::move(c), p, opts.size_cap));
        }
    }

    archive.set_live(next);
    return next;
}

}  // namespace egp
