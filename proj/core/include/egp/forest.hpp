#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "egp/dataset.hpp"
#include "egp/tree_pop.hpp"

namespace egp {

enum class Voting { Normal, Weighted };

/// An ensemble individual: an ordered multiset of archive tree ids plus its
/// cached training accuracy. fitness_acc < 0 means "not evaluated yet".
struct Forest {
    std::vector<TreeId> member_ids;
    double fitness_acc = -1.0;
};

/// Per-(row, member) class votes, row-major.
struct VoteMatrix {
    std::size_t n_rows = 0;
    std::size_t n_members = 0;
    std::vector<std::uint8_t> votes;

    std::uint8_t at(std::size_t r, std::size_t m) const { return votes[r * n_members + m]; }
    std::span<const std::uint8_t> row(std::size_t r) const {
        return {votes.data() + r * n_members, n_members};
    }
};

/// Per-(row, member) certainties in [0,1], row-major.
struct CertaintyMatrix {
    std::size_t n_rows = 0;
    std::size_t n_members = 0;
    std::vector<double> cert;

    std::span<const double> row(std::size_t r) const {
        return {cert.data() + r * n_members, n_members};
    }
};

/// Raw member outputs for the given dataset rows (rows x members). Uses the
/// archive's cached outputs when `rows` is exactly the cached row set.
std::vector<double> member_predictions(const Forest& f, const TreeArchive& archive,
                                       const Dataset& ds, std::span<const std::size_t> rows);

/// Nearest-label votes: 1 iff the output is closer to 1 than to 0. The exact
/// midpoint 0.5 votes 0.
VoteMatrix member_votes(const Forest& f, const TreeArchive& archive, const Dataset& ds,
                        std::span<const std::size_t> rows);

inline int nearest_label(double output) { return output > 0.5 ? 1 : 0; }

/// Per-row majority; an exact tie picks a uniform random label.
std::vector<int> majority_vote(const VoteMatrix& v, Rng& rng);

/// Certainties for one row: residuals r_k = |prediction_k - vote_k| are L2
/// normalized and certainty_k = 1 - r_k / l2(r). A zero residual vector
/// yields all-ones. Every entry is in [0,1].
std::vector<double> certainty_row(std::span<const double> predictions,
                                  std::span<const std::uint8_t> votes);

/// Per row, sum certainties of members voting each class; class 0 wins ties
/// (zeros/(zeros+ones) >= ones/(zeros+ones) -> 0), and a row with zero total
/// certainty returns 0.
std::vector<int> weighted_vote(const VoteMatrix& v, const CertaintyMatrix& c);

/// Ensemble label per row under the given voting mode.
std::vector<int> ensemble_labels(const Forest& f, const TreeArchive& archive, const Dataset& ds,
                                 std::span<const std::size_t> rows, Voting mode, Rng& rng);

/// Fraction of training rows (all of them, not just any bag) where the
/// ensemble label equals the true label.
double accuracy_fitness(const Forest& f, const TreeArchive& archive, const Dataset& ds,
                        const DataSplit& sp, Voting mode, Rng& rng);

/// Append a uniform random live tree from the archive.
Forest forest_mutation_add(const Forest& f, const TreeArchive& archive, Rng& rng);

/// Remove a uniform member; a singleton forest is returned unchanged.
Forest forest_mutation_remove(const Forest& f, Rng& rng);

/// Exchange one uniform member between the two forests.
std::pair<Forest, Forest> forest_crossover_swap(const Forest& f1, const Forest& f2, Rng& rng);

/// Single left-to-right pass: tentatively drop each member and keep the
/// removal iff training accuracy does not decrease. Never empties the
/// forest. The returned forest carries its (re)measured fitness, which is
/// never below the input's cached fitness.
Forest prune_best(const Forest& f, const TreeArchive& archive, const Dataset& ds,
                  const DataSplit& sp, Voting mode, Rng& rng);

}  // namespace egp
