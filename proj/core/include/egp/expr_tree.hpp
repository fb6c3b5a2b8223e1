#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "egp/dataset.hpp"
#include "egp/rng.hpp"

namespace egp {

/// Node operators. Arithmetic and division are binary, log/sqrt unary,
/// Var is a terminal holding a feature index. There are no constants.
enum class Op : std::uint8_t { Add, Sub, Mul, Div, Log, Sqrt, Var };

constexpr int arity(Op op) {
    switch (op) {
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Log:
        case Op::Sqrt: return 1;
        case Op::Var: return 0;
    }
    return 0;
}

struct TreeNode {
    Op op;
    std::uint32_t var = 0;   // feature index, meaningful when op == Var
    std::uint32_t size = 1;  // nodes in the subtree rooted here, incl. self
};

struct TreeMetrics {
    std::size_t node_count;
    std::size_t depth;  // single terminal has depth 0
};

struct DepthRange {
    unsigned min;
    unsigned max;
};

/// A GP program stored as a preorder (prefix) node array. A subtree is a
/// contiguous range [i, i + nodes[i].size), which keeps the genetic
/// operators simple splices.
///
/// Trees are immutable values; operators build new trees. Each tree keeps a
/// shared reference to the Bag it inherited, which fixes the feature set
/// its terminals may use.
class ExpressionTree {
public:
    ExpressionTree(std::vector<TreeNode> nodes, std::shared_ptr<const Bag> bag);

    /// Protected bottom-up evaluation:
    ///   x/0 -> x, log(y<=0) -> y, sqrt(y<0) -> y,
    /// and every intermediate saturates to +-DBL_MAX, so the result is
    /// finite for any finite row.
    double eval(std::span<const double> row) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t depth() const;

    std::span<const TreeNode> nodes() const { return nodes_; }
    const Bag& bag() const { return *bag_; }
    const std::shared_ptr<const Bag>& bag_ptr() const { return bag_; }

    /// All terminal feature indices lie in the tree's own mask.
    bool respects_mask() const;

    bool same_structure(const ExpressionTree& other) const;

    /// Canonical prefix form, e.g. "(/ (+ x0 x1) (sqrt x2))".
    std::string to_prefix() const;
    static ExpressionTree parse_prefix(std::string_view text, std::shared_ptr<const Bag> bag);

private:
    std::vector<TreeNode> nodes_;
    std::shared_ptr<const Bag> bag_;
};

TreeMetrics metrics(const ExpressionTree& tree);

/// Ramped half-and-half: grow or full with p=0.5, target depth uniform in
/// depth_range, terminals uniform over the bag's feature mask.
ExpressionTree ramped_half_and_half(std::shared_ptr<const Bag> bag, DepthRange depth_range,
                                    Rng& rng);

/// Grow-method subtree used by mutation and by M3GP dimension creation.
ExpressionTree grow_tree(std::shared_ptr<const Bag> bag, DepthRange depth_range, Rng& rng);

/// Swap the subtrees rooted at the given node indices. Offspring keep the
/// bag of the parent that provided their root. No terminal repair.
std::pair<ExpressionTree, ExpressionTree> crossover_at(const ExpressionTree& p1,
                                                       const ExpressionTree& p2,
                                                       std::size_t point1, std::size_t point2);

/// Standard subtree crossover: both points uniform over all nodes.
std::pair<ExpressionTree, ExpressionTree> subtree_crossover(const ExpressionTree& p1,
                                                            const ExpressionTree& p2, Rng& rng);

/// Protected crossover: subtree crossover followed by terminal repair on the
/// received branch. Every terminal not allowed by the inheriting parent's
/// mask is replaced by the legal feature most similar to it (ties -> lowest
/// index). With full masks this is exactly subtree_crossover.
/// If repair_count is given, it is incremented once per replaced terminal.
std::pair<ExpressionTree, ExpressionTree> e_crossover(const ExpressionTree& p1,
                                                      const ExpressionTree& p2,
                                                      const FeatureSimilarity& sim, Rng& rng,
                                                      std::size_t* repair_count = nullptr);

/// Protected mutation: a uniform random node is replaced by a grow-method
/// subtree built only from the parent's mask.
ExpressionTree e_mutation(const ExpressionTree& p, DepthRange depth_range, Rng& rng);

}  // namespace egp
