#include "selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "egp/baselines.hpp"
#include "egp/dataset.hpp"
#include "egp/expr_tree.hpp"
#include "egp/forest.hpp"
#include "egp/stats.hpp"

namespace egp::tools {

namespace {

std::shared_ptr<const Bag> random_bag(std::size_t n_obs, std::size_t n_feat, Rng& rng) {
    Bag bag;
    const auto n_mask = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(n_feat)));
    for (std::size_t f : rng.sample_without_replacement(n_feat, n_mask))
        bag.feature_mask.push_back(static_cast<std::uint32_t>(f));
    const auto n = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(n_obs)));
    bag.obs_indices = rng.sample_without_replacement(n_obs, n);
    return std::make_shared<const Bag>(std::move(bag));
}

bool check_closure(Rng& rng) {
    const std::size_t n_feat = 12;
    FeatureSimilarity sim(n_feat, std::vector<double>(n_feat * n_feat, 0.5));
    for (int i = 0; i < 2000; ++i) {
        auto t1 = ramped_half_and_half(random_bag(30, n_feat, rng), {2, 5}, rng);
        auto t2 = ramped_half_and_half(random_bag(30, n_feat, rng), {2, 5}, rng);
        auto [c1, c2] = e_crossover(t1, t2, sim, rng);
        const auto m1 = e_mutation(c1, {0, 4}, rng);
        const auto m2 = e_mutation(c2, {0, 4}, rng);
        if (!c1.respects_mask() || !c2.respects_mask() || !m1.respects_mask() ||
            !m2.respects_mask())
            return false;
    }
    return true;
}

bool check_protected_eval(Rng& rng) {
    // unit semantics first
    auto bag = std::make_shared<const Bag>(Bag{{0}, {0, 1, 2}});
    const std::vector<double> div_row{5, 0, 0}, sqrt_row{-4, 0, 0}, log_row{1, 0, 0};
    if (ExpressionTree::parse_prefix("(/ x0 x1)", bag).eval(div_row) != 5) return false;
    if (ExpressionTree::parse_prefix("(sqrt x0)", bag).eval(sqrt_row) != -4) return false;
    if (ExpressionTree::parse_prefix("(log x0)", bag).eval(log_row) != 0) return false;
    const std::size_t n_feat = 6;
    std::vector<double> row(n_feat);
    for (int i = 0; i < 20000; ++i) {
        const auto tree = ramped_half_and_half(random_bag(10, n_feat, rng), {0, 6}, rng);
        for (auto& v : row) {
            const double scale = std::pow(10.0, rng.range(-12, 300));
            v = (rng.chance(0.5) ? 1 : -1) * rng.real01() * scale;
            if (rng.chance(0.05)) v = 0.0;
        }
        if (!std::isfinite(tree.eval(row))) return false;
    }
    return true;
}

bool check_voting_equivalence(Rng& rng) {
    for (int i = 0; i < 300; ++i) {
        const std::size_t rows = 1 + rng.index(20);
        const std::size_t members = 1 + rng.index(9);
        VoteMatrix v{rows, members, std::vector<std::uint8_t>(rows * members)};
        for (auto& b : v.votes) b = static_cast<std::uint8_t>(rng.index(2));
        const double c = 0.05 + 0.95 * rng.real01();
        CertaintyMatrix cm{rows, members, std::vector<double>(rows * members, c)};
        const auto weighted = weighted_vote(v, cm);
        Rng tie_rng(rng.u64());
        const auto majority = majority_vote(v, tie_rng);
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t ones = 0;
            for (auto b : v.row(r)) ones += b;
            if (2 * ones == members) {
                if (weighted[r] != 0) return false;  // weighted tie -> 0
            } else if (weighted[r] != majority[r]) {
                return false;
            }
        }
    }
    return true;
}

bool check_certainty(Rng& rng) {
    for (int i = 0; i < 2000; ++i) {
        const std::size_t n = 1 + rng.index(12);
        std::vector<double> preds(n);
        std::vector<std::uint8_t> votes(n);
        for (std::size_t k = 0; k < n; ++k) {
            preds[k] = (rng.chance(0.5) ? 1 : -1) * rng.real01() *
                       std::pow(10.0, rng.range(-6, 300));
            votes[k] = static_cast<std::uint8_t>(rng.index(2));
        }
        for (double c : certainty_row(preds, votes))
            if (!(c >= 0.0 && c <= 1.0)) return false;
    }
    for (std::size_t n = 1; n <= 9; ++n) {
        std::vector<double> preds(n, 1.75);  // residual 0.75 against vote 1
        std::vector<std::uint8_t> votes(n, 1);
        const double expected = 1.0 - 1.0 / std::sqrt(static_cast<double>(n));
        for (double c : certainty_row(preds, votes))
            if (std::fabs(c - expected) > 1e-12) return false;
    }
    return true;
}

// O(N^2) mid-ranks, independently of the library's sort-based path.
bool check_kruskal_wallis(Rng& rng) {
    for (int trial = 0; trial < 30; ++trial) {
        SampleSet s;
        const std::size_t k = 2 + rng.index(4);
        std::vector<double> pooled;
        for (std::size_t g = 0; g < k; ++g) {
            std::vector<double> group;
            const std::size_t n = 2 + rng.index(10);
            for (std::size_t i = 0; i < n; ++i) {
                const double v = static_cast<double>(rng.range(0, 8));  // heavy ties
                group.push_back(v);
                pooled.push_back(v);
            }
            s.names.push_back("g");
            s.groups.push_back(std::move(group));
        }
        const double n_total = static_cast<double>(pooled.size());
        double h = 0.0;
        for (const auto& group : s.groups) {
            double rank_sum = 0.0;
            for (double v : group) {
                double less = 0.0, equal = 0.0;
                for (double w : pooled) {
                    if (w < v) ++less;
                    if (w == v) ++equal;
                }
                rank_sum += less + (equal + 1.0) / 2.0;
            }
            h += rank_sum * rank_sum / static_cast<double>(group.size());
        }
        h = 12.0 / (n_total * (n_total + 1.0)) * h - 3.0 * (n_total + 1.0);
        double ties = 0.0;
        std::vector<double> sorted = pooled;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i);
            ties += t * t * t - t;
            i = j;
        }
        const double correction = 1.0 - ties / (n_total * n_total * n_total - n_total);
        const double expected = correction > 0 ? std::max(h / correction, 0.0) : 0.0;
        const KWResult kw = kruskal_wallis(s);
        if (std::fabs(kw.H - expected) > 1e-9) return false;
    }
    return true;
}

bool check_mahalanobis(Rng& rng) {
    const std::size_t dim = 3;
    ClassModel cm;
    cm.dim = dim;
    std::vector<double> centroids[2];
    for (int c = 0; c < 2; ++c) {
        cm.cls[c].centroid.resize(dim);
        for (auto& v : cm.cls[c].centroid) v = rng.real01() * 4 - 2;
        cm.cls[c].inv_cov.assign(dim * dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) cm.cls[c].inv_cov[i * dim + i] = 1.0;
        centroids[c] = cm.cls[c].centroid;
    }
    std::vector<double> point(dim);
    for (int i = 0; i < 300; ++i) {
        for (auto& v : point) v = rng.real01() * 8 - 4;
        double d2[2];
        for (int c = 0; c < 2; ++c) {
            d2[c] = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double diff = point[k] - centroids[c][k];
                d2[c] += diff * diff;
            }
        }
        const int expected = d2[0] <= d2[1] ? 0 : 1;
        if (mahalanobis_classify(cm, point, 1)[0] != expected) return false;
    }
    return true;
}

}  // namespace

int run_selftest(std::uint64_t seed) {
    struct Check {
        const char* name;
        bool (*fn)(Rng&);
    };
    const Check checks[] = {
        {"operator closure", check_closure},
        {"protected evaluation", check_protected_eval},
        {"voting equivalence", check_voting_equivalence},
        {"certainty bounds", check_certainty},
        {"kruskal-wallis cross-check", check_kruskal_wallis},
        {"mahalanobis reduction", check_mahalanobis},
    };
    int failures = 0;
    for (const Check& c : checks) {
        Rng rng(mix64(seed ^ fnv1a64(c.name)));
        const bool ok = c.fn(rng);
        std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", c.name);
        if (!ok) ++failures;
    }
    return failures;
}

}  // namespace egp::tools
