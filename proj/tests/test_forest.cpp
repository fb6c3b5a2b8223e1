#include <doctest.h>

#include <cmath>
#include <memory>
#include <set>

#include "egp/forest.hpp"

using namespace egp;

namespace {

// Dataset whose columns are exactly the member outputs we want: member k is
// the single-terminal tree x_k.
struct Fixture {
    Dataset ds;
    DataSplit sp;
    TreeArchive archive;
    std::vector<TreeId> ids;

    Fixture(std::size_t n_members, const std::vector<std::vector<double>>& columns,
            std::vector<int> labels) {
        const std::size_t n_rows = columns[0].size();
        ds.n_obs = n_rows;
        ds.n_feat = n_members;
        for (std::size_t r = 0; r < n_rows; ++r)
            for (std::size_t m = 0; m < n_members; ++m) ds.features.push_back(columns[m][r]);
        ds.labels = std::move(labels);
        for (std::size_t m = 0; m < n_members; ++m)
            ds.feature_names.push_back("x" + std::to_string(m));
        for (std::size_t r = 0; r < n_rows; ++r) sp.train_indices.push_back(r);

        archive = TreeArchive(sp.train_indices);
        for (std::size_t m = 0; m < n_members; ++m) {
            auto bag = std::make_shared<const Bag>(
                Bag{sp.train_indices, {static_cast<std::uint32_t>(m)}});
            auto tree = ExpressionTree::parse_prefix("x" + std::to_string(m), std::move(bag));
            ids.push_back(archive.add(TreeIndividual{std::move(tree), 0.0}, ds));
        }
        archive.set_live(ids);
    }

    Forest forest(std::vector<std::size_t> members) const {
        Forest f;
        for (std::size_t m : members) f.member_ids.push_back(ids[m]);
        return f;
    }
};

}  // namespace

TEST_CASE("member votes pick the nearest label, midpoint to 0") {
    Fixture fx(1, {{0.9, -3.0, 0.5, 0.51, 0.49}}, {1, 1, 1, 1, 1});
    const Forest f = fx.forest({0});
    const VoteMatrix v = member_votes(f, fx.archive, fx.ds, fx.sp.train_indices);
    CHECK(v.at(0, 0) == 1);
    CHECK(v.at(1, 0) == 0);
    CHECK(v.at(2, 0) == 0);  // exact midpoint
    CHECK(v.at(3, 0) == 1);
    CHECK(v.at(4, 0) == 0);
}

TEST_CASE("majority vote") {
    SUBCASE("clear majorities") {
        VoteMatrix v{2, 3, {1, 1, 0, 0, 0, 1}};
        Rng rng(1);
        const auto labels = majority_vote(v, rng);
        CHECK(labels[0] == 1);
        CHECK(labels[1] == 0);
    }
    SUBCASE("single member is the identity") {
        VoteMatrix v{2, 1, {1, 0}};
        Rng rng(2);
        const auto labels = majority_vote(v, rng);
        CHECK(labels[0] == 1);
        CHECK(labels[1] == 0);
    }
    SUBCASE("exact ties split about evenly at random") {
        VoteMatrix v{1, 2, {1, 0}};
        Rng rng(3);
        int ones = 0;
        const int trials = 2000;
        for (int i = 0; i < trials; ++i) ones += majority_vote(v, rng)[0];
        CHECK(ones > 900);
        CHECK(ones < 1100);
    }
}

TEST_CASE("certainty row") {
    SUBCASE("predictions exactly on the votes give full confidence") {
        const std::vector<double> preds{1.0, 0.0, 1.0};
        const std::vector<std::uint8_t> votes{1, 0, 1};
        for (double c : certainty_row(preds, votes)) CHECK(c == 1.0);
    }
    SUBCASE("equal residuals give 1 - 1/sqrt(n)") {
        for (std::size_t n : {1u, 2u, 3u, 4u, 9u}) {
            const std::vector<double> preds(n, 0.25);
            const std::vector<std::uint8_t> votes(n, 0);
            const double expected = 1.0 - 1.0 / std::sqrt(static_cast<double>(n));
            for (double c : certainty_row(preds, votes))
                CHECK(c == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    SUBCASE("single member with nonzero residual has certainty 0") {
        const std::vector<double> preds{0.2};
        const std::vector<std::uint8_t> votes{0};
        CHECK(certainty_row(preds, votes)[0] == doctest::Approx(0.0));
    }
    SUBCASE("stays in [0,1] even for huge predictions") {
        const std::vector<double> preds{1e308, -1e308, 0.5};
        const std::vector<std::uint8_t> votes{1, 0, 0};
        for (double c : certainty_row(preds, votes)) {
            CHECK(c >= 0.0);
            CHECK(c <= 1.0);
        }
    }
}

TEST_CASE("weighted vote") {
    SUBCASE("dominant certainty wins") {
        VoteMatrix v{1, 2, {1, 0}};
        CertaintyMatrix c{1, 2, {0.9, 0.1}};
        CHECK(weighted_vote(v, c)[0] == 1);
    }
    SUBCASE("exact certainty tie goes to class 0") {
        VoteMatrix v{1, 2, {1, 0}};
        CertaintyMatrix c{1, 2, {0.4, 0.4}};
        CHECK(weighted_vote(v, c)[0] == 0);
    }
    SUBCASE("zero total certainty goes to class 0") {
        VoteMatrix v{1, 2, {1, 1}};
        CertaintyMatrix c{1, 2, {0.0, 0.0}};
        CHECK(weighted_vote(v, c)[0] == 0);
    }
    SUBCASE("equal certainties reduce to majority voting off ties") {
        Rng rng(7);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t rows = 1 + rng.index(10);
            const std::size_t members = 1 + rng.index(7);
            VoteMatrix v{rows, members, std::vector<std::uint8_t>(rows * members)};
            for (auto& b : v.votes) b = static_cast<std::uint8_t>(rng.index(2));
            CertaintyMatrix c{rows, members,
                              std::vector<double>(rows * members, 0.1 + 0.9 * rng.real01())};
            const auto weighted = weighted_vote(v, c);
            Rng tie_rng(rng.u64());
            const auto majority = majority_vote(v, tie_rng);
            for (std::size_t r = 0; r < rows; ++r) {
                std::size_t ones = 0;
                for (auto b : v.row(r)) ones += b;
                if (2 * ones == members)
                    CHECK(weighted[r] == 0);
                else
                    CHECK(weighted[r] == majority[r]);
            }
        }
    }
}

TEST_CASE("accuracy fitness counts correct ensemble labels") {
    SUBCASE("always right and always wrong") {
        Fixture fx(1, {{1.0, 0.0, 1.0, 0.0}}, {1, 0, 1, 0});
        Rng rng(1);
        CHECK(accuracy_fitness(fx.forest({0}), fx.archive, fx.ds, fx.sp, Voting::Normal, rng) ==
              1.0);
        Fixture wrong(1, {{0.0, 1.0, 0.0, 1.0}}, {1, 0, 1, 0});
        CHECK(accuracy_fitness(wrong.forest({0}), wrong.archive, wrong.ds, wrong.sp,
                               Voting::Normal, rng) == 0.0);
    }
    SUBCASE("430 correct out of 478") {
        std::vector<double> col(478);
        std::vector<int> labels(478);
        for (std::size_t r = 0; r < 478; ++r) {
            labels[r] = static_cast<int>(r % 2);
            col[r] = r < 430 ? labels[r] : 1 - labels[r];
        }
        Fixture fx(1, {col}, labels);
        Rng rng(2);
        const double acc =
            accuracy_fitness(fx.forest({0}), fx.archive, fx.ds, fx.sp, Voting::Normal, rng);
        CHECK(acc == doctest::Approx(430.0 / 478.0).epsilon(1e-15));
        CHECK(acc == doctest::Approx(0.8996).epsilon(5e-4));
    }
}

TEST_CASE("forest operators") {
    Fixture fx(3, {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}}, {1, 0});

    SUBCASE("add grows the forest from the live set") {
        const Forest f = fx.forest({0});
        Rng rng(1);
        const Forest g = forest_mutation_add(f, fx.archive, rng);
        CHECK(g.member_ids.size() == 2);
        CHECK(g.member_ids[0] == fx.ids[0]);
        CHECK(fx.archive.contains(g.member_ids[1]));
    }
    SUBCASE("remove on a singleton is the identity") {
        const Forest f = fx.forest({1});
        Rng rng(2);
        const Forest g = forest_mutation_remove(f, rng);
        CHECK(g.member_ids == f.member_ids);
    }
    SUBCASE("remove drops exactly one member") {
        const Forest f = fx.forest({0, 1, 2});
        Rng rng(3);
        const Forest g = forest_mutation_remove(f, rng);
        CHECK(g.member_ids.size() == 2);
    }
    SUBCASE("swap exchanges one member and preserves the multiset") {
        const Forest f1 = fx.forest({0, 1});
        const Forest f2 = fx.forest({2});
        Rng rng(4);
        bool saw_a = false, saw_b = false;
        for (int i = 0; i < 100; ++i) {
            const auto [g1, g2] = forest_crossover_swap(f1, f2, rng);
            REQUIRE(g1.member_ids.size() == 2);
            REQUIRE(g2.member_ids.size() == 1);
            // g2 took one of f1's members; union stays {0,1,2}
            std::multiset<TreeId> combined(g1.member_ids.begin(), g1.member_ids.end());
            combined.insert(g2.member_ids.begin(), g2.member_ids.end());
            const std::multiset<TreeId> expected{fx.ids[0], fx.ids[1], fx.ids[2]};
            CHECK(combined == expected);
            if (g2.member_ids[0] == fx.ids[0]) saw_a = true;
            if (g2.member_ids[0] == fx.ids[1]) saw_b = true;
        }
        CHECK(saw_a);
        CHECK(saw_b);
    }
}

TEST_CASE("prune removes a duplicated member") {
    Fixture fx(1, {{1.0, 0.0, 1.0}}, {1, 0, 1});
    Forest f = fx.forest({0, 0});
    Rng rng(1);
    f.fitness_acc = accuracy_fitness(f, fx.archive, fx.ds, fx.sp, Voting::Normal, rng);
    const Forest pruned = prune_best(f, fx.archive, fx.ds, fx.sp, Voting::Normal, rng);
    CHECK(pruned.member_ids.size() == 1);
    CHECK(pruned.fitness_acc >= f.fitness_acc);
}

TEST_CASE("prune keeps a singleton unchanged") {
    Fixture fx(1, {{1.0, 0.0}}, {1, 0});
    Forest f = fx.forest({0});
    Rng rng(2);
    f.fitness_acc = accuracy_fitness(f, fx.archive, fx.ds, fx.sp, Voting::Normal, rng);
    const Forest pruned = prune_best(f, fx.archive, fx.ds, fx.sp, Voting::Normal, rng);
    CHECK(pruned.member_ids == f.member_ids);
}

namespace {

// Brute-force weighted voting, written independently of the library path.
std::vector<int> brute_weighted(const std::vector<std::vector<double>>& member_preds,
                                const std::vector<std::size_t>& members, std::size_t n_rows) {
    std::vector<int> labels(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        std::vector<double> residuals;
        std::vector<int> votes;
        for (std::size_t m : members) {
            const double p = member_preds[m][r];
            const int v = p > 0.5 ? 1 : 0;
            votes.push_back(v);
            residuals.push_back(std::fabs(p - v));
        }
        double norm = 0.0;
        for (double x : residuals) norm += x * x;
        norm = std::sqrt(norm);
        double zeros = 0.0, ones = 0.0;
        for (std::size_t k = 0; k < members.size(); ++k) {
            const double cert = norm == 0.0 ? 1.0 : 1.0 - residuals[k] / norm;
            (votes[k] ? ones : zeros) += cert;
        }
        labels[r] = zeros >= ones ? 0 : 1;
    }
    return labels;
}

double brute_accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

}  // namespace

TEST_CASE("prune keeps a forest whose members are all necessary") {
    // search for a weighted-voting configuration where every leave-one-out
    // strictly hurts, verified by brute force
    Rng rng(2024);
    const std::size_t n_rows = 9;
    bool found = false;
    for (int attempt = 0; attempt < 5000 && !found; ++attempt) {
        std::vector<std::vector<double>> cols(3, std::vector<double>(n_rows));
        std::vector<int> labels(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) {
            labels[r] = static_cast<int>(rng.index(2));
            for (auto& col : cols) col[r] = -0.2 + 1.4 * rng.real01();
        }
        const double full = brute_accuracy(brute_weighted(cols, {0, 1, 2}, n_rows), labels);
        const double without0 = brute_accuracy(brute_weighted(cols, {1, 2}, n_rows), labels);
        const double without1 = brute_accuracy(brute_weighted(cols, {0, 2}, n_rows), labels);
        const double without2 = brute_accuracy(brute_weighted(cols, {0, 1}, n_rows), labels);
        if (without0 < full && without1 < full && without2 < full) {
            found = true;
            Fixture fx(3, cols, labels);
            Forest f = fx.forest({0, 1, 2});
            Rng prune_rng(1);
            f.fitness_acc =
                accuracy_fitness(f, fx.archive, fx.ds, fx.sp, Voting::Weighted, prune_rng);
            CHECK(f.fitness_acc == doctest::Approx(full).epsilon(1e-15));
            const Forest pruned =
                prune_best(f, fx.archive, fx.ds, fx.sp, Voting::Weighted, prune_rng);
            CHECK(pruned.member_ids == f.member_ids);
        }
    }
    CHECK(found);
}

TEST_CASE("normal-voting fitness is deterministic given the tie seed") {
    // predictions sit exactly at 0.5 midpoints nowhere, but two members per
    // row force majority ties on disagreement rows
    Fixture fx(2, {{0.9, 0.1, 0.9, 0.1}, {0.1, 0.9, 0.9, 0.1}}, {1, 0, 1, 0});
    const Forest f = fx.forest({0, 1});
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng a(seed), b(seed);
        CHECK(accuracy_fitness(f, fx.archive, fx.ds, fx.sp, Voting::Normal, a) ==
              accuracy_fitness(f, fx.archive, fx.ds, fx.sp, Voting::Normal, b));
    }
}

TEST_CASE("prune never lowers cached accuracy and never empties") {
    Rng rng(31337);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n_members = 1 + rng.index(5);
        const std::size_t n_rows = 3 + rng.index(12);
        std::vector<std::vector<double>> cols(n_members, std::vector<double>(n_rows));
        std::vector<int> labels(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) {
            labels[r] = static_cast<int>(rng.index(2));
            for (auto& col : cols) col[r] = -0.5 + 2.0 * rng.real01();
        }
        Fixture fx(n_members, cols, labels);
        std::vector<std::size_t> members;
        const std::size_t size = 1 + rng.index(2 * n_members);
        for (std::size_t i = 0; i < size; ++i) members.push_back(rng.index(n_members));
        Forest f = fx.forest(members);
        const Voting mode = trial % 2 ? Voting::Normal : Voting::Weighted;
        f.fitness_acc = accuracy_fitness(f, fx.archive, fx.ds, fx.sp, mode, rng);
        const double before = f.fitness_acc;
        const Forest pruned = prune_best(f, fx.archive, fx.ds, fx.sp, mode, rng);
        CHECK(pruned.member_ids.size() >= 1);
        CHECK(pruned.fitness_acc >= before);
    }
}
