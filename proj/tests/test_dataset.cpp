#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "egp/dataset.hpp"

using namespace egp;

namespace {

// Writes a synthetic CSV shaped like a named dataset and returns its path.
std::string write_csv(const std::string& name, std::size_t n_obs, std::size_t n_feat,
                      std::size_t n_positive, bool header = true) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream os(path);
    if (header) {
        for (std::size_t f = 0; f < n_feat; ++f) os << "f" << f << ",";
        os << "class\n";
    }
    for (std::size_t r = 0; r < n_obs; ++r) {
        for (std::size_t f = 0; f < n_feat; ++f) os << (0.1 * static_cast<double>(r + f)) << ",";
        os << (r < n_positive ? 1 : 0) << "\n";
    }
    return path.string();
}

std::string write_raw(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream os(path);
    os << content;
    return path.string();
}

}  // namespace

TEST_CASE("load_csv reads a BCW-shaped file") {
    const auto path = write_csv("egp_bcw.csv", 683, 11, 444);
    const Dataset ds = load_csv(path, {true, "class"});
    CHECK(ds.n_obs == 683);
    CHECK(ds.n_feat == 11);
    CHECK(ds.feature_names.size() == 11);
}

TEST_CASE("load_csv reads a HEART-shaped file with ~55% positives") {
    const auto path = write_csv("egp_heart.csv", 270, 13, 148);
    const Dataset ds = load_csv(path, {true, "-1"});
    CHECK(ds.n_obs == 270);
    CHECK(ds.n_feat == 13);
    double positive = 0;
    for (int y : ds.labels) positive += y;
    CHECK(std::fabs(positive / 270.0 - 0.55) < 0.01);
}

TEST_CASE("label values map with the smaller one to class 0") {
    SUBCASE("lexicographic for text labels") {
        const auto path = write_raw("egp_ab.csv", "x,y\n1.0,B\n2.0,A\n");
        const Dataset ds = load_csv(path, {true, "y"});
        CHECK(ds.labels[0] == 1);  // B
        CHECK(ds.labels[1] == 0);  // A
    }
    SUBCASE("numeric for numeric labels") {
        const auto path = write_raw("egp_num.csv", "x,y\n1.0,5\n2.0,-2\n");
        const Dataset ds = load_csv(path, {true, "y"});
        CHECK(ds.labels[0] == 1);  // 5
        CHECK(ds.labels[1] == 0);  // -2
    }
}

TEST_CASE("load_csv accepts headerless files and index selectors") {
    const auto path = write_raw("egp_nohdr.csv", "1.0,2.0,0\n3.0,4.0,1\n");
    const Dataset ds = load_csv(path, {false, "2"});
    CHECK(ds.n_feat == 2);
    CHECK(ds.labels[0] == 0);
    CHECK(ds.labels[1] == 1);
    CHECK(ds.feature_names[0] == "x0");
}

TEST_CASE("load_csv rejects malformed inputs") {
    CHECK_THROWS_AS(load_csv("/nonexistent/file.csv", {}), DataError);

    const auto empty = write_raw("egp_empty.csv", "");
    CHECK_THROWS_AS(load_csv(empty, {}), DataError);

    const auto one_class = write_raw("egp_one.csv", "x,y\n1,0\n2,0\n");
    CHECK_THROWS_AS(load_csv(one_class, {true, "y"}), DataError);

    const auto three_class = write_raw("egp_three.csv", "x,y\n1,0\n2,1\n3,2\n");
    CHECK_THROWS_AS(load_csv(three_class, {true, "y"}), DataError);

    const auto bad_cell = write_raw("egp_bad.csv", "x,y\n1,0\nfoo,1\n");
    CHECK_THROWS_WITH_AS(load_csv(bad_cell, {true, "y"}),
                         doctest::Contains("row 3"), DataError);

    const auto missing_col = write_raw("egp_col.csv", "x,y\n1,0\n2,1\n");
    CHECK_THROWS_AS(load_csv(missing_col, {true, "zzz"}), DataError);
}

TEST_CASE("split honors the 70/30 partition") {
    Dataset ds;
    SUBCASE("10 observations -> 7 train, 3 test") {
        ds.n_obs = 10;
        ds.n_feat = 1;
        ds.features.assign(10, 0.0);
        ds.labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
        ds.feature_names = {"x0"};
        Rng rng(1);
        const DataSplit sp = split(ds, rng);
        CHECK(sp.train_indices.size() == 7);
        CHECK(sp.test_indices.size() == 3);
    }
    SUBCASE("683 observations -> 478 train") {
        ds.n_obs = 683;
        ds.n_feat = 1;
        ds.features.assign(683, 0.0);
        ds.labels.assign(683, 0);
        ds.labels[0] = 1;
        ds.feature_names = {"x0"};
        Rng rng(1);
        const DataSplit sp = split(ds, rng);
        CHECK(sp.train_indices.size() == 478);
        CHECK(sp.test_indices.size() == 205);
    }
}

TEST_CASE("split is a disjoint cover and deterministic per seed") {
    Dataset ds;
    ds.n_obs = 101;
    ds.n_feat = 1;
    ds.features.assign(101, 0.0);
    ds.labels.assign(101, 0);
    ds.labels[50] = 1;
    ds.feature_names = {"x0"};

    Rng r1(77), r2(77), r3(78);
    const DataSplit a = split(ds, r1);
    const DataSplit b = split(ds, r2);
    const DataSplit c = split(ds, r3);
    CHECK(a.train_indices == b.train_indices);
    CHECK(a.test_indices == b.test_indices);
    CHECK(a.train_indices != c.train_indices);

    std::set<std::size_t> all(a.train_indices.begin(), a.train_indices.end());
    for (std::size_t t : a.test_indices) {
        CHECK(all.count(t) == 0);
        all.insert(t);
    }
    CHECK(all.size() == 101);
}

namespace {

DataSplit make_split(std::size_t n_train, std::size_t n_test) {
    DataSplit sp;
    for (std::size_t i = 0; i < n_train; ++i) sp.train_indices.push_back(i);
    for (std::size_t i = 0; i < n_test; ++i) sp.test_indices.push_back(n_train + i);
    return sp;
}

}  // namespace

TEST_CASE("sample_bag option 1 takes 60% of observations with all features") {
    const DataSplit sp = make_split(478, 205);
    Rng rng(9);
    const Bag bag = sample_bag(sp, 11, BagMode::FixedObs, rng);
    CHECK(bag.obs_indices.size() == 287);  // round(0.6 * 478)
    CHECK(bag.feature_mask.size() == 11);
    std::set<std::size_t> uniq(bag.obs_indices.begin(), bag.obs_indices.end());
    CHECK(uniq.size() == bag.obs_indices.size());
    for (std::size_t i : bag.obs_indices) CHECK(i < 478);
}

TEST_CASE("sample_bag FullData is the identity bag") {
    const DataSplit sp = make_split(10, 4);
    Rng rng(2);
    const Bag bag = sample_bag(sp, 3, BagMode::FullData, rng);
    CHECK(bag.obs_indices == sp.train_indices);
    CHECK(bag.feature_mask == std::vector<std::uint32_t>{0, 1, 2});
}

TEST_CASE("sample_bag option 2 stays within its size bounds") {
    const DataSplit sp = make_split(5, 2);
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        const Bag bag = sample_bag(sp, 3, BagMode::RandomObsFeat, rng);
        CHECK(bag.obs_indices.size() >= 1);
        CHECK(bag.obs_indices.size() <= 5);
        CHECK(bag.feature_mask.size() >= 1);
        CHECK(bag.feature_mask.size() <= 3);
        for (std::size_t o : bag.obs_indices) CHECK(o < 5);
        for (auto f : bag.feature_mask) CHECK(f < 3);
    }
}

TEST_CASE("option 1 bags include each observation with frequency near 0.6") {
    const DataSplit sp = make_split(50, 20);
    Rng rng(123);
    std::vector<int> hits(50, 0);
    const int draws = 2000;
    for (int i = 0; i < draws; ++i) {
        const Bag bag = sample_bag(sp, 4, BagMode::FixedObs, rng);
        for (std::size_t o : bag.obs_indices) ++hits[o];
    }
    for (int h : hits) {
        const double freq = static_cast<double>(h) / draws;
        CHECK(freq > 0.5);
        CHECK(freq < 0.7);
    }
}

namespace {

Dataset two_column_dataset(std::vector<double> col0, std::vector<double> col1) {
    Dataset ds;
    ds.n_obs = col0.size();
    ds.n_feat = 2;
    for (std::size_t r = 0; r < ds.n_obs; ++r) {
        ds.features.push_back(col0[r]);
        ds.features.push_back(col1[r]);
    }
    ds.labels.assign(ds.n_obs, 0);
    ds.labels[0] = 1;
    ds.feature_names = {"a", "b"};
    return ds;
}

}  // namespace

TEST_CASE("feature similarity follows the magnitude cosine") {
    SUBCASE("identical direction is 1") {
        const Dataset ds = two_column_dataset({1, 2, 3}, {2, 4, 6});
        const DataSplit sp = make_split(3, 0);
        const FeatureSimilarity sim = feature_similarity(ds, sp);
        CHECK(sim(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(sim(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(sim(1, 0) == sim(0, 1));
    }
    SUBCASE("orthogonal columns give 0") {
        const Dataset ds = two_column_dataset({1, 0}, {0, 1});
        const DataSplit sp = make_split(2, 0);
        const FeatureSimilarity sim = feature_similarity(ds, sp);
        CHECK(sim(0, 1) == doctest::Approx(0.0));
    }
    SUBCASE("signs are ignored: (1,-1) vs (1,1) is 1") {
        const Dataset ds = two_column_dataset({1, -1}, {1, 1});
        const DataSplit sp = make_split(2, 0);
        const FeatureSimilarity sim = feature_similarity(ds, sp);
        CHECK(sim(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("zero-norm column is 0 against everything") {
        const Dataset ds = two_column_dataset({0, 0}, {1, 2});
        const DataSplit sp = make_split(2, 0);
        const FeatureSimilarity sim = feature_similarity(ds, sp);
        CHECK(sim(0, 0) == 0.0);
        CHECK(sim(0, 1) == 0.0);
        CHECK(sim(1, 1) == 1.0);
    }
}

TEST_CASE("similarity is symmetric, bounded and diagonal-dominant") {
    Dataset ds;
    ds.n_obs = 20;
    ds.n_feat = 5;
    Rng rng(31);
    for (std::size_t i = 0; i < ds.n_obs * ds.n_feat; ++i)
        ds.features.push_back(rng.real01() * 10 - 5);
    ds.labels.assign(20, 0);
    ds.labels[1] = 1;
    ds.feature_names = {"a", "b", "c", "d", "e"};
    const DataSplit sp = make_split(20, 0);
    const FeatureSimilarity sim = feature_similarity(ds, sp);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(sim(i, i) == 1.0);
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(sim(i, j) == sim(j, i));
            CHECK(std::fabs(sim(i, j)) <= 1.0 + 1e-12);
            CHECK(sim(i, i) >= sim(i, j));
        }
    }
}
