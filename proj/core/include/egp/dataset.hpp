#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "egp/rng.hpp"

namespace egp {

/// Raised for anything wrong with input data: unreadable files, cells that
/// do not parse, label columns that are not binary. The CLI maps this to
/// exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numeric feature matrix with binary labels.
struct Dataset {
    std::vector<double> features;  // row-major, n_obs x n_feat
    std::vector<int> labels;       // each 0 or 1, both classes present
    std::vector<std::string> feature_names;
    std::size_t n_obs = 0;
    std::size_t n_feat = 0;

    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * n_feat, n_feat};
    }

    /// Throws DataError if any structural invariant is broken.
    void validate() const;
};

struct CsvOptions {
    bool has_header = true;
    /// Label column: a name (requires a header) or a 0-based column index.
    std::string label_column = "-1";  // "-1" selects the last column
};

/// Load a comma-separated file. The two raw label values are mapped to 0/1
/// with the smaller one (numeric when both parse as numbers, lexicographic
/// otherwise) becoming class 0.
Dataset load_csv(const std::string& path, const CsvOptions& opts = {});

/// 70/30 train-test partition. Both index vectors are sorted.
struct DataSplit {
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Uniform random partition with |train| = round(0.70 * n_obs).
DataSplit split(const Dataset& ds, Rng& rng);

/// How a tree's training subsample is drawn.
enum class BagMode {
    FixedObs,       // 60% of training observations, all features
    RandomObsFeat,  // uniform sizes in [1,|train|] x [1,n_feat], then uniform members
    FullData,       // all training observations, all features
};

/// The observation/feature subsample a tree is restricted to.
/// obs_indices are dataset row ids (a subset of the training partition);
/// feature_mask holds feature indices. Both sorted, no duplicates.
struct Bag {
    std::vector<std::size_t> obs_indices;
    std::vector<std::uint32_t> feature_mask;
};

Bag sample_bag(const DataSplit& sp, std::size_t n_feat, BagMode mode, Rng& rng);

/// Pairwise feature similarity over the training partition, computed as
/// sum_k |x_k||y_k| / (l2(x) l2(y)). All entries are in [0,1]; a zero-norm
/// column has similarity 0 against everything, including itself.
class FeatureSimilarity {
public:
    FeatureSimilarity() = default;
    FeatureSimilarity(std::size_t n_feat, std::vector<double> sim)
        : n_(n_feat), sim_(std::move(sim)) {}

    double operator()(std::size_t i, std::size_t j) const { return sim_[i * n_ + j]; }
    std::size_t size() const { return n_; }

private:
    std::size_t n_ = 0;
    std::vector<double> sim_;
};

FeatureSimilarity feature_similarity(const Dataset& ds, const DataSplit& sp);

}  // namespace egp
