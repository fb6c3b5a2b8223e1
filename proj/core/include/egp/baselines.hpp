#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "egp/dataset.hpp"
#include "egp/expr_tree.hpp"
#include "egp/tree_pop.hpp"

namespace egp {

/// Standard GP baseline: one tree per individual, RMSE fitness over the full
/// training partition, double-tournament selection, 0.95/0.05 operators.
struct GPConfig {
    std::size_t population = 500;
    unsigned generations = 100;
    double cx_prob = 0.95;
    unsigned tournament_k = 5;
    double parsimony_prob = 0.7;
    DepthRange init_depth{2, 6};
    DepthRange mutation_depth{0, 4};
    std::uint64_t seed = 0;
};

struct GPModel {
    ExpressionTree tree;
    double train_rmse = 0.0;
    double train_accuracy = 0.0;
    DataSplit split;
    std::vector<double> best_rmse_trace;  // one entry per generation, index 0 = initial

    std::string to_json() const;
};

GPModel gp_train(const Dataset& ds, const GPConfig& cfg);

/// Predicted outputs are mapped to the closest numeric class label.
std::vector<int> gp_predict(const GPModel& m, const Dataset& ds, std::span<const std::size_t> rows);

/// A multidimensional individual: each dimension is an unrestricted tree
/// acting as a learned hyperfeature.
struct M3GPIndividual {
    std::vector<ExpressionTree> dimensions;
    double fitness_acc = -1.0;

    std::size_t total_nodes() const {
        std::size_t n = 0;
        for (const auto& t : dimensions) n += t.node_count();
        return n;
    }
};

/// Row-major matrix of mapped points (n_rows x dims): column j holds the
/// outputs of dimension j.
std::vector<double> m3gp_map(const M3GPIndividual& ind, const Dataset& ds,
                             std::span<const std::size_t> rows);

/// Per-class Gaussian summary of the mapped training points. inv_cov is the
/// inverse of the regularized covariance; when that inverse is unusable the
/// class falls back to Euclidean distance (inv_cov = identity). A class with
/// no training points is never predicted.
struct ClassGaussian {
    std::vector<double> centroid;  // length dim
    std::vector<double> inv_cov;   // row-major dim x dim
    bool euclidean_fallback = false;
    bool empty = false;
};

struct ClassModel {
    std::size_t dim = 0;
    ClassGaussian cls[2];
};

/// Fit centroid + regularized covariance per class over the mapped rows.
ClassModel fit_class_model(const std::vector<double>& mapped, std::size_t n_rows, std::size_t dim,
                           std::span<const int> labels);

/// Class of the closest centroid by Mahalanobis distance; exact ties pick
/// class 0.
std::vector<int> mahalanobis_classify(const ClassModel& cm, const std::vector<double>& mapped,
                                      std::size_t n_rows);

struct M3GPConfig {
    std::size_t population = 500;
    unsigned generations = 100;
    double cx_prob = 0.5;  // then subtree-crossover vs dimension-swap, equal odds
    unsigned tournament_k = 5;
    double parsimony_prob = 0.7;
    DepthRange init_depth{2, 6};
    DepthRange mutation_depth{0, 4};
    DepthRange new_dim_depth{0, 4};
    std::uint64_t seed = 0;
};

struct M3GPModel {
    M3GPIndividual best;
    ClassModel class_model;
    double train_accuracy = 0.0;
    DataSplit split;
    std::vector<double> best_acc_trace;

    std::string to_json() const;
};

M3GPModel m3gp_train(const Dataset& ds, const M3GPConfig& cfg);

std::vector<int> m3gp_predict(const M3GPModel& m, const Dataset& ds,
                              std::span<const std::size_t> rows);

}  // namespace egp
