#include "egp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "egp/forest.hpp"
#include "egp/selection.hpp"

namespace egp {

namespace {

double nearest_label_accuracy(const ExpressionTree& tree, const Dataset& ds,
                              std::span<const std::size_t> rows) {
    std::size_t correct = 0;
    for (std::size_t r : rows)
        if (nearest_label(tree.eval(ds.row(r))) == ds.labels[r]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace

GPModel gp_train(const Dataset& ds, const GPConfig& cfg) {
    ds.validate();
    Rng rng(cfg.seed);
    DataSplit sp = split(ds, rng);

    // Full-data bags: every tree sees all training rows and all features,
    // so the protected operators behave exactly like the standard ones and
    // the similarity table is never consulted.
    auto bag = std::make_shared<const Bag>(sample_bag(sp, ds.n_feat, BagMode::FullData, rng));
    FeatureSimilarity sim;

    TreeArchive archive;
    std::vector<TreeId> live;
    live.reserve(cfg.population);
    for (std::size_t i = 0; i < cfg.population; ++i) {
        ExpressionTree tree = ramped_half_and_half(bag, cfg.init_depth, rng);
        const double f = rmse_fitness(tree, ds);
        live.push_back(archive.add(TreeIndividual{std::move(tree), f}, ds));
    }
    archive.set_live(std::move(live));

    auto best_of = [&](std::span<const TreeId> ids) {
        TreeId best = ids[0];
        for (TreeId id : ids)
            if (archive.at(id).fitness_rmse < archive.at(best).fitness_rmse) best = id;
        return best;
    };

    GPModel model{archive.at(best_of(archive.live())).tree, 0.0, 0.0, sp, {}};
    model.best_rmse_trace.push_back(archive.at(best_of(archive.live())).fitness_rmse);

    const BreedOptions opts{cfg.cx_prob, cfg.mutation_depth, std::nullopt};
    const TreeSelector select =
        make_double_tournament_selector(cfg.tournament_k, cfg.parsimony_prob);
    for (unsigned g = 0; g < cfg.generations; ++g) {
        breed_generation(archive, ds, sim, opts, select, rng);
        archive.collect({});
        model.best_rmse_trace.push_back(archive.at(best_of(archive.live())).fitness_rmse);
    }

    const TreeId best = best_of(archive.live());
    model.tree = archive.at(best).tree;
    model.train_rmse = archive.at(best).fitness_rmse;
    model.train_accuracy = nearest_label_accuracy(model.tree, ds, sp.train_indices);
    return model;
}

std::vector<int> gp_predict(const GPModel& m, const Dataset& ds,
                            std::span<const std::size_t> rows) {
    std::vector<int> labels;
    labels.reserve(rows.size());
    for (std::size_t r : rows) labels.push_back(nearest_label(m.tree.eval(ds.row(r))));
    return labels;
}

std::string GPModel::to_json() const {
    nlohmann::json j;
    j["method"] = "GP";
    j["tree"] = tree.to_prefix();
    j["train_rmse"] = train_rmse;
    j["train_accuracy"] = train_accuracy;
    return j.dump(2);
}

std::vector<double> m3gp_map(const M3GPIndividual& ind, const Dataset& ds,
                             std::span<const std::size_t> rows) {
    const std::size_t d = ind.dimensions.size();
    std::vector<double> mapped(rows.size() * d);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t r = 0; r < rows.size(); ++r)
            mapped[r * d + j] = ind.dimensions[j].eval(ds.row(rows[r]));
    return mapped;
}

ClassModel fit_class_model(const std::vector<double>& mapped, std::size_t n_rows, std::size_t dim,
                           std::span<const int> labels) {
    if (labels.size() != n_rows) throw std::invalid_argument("fit_class_model: label size mismatch");
    ClassModel cm;
    cm.dim = dim;
    const auto nd = static_cast<Eigen::Index>(dim);

    for (int c = 0; c < 2; ++c) {
        ClassGaussian& g = cm.cls[c];
        std::vector<std::size_t> members;
        for (std::size_t r = 0; r < n_rows; ++r)
            if (labels[r] == c) members.push_back(r);
        if (members.empty()) {
            g.empty = true;
            g.centroid.assign(dim, 0.0);
            continue;
        }

        Eigen::VectorXd mu = Eigen::VectorXd::Zero(nd);
        for (std::size_t r : members)
            mu += Eigen::Map<const Eigen::VectorXd>(mapped.data() + r * dim, nd);
        mu /= static_cast<double>(members.size());

        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(nd, nd);
        if (members.size() > 1) {
            for (std::size_t r : members) {
                const Eigen::VectorXd diff =
                    Eigen::Map<const Eigen::VectorXd>(mapped.data() + r * dim, nd) - mu;
                cov += diff * diff.transpose();
            }
            cov /= static_cast<double>(members.size() - 1);
        }

        // Regularize toward invertibility; dimensions can outnumber the
        // class sample count.
        const double eps = 1e-8 * std::max(cov.trace() / static_cast<double>(dim), 1.0);
        cov += eps * Eigen::MatrixXd::Identity(nd, nd);

        Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
        bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
        Eigen::MatrixXd inv;
        if (ok) {
            inv = ldlt.solve(Eigen::MatrixXd::Identity(nd, nd));
            ok = inv.allFinite();
        }
        if (!ok) {
            g.euclidean_fallback = true;
            inv = Eigen::MatrixXd::Identity(nd, nd);
        }

        g.centroid.assign(mu.data(), mu.data() + dim);
        g.inv_cov.assign(inv.data(), inv.data() + dim * dim);
    }
    return cm;
}

namespace {

double mahalanobis_sq(const ClassGaussian& g, const double* z, std::size_t dim) {
    double total = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double di = z[i] - g.centroid[i];
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) acc += g.inv_cov[i * dim + j] * (z[j] - g.centroid[j]);
        total += di * acc;
    }
    return total;
}

}  // namespace

std::vector<int> mahalanobis_classify(const ClassModel& cm, const std::vector<double>& mapped,
                                      std::size_t n_rows) {
    std::vector<int> labels(n_rows);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* z = mapped.data() + r * cm.dim;
        double dist[2];
        for (int c = 0; c < 2; ++c)
            dist[c] = cm.cls[c].empty ? std::numeric_limits<double>::infinity()
                                      : mahalanobis_sq(cm.cls[c], z, cm.dim);
        labels[r] = dist[0] <= dist[1] ? 0 : 1;
    }
    return labels;
}

namespace {

struct M3GPEval {
    double accuracy;
    ClassModel cm;
};

M3GPEval evaluate_m3gp(const M3GPIndividual& ind, const Dataset& ds,
                       std::span<const std::size_t> train_rows,
                       const std::vector<int>& train_labels) {
    const auto mapped = m3gp_map(ind, ds, train_rows);
    ClassModel cm = fit_class_model(mapped, train_rows.size(), ind.dimensions.size(), train_labels);
    const auto predicted = mahalanobis_classify(cm, mapped, train_rows.size());
    std::size_t correct = 0;
    for (std::size_t r = 0; r < train_rows.size(); ++r)
        if (predicted[r] == train_labels[r]) ++correct;
    return {static_cast<double>(correct) / static_cast<double>(train_rows.size()), std::move(cm)};
}

// Drop dimensions that do not improve training accuracy; single
// left-to-right pass, never below one dimension.
M3GPIndividual prune_m3gp(M3GPIndividual ind, const Dataset& ds,
                          std::span<const std::size_t> train_rows,
                          const std::vector<int>& train_labels) {
    std::size_t i = 0;
    while (i < ind.dimensions.size() && ind.dimensions.size() > 1) {
        M3GPIndividual candidate{ind.dimensions, -1.0};
        candidate.dimensions.erase(candidate.dimensions.begin() + static_cast<std::ptrdiff_t>(i));
        candidate.fitness_acc = evaluate_m3gp(candidate, ds, train_rows, train_labels).accuracy;
        if (candidate.fitness_acc >= ind.fitness_acc)
            ind = std::move(candidate);
        else
            ++i;
    }
    return ind;
}

}  // namespace

M3GPModel m3gp_train(const Dataset& ds, const M3GPConfig& cfg) {
    ds.validate();
    Rng rng(cfg.seed);
    DataSplit sp = split(ds, rng);
    auto bag = std::make_shared<const Bag>(sample_bag(sp, ds.n_feat, BagMode::FullData, rng));

    std::vector<int> train_labels;
    train_labels.reserve(sp.train_indices.size());
    for (std::size_t r : sp.train_indices) train_labels.push_back(ds.labels[r]);

    auto evaluate = [&](M3GPIndividual& ind) {
        ind.fitness_acc = evaluate_m3gp(ind, ds, sp.train_indices, train_labels).accuracy;
    };

    std::vector<M3GPIndividual> pop;
    pop.reserve(cfg.population);
    for (std::size_t i = 0; i < cfg.population; ++i) {
        M3GPIndividual ind{{ramped_half_and_half(bag, cfg.init_depth, rng)}, -1.0};
        evaluate(ind);
        pop.push_back(std::move(ind));
    }

    auto best_index = [&]() {
        std::size_t best = 0;
        for (std::size_t i = 1; i < pop.size(); ++i)
            if (pop[i].fitness_acc > pop[best].fitness_acc) best = i;
        return best;
    };
    auto select = [&]() -> const M3GPIndividual& {
        const std::size_t i = double_tournament_index(
            pop.size(), cfg.tournament_k, cfg.parsimony_prob, rng,
            [&](std::size_t a, std::size_t b) { return pop[a].fitness_acc > pop[b].fitness_acc; },
            [&](std::size_t a) { return pop[a].total_nodes(); });
        return pop[i];
    };

    M3GPModel model;
    model.split = sp;
    model.best_acc_trace.push_back(pop[best_index()].fitness_acc);

    for (unsigned g = 0; g < cfg.generations; ++g) {
        std::vector<M3GPIndividual> next;
        next.reserve(pop.size());
        next.push_back(pop[best_index()]);  // elitism

        while (next.size() < pop.size()) {
            if (rng.chance(cfg.cx_prob)) {
                const M3GPIndividual& p1 = select();
                const M3GPIndividual& p2 = select();
                M3GPIndividual c1{p1.dimensions, -1.0};
                M3GPIndividual c2{p2.dimensions, -1.0};
                if (rng.chance(0.5)) {
                    // standard subtree crossover on one random dimension of each
                    const std::size_t d1 = rng.index(c1.dimensions.size());
                    const std::size_t d2 = rng.index(c2.dimensions.size());
                    auto [t1, t2] = subtree_crossover(c1.dimensions[d1], c2.dimensions[d2], rng);
                    c1.dimensions[d1] = std::move(t1);
                    c2.dimensions[d2] = std::move(t2);
                } else {
                    // swap one dimension between individuals
                    const std::size_t d1 = rng.index(c1.dimensions.size());
                    const std::size_t d2 = rng.index(c2.dimensions.size());
                    std::swap(c1.dimensions[d1], c2.dimensions[d2]);
                }
                evaluate(c1);
                next.push_back(std::move(c1));
                if (next.size() < pop.size()) {
                    evaluate(c2);
                    next.push_back(std::move(c2));
                }
            } else {
                const M3GPIndividual& p = select();
                M3GPIndividual c{p.dimensions, -1.0};
                const std::uint64_t kind = rng.below(3);
                if (kind == 0) {
                    const std::size_t d = rng.index(c.dimensions.size());
                    c.dimensions[d] = e_mutation(c.dimensions[d], cfg.mutation_depth, rng);
                } else if (kind == 1) {
                    c.dimensions.push_back(grow_tree(bag, cfg.new_dim_depth, rng));
                } else if (c.dimensions.size() > 1) {
                    c.dimensions.erase(c.dimensions.begin() +
                                       static_cast<std::ptrdiff_t>(rng.index(c.dimensions.size())));
                }
                evaluate(c);
                next.push_back(std::move(c));
            }
        }
        pop = std::move(next);

        // Prune only the best individual of the generation.
        const std::size_t bi = best_index();
        pop[bi] = prune_m3gp(std::move(pop[bi]), ds, sp.train_indices, train_labels);
        model.best_acc_trace.push_back(pop[best_index()].fitness_acc);
    }

    const std::size_t bi = best_index();
    model.best = pop[bi];
    const M3GPEval eval = evaluate_m3gp(model.best, ds, sp.train_indices, train_labels);
    model.class_model = std::move(eval.cm);
    model.train_accuracy = eval.accuracy;
    return model;
}

std::vector<int> m3gp_predict(const M3GPModel& m, const Dataset& ds,
                              std::span<const std::size_t> rows) {
    const auto mapped = m3gp_map(m.best, ds, rows);
    return mahalanobis_classify(m.class_model, mapped, rows.size());
}

std::string M3GPModel::to_json() const {
    nlohmann::json j;
    j["method"] = "M3GP";
    j["dimensions"] = nlohmann::json::array();
    for (const auto& t : best.dimensions) j["dimensions"].push_back(t.to_prefix());
    for (int c = 0; c < 2; ++c)
        j["centroids"][c] = class_model.cls[c].centroid;
    j["train_accuracy"] = train_accuracy;
    return j.dump(2);
}

}  // namespace egp
