#include "egp/engine.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "egp/selection.hpp"

namespace egp {

Voting variant_voting(Variant v) {
    switch (v) {
        case Variant::eGP_N:
        case Variant::eGP_N5:
        case Variant::eGPn: return Voting::Normal;
        case Variant::eGP_W:
        case Variant::eGP_W5:
        case Variant::eGPw: return Voting::Weighted;
    }
    throw std::invalid_argument("unknown variant");
}

BagMode variant_bag_mode(Variant v) {
    switch (v) {
        case Variant::eGP_N:
        case Variant::eGP_W:
        case Variant::eGP_N5:
        case Variant::eGP_W5: return BagMode::RandomObsFeat;  // feature sampling on
        case Variant::eGPn:
        case Variant::eGPw: return BagMode::FixedObs;  // 60% observations, all features
    }
    throw std::invalid_argument("unknown variant");
}

std::size_t variant_subpop_size(Variant v) {
    switch (v) {
        case Variant::eGP_N5:
        case Variant::eGP_W5: return 500;
        default: return 250;
    }
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::eGP_N: return "eGP-N";
        case Variant::eGP_W: return "eGP-W";
        case Variant::eGP_N5: return "eGP-N5";
        case Variant::eGP_W5: return "eGP-W5";
        case Variant::eGPn: return "eGPn";
        case Variant::eGPw: return "eGPw";
    }
    return "?";
}

namespace {

std::size_t best_forest_index(const std::vector<Forest>& forests, const TreeArchive& archive) {
    // Highest accuracy; ties prefer fewer total nodes, then the earlier one.
    auto total_nodes = [&](const Forest& f) {
        std::size_t n = 0;
        for (TreeId id : f.member_ids) n += archive.at(id).tree.node_count();
        return n;
    };
    std::size_t best = 0;
    std::size_t best_nodes = total_nodes(forests[0]);
    for (std::size_t i = 1; i < forests.size(); ++i) {
        if (forests[i].fitness_acc > forests[best].fitness_acc) {
            best = i;
            best_nodes = total_nodes(forests[i]);
        } else if (forests[i].fitness_acc == forests[best].fitness_acc) {
            const std::size_t n = total_nodes(forests[i]);
            if (n < best_nodes) {
                best = i;
                best_nodes = n;
            }
        }
    }
    return best;
}

double best_tree_rmse(const TreeArchive& archive) {
    double best = archive.at(archive.live().front()).fitness_rmse;
    for (TreeId id : archive.live()) best = std::min(best, archive.at(id).fitness_rmse);
    return best;
}

}  // namespace

TrainedModel train(const Dataset& ds, const EngineConfig& cfg) {
    ds.validate();
    if (cfg.cx_prob < 0.0 || cfg.cx_prob > 1.0)
        throw std::invalid_argument("cx_prob must be in [0,1]");
    if (cfg.tournament_k < 1) throw std::invalid_argument("tournament_k must be >= 1");
    const std::size_t n = cfg.subpop_size ? cfg.subpop_size : variant_subpop_size(cfg.variant);
    if (n < 2) throw std::invalid_argument("subpopulation size must be >= 2");

    const Voting voting = variant_voting(cfg.variant);
    const BagMode bag_mode = variant_bag_mode(cfg.variant);

    Rng rng(cfg.seed);
    DataSplit sp = split(ds, rng);
    const FeatureSimilarity sim = feature_similarity(ds, sp);

    // Tree subpopulation: n trees, each with a freshly sampled bag.
    TreeArchive archive(sp.train_indices);
    std::vector<TreeId> live;
    live.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto bag = std::make_shared<const Bag>(sample_bag(sp, ds.n_feat, bag_mode, rng));
        ExpressionTree tree = ramped_half_and_half(std::move(bag), cfg.init_depth, rng);
        const double f = rmse_fitness(tree, ds);
        live.push_back(archive.add(TreeIndividual{std::move(tree), f}, ds));
    }
    archive.set_live(live);

    // Forest subpopulation: singletons, forest i starting from tree i.
    std::vector<Forest> forests;
    forests.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Forest f{{live[i]}, -1.0};
        f.fitness_acc = accuracy_fitness(f, archive, ds, sp, voting, rng);
        forests.push_back(std::move(f));
    }

    TrainedModel model;
    model.variant = cfg.variant;
    model.voting = voting;
    model.n_features = ds.n_feat;
    model.split = sp;
    model.seed = cfg.seed;

    {
        const std::size_t bi = best_forest_index(forests, archive);
        model.trace.push_back({0, best_tree_rmse(archive), forests[bi].fitness_acc,
                               forests[bi].member_ids.size(), forests[bi].fitness_acc,
                               forests[bi].fitness_acc});
    }

    const BreedOptions tree_opts{cfg.cx_prob, cfg.mutation_depth, cfg.size_cap};
    const TreeSelector tree_select = make_tournament_selector(cfg.tournament_k);
    auto forest_select = [&](const std::vector<Forest>& pool) -> const Forest& {
        const std::size_t i =
            tournament_index(pool.size(), cfg.tournament_k, rng, [&](std::size_t a, std::size_t b) {
                return pool[a].fitness_acc > pool[b].fitness_acc;
            });
        return pool[i];
    };

    for (unsigned g = 1; g <= cfg.generations; ++g) {
        // Trees first: forest add-mutations draw from the offspring trees.
        live = breed_generation(archive, ds, sim, tree_opts, tree_select, rng,
                                &model.terminal_repairs);

        std::vector<Forest> next;
        next.reserve(n);
        next.push_back(forests[best_forest_index(forests, archive)]);  // elitism

        auto evaluate_push = [&](Forest f) {
            f.fitness_acc = accuracy_fitness(f, archive, ds, sp, voting, rng);
            next.push_back(std::move(f));
        };
        while (next.size() < n) {
            if (rng.chance(0.5)) {  // crossover: swap one member
                const Forest& p1 = forest_select(forests);
                const Forest& p2 = forest_select(forests);
                auto [c1, c2] = forest_crossover_swap(p1, p2, rng);
                evaluate_push(std::move(c1));
                if (next.size() < n) evaluate_push(std::move(c2));
            } else {  // mutation: add or remove, equal odds
                const Forest& p = forest_select(forests);
                Forest c = rng.chance(0.5) ? forest_mutation_add(p, archive, rng)
                                           : forest_mutation_remove(p, rng);
                evaluate_push(std::move(c));
            }
        }

        // Prune only the best forest of the offspring generation.
        const std::size_t bi = best_forest_index(next, archive);
        const double before = next[bi].fitness_acc;
        next[bi] = prune_best(next[bi], archive, ds, sp, voting, rng);
        const double after = next[bi].fitness_acc;
        if (after < before)
            throw std::logic_error("internal invariant violated: prune decreased accuracy");
        forests = std::move(next);

        // Keep archived trees referenced by any live forest; drop the rest.
        std::unordered_set<TreeId> referenced;
        for (const Forest& f : forests)
            referenced.insert(f.member_ids.begin(), f.member_ids.end());
        archive.collect(referenced);

        const std::size_t ti = best_forest_index(forests, archive);
        model.trace.push_back({g, best_tree_rmse(archive), forests[ti].fitness_acc,
                               forests[ti].member_ids.size(), before, after});
    }

    const Forest& best = forests[best_forest_index(forests, archive)];
    for (TreeId id : best.member_ids) {
        model.trees.push_back(archive.at(id).tree);
        model.total_nodes += archive.at(id).tree.node_count();
    }

    // Recorded training accuracy comes from the public predict path with a
    // seed derived from the run seed, so callers can reproduce it exactly.
    Rng eval_rng(mix64(cfg.seed ^ kEvalSeedSalt));
    const auto labels = predict_rows(model, ds, sp.train_indices, eval_rng);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < sp.train_indices.size(); ++r)
        if (labels[r] == ds.labels[sp.train_indices[r]]) ++correct;
    model.train_accuracy =
        static_cast<double>(correct) / static_cast<double>(sp.train_indices.size());
    return model;
}

std::vector<int> predict(const TrainedModel& m, std::span<const double> features_row_major,
                         std::size_t n_rows, std::size_t n_cols, Rng& rng) {
    if (features_row_major.size() != n_rows * n_cols)
        throw std::invalid_argument("predict: feature matrix size mismatch");
    if (n_cols != m.n_features)
        throw std::invalid_argument("predict: column count does not match the model");

    const std::size_t members = m.trees.size();
    std::vector<double> preds(n_rows * members);
    for (std::size_t j = 0; j < members; ++j)
        for (std::size_t r = 0; r < n_rows; ++r)
            preds[r * members + j] =
                m.trees[j].eval(features_row_major.subspan(r * n_cols, n_cols));

    VoteMatrix v{n_rows, members, std::vector<std::uint8_t>(preds.size())};
    for (std::size_t i = 0; i < preds.size(); ++i)
        v.votes[i] = static_cast<std::uint8_t>(nearest_label(preds[i]));
    if (m.voting == Voting::Normal) return majority_vote(v, rng);

    CertaintyMatrix c{n_rows, members, std::vector<double>(preds.size())};
    for (std::size_t r = 0; r < n_rows; ++r) {
        const auto row_cert = certainty_row({preds.data() + r * members, members}, v.row(r));
        std::copy(row_cert.begin(), row_cert.end(),
                  c.cert.begin() + static_cast<std::ptrdiff_t>(r * members));
    }
    return weighted_vote(v, c);
}

std::vector<int> predict_rows(const TrainedModel& m, const Dataset& ds,
                              std::span<const std::size_t> rows, Rng& rng) {
    std::vector<double> flat;
    flat.reserve(rows.size() * ds.n_feat);
    for (std::size_t r : rows) {
        const auto row = ds.row(r);
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return predict(m, flat, rows.size(), ds.n_feat, rng);
}

std::string TrainedModel::to_json() const {
    nlohmann::json j;
    j["method"] = variant_name(variant);
    j["voting"] = voting == Voting::Normal ? "normal" : "weighted";
    j["seed"] = seed;
    j["train_accuracy"] = train_accuracy;
    j["total_nodes"] = total_nodes;
    j["members"] = nlohmann::json::array();
    for (const ExpressionTree& t : trees) {
        nlohmann::json member;
        member["tree"] = t.to_prefix();
        member["features"] = t.bag().feature_mask;
        j["members"].push_back(std::move(member));
    }
    return j.dump(2);
}

void TrainedModel::write_trace_csv(std::ostream& os) const {
    os << "generation,best_tree_rmse,best_forest_acc,best_forest_size\n";
    for (const GenerationTrace& t : trace)
        os << t.generation << ',' << t.best_tree_rmse << ',' << t.best_forest_acc << ','
           << t.best_forest_size << '\n';
}

}  // namespace egp
