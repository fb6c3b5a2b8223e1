#include "egp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace egp {

std::vector<double> member_predictions(const Forest& f, const TreeArchive& archive,
                                       const Dataset& ds, std::span<const std::size_t> rows) {
    const std::size_t m = f.member_ids.size();
    std::vector<double> preds(rows.size() * m);
    const bool cached = !archive.cached_rows().empty() && rows.size() == archive.cached_rows().size() &&
                        std::equal(rows.begin(), rows.end(), archive.cached_rows().begin());
    for (std::size_t j = 0; j < m; ++j) {
        if (cached) {
            const auto& p = archive.predictions(f.member_ids[j]);
            for (std::size_t r = 0; r < rows.size(); ++r) preds[r * m + j] = p[r];
        } else {
            const ExpressionTree& tree = archive.at(f.member_ids[j]).tree;
            for (std::size_t r = 0; r < rows.size(); ++r) preds[r * m + j] = tree.eval(ds.row(rows[r]));
        }
    }
    return preds;
}

namespace {

VoteMatrix votes_from_predictions(const std::vector<double>& preds, std::size_t n_rows,
                                  std::size_t n_members) {
    VoteMatrix v{n_rows, n_members, std::vector<std::uint8_t>(preds.size())};
    for (std::size_t i = 0; i < preds.size(); ++i)
        v.votes[i] = static_cast<std::uint8_t>(nearest_label(preds[i]));
    return v;
}

}  // namespace

VoteMatrix member_votes(const Forest& f, const TreeArchive& archive, const Dataset& ds,
                        std::span<const std::size_t> rows) {
    if (rows.empty()) throw std::invalid_argument("member_votes: empty row set");
    const auto preds = member_predictions(f, archive, ds, rows);
    return votes_from_predictions(preds, rows.size(), f.member_ids.size());
}

std::vector<int> majority_vote(const VoteMatrix& v, Rng& rng) {
    if (v.n_members == 0) throw std::invalid_argument("majority_vote: empty forest");
    std::vector<int> labels(v.n_rows);
    for (std::size_t r = 0; r < v.n_rows; ++r) {
        std::size_t ones = 0;
        for (std::uint8_t b : v.row(r)) ones += b;
        const std::size_t zeros = v.n_members - ones;
        if (ones > zeros)
            labels[r] = 1;
        else if (zeros > ones)
            labels[r] = 0;
        else
            labels[r] = static_cast<int>(rng.index(2));
    }
    return labels;
}

std::vector<double> certainty_row(std::span<const double> predictions,
                                  std::span<const std::uint8_t> votes) {
    const std::size_t n = predictions.size();
    std::vector<double> residual(n);
    double max_r = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        residual[k] = std::fabs(predictions[k] - static_cast<double>(votes[k]));
        max_r = std::max(max_r, residual[k]);
    }
    std::vector<double> cert(n, 1.0);
    if (max_r == 0.0) return cert;  // zero residual vector: full confidence
    // Scale by the largest residual so the squared sum cannot overflow.
    double ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        residual[k] /= max_r;
        ss += residual[k] * residual[k];
    }
    const double norm = std::sqrt(ss);
    for (std::size_t k = 0; k < n; ++k) cert[k] = 1.0 - residual[k] / norm;
    return cert;
}

std::vector<int> weighted_vote(const VoteMatrix& v, const CertaintyMatrix& c) {
    if (v.n_rows != c.n_rows || v.n_members != c.n_members)
        throw std::invalid_argument("weighted_vote: shape mismatch");
    std::vector<int> labels(v.n_rows);
    for (std::size_t r = 0; r < v.n_rows; ++r) {
        double zeros = 0.0, ones = 0.0;
        const auto vr = v.row(r);
        const auto cr = c.row(r);
        for (std::size_t k = 0; k < v.n_members; ++k)
            (vr[k] ? ones : zeros) += cr[k];
        labels[r] = zeros >= ones ? 0 : 1;  // covers the zeros+ones == 0 case
    }
    return labels;
}

std::vector<int> ensemble_labels(const Forest& f, const TreeArchive& archive, const Dataset& ds,
                                 std::span<const std::size_t> rows, Voting mode, Rng& rng) {
    const std::size_t m = f.member_ids.size();
    const auto preds = member_predictions(f, archive, ds, rows);
    VoteMatrix v = votes_from_predictions(preds, rows.size(), m);
    if (mode == Voting::Normal) return majority_vote(v, rng);

    CertaintyMatrix c{rows.size(), m, std::vector<double>(preds.size())};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row_cert = certainty_row({preds.data() + r * m, m}, v.row(r));
        std::copy(row_cert.begin(), row_cert.end(), c.cert.begin() + static_cast<std::ptrdiff_t>(r * m));
    }
    return weighted_vote(v, c);
}

double accuracy_fitness(const Forest& f, const TreeArchive& archive, const Dataset& ds,
                        const DataSplit& sp, Voting mode, Rng& rng) {
    const auto& rows = sp.train_indices;
    const auto labels = ensemble_labels(f, archive, ds, rows, mode, rng);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < rows.size(); ++r)
        if (labels[r] == ds.labels[rows[r]]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

Forest forest_mutation_add(const Forest& f, const TreeArchive& archive, Rng& rng) {
    const auto live = archive.live();
    Forest out{f.member_ids, -1.0};
    out.member_ids.push_back(live[rng.index(live.size())]);
    return out;
}

Forest forest_mutation_remove(const Forest& f, Rng& rng) {
    if (f.member_ids.size() < 2) return f;  // protected degenerate case
    Forest out{f.member_ids, -1.0};
    out.member_ids.erase(out.member_ids.begin() +
                         static_cast<std::ptrdiff_t>(rng.index(out.member_ids.size())));
    return out;
}

std::pair<Forest, Forest> forest_crossover_swap(const Forest& f1, const Forest& f2, Rng& rng) {
    Forest a{f1.member_ids, -1.0};
    Forest b{f2.member_ids, -1.0};
    const std::size_t i = rng.index(a.member_ids.size());
    const std::size_t j = rng.index(b.member_ids.size());
    std::swap(a.member_ids[i], b.member_ids[j]);
    return {std::move(a), std::move(b)};
}

Forest prune_best(const Forest& f, const TreeArchive& archive, const Dataset& ds,
                  const DataSplit& sp, Voting mode, Rng& rng) {
    Forest current = f;
    if (current.fitness_acc < 0.0)
        current.fitness_acc = accuracy_fitness(current, archive, ds, sp, mode, rng);

    std::size_t i = 0;
    while (i < current.member_ids.size() && current.member_ids.size() > 1) {
        Forest candidate{current.member_ids, -1.0};
        candidate.member_ids.erase(candidate.member_ids.begin() + static_cast<std::ptrdiff_t>(i));
        candidate.fitness_acc = accuracy_fitness(candidate, archive, ds, sp, mode, rng);
        if (candidate.fitness_acc >= current.fitness_acc)
            current = std::move(candidate);  // keep the removal, stay at i
        else
            ++i;
    }
    return current;
}

}  // namespace egp
