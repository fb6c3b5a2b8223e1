#pragma once

#include <cstddef>

#include "egp/rng.hpp"

namespace egp {

/// Plain tournament over candidate indices [0, n): k uniform draws with
/// replacement, winner by `better(a, b)`, ties keep the earlier draw.
template <typename Better>
std::size_t tournament_index(std::size_t n, unsigned k, Rng& rng, Better&& better) {
    std::size_t best = rng.index(n);
    for (unsigned i = 1; i < k; ++i) {
        const std::size_t c = rng.index(n);
        if (better(c, best)) best = c;
    }
    return best;
}

/// Double tournament (fitness first): two fitness tournaments of size k
/// produce two finalists; with probability parsimony_prob the finalist with
/// the smaller `size_of` wins, otherwise the fitter one. Equal sizes fall
/// back to fitness.
template <typename Better, typename SizeOf>
std::size_t double_tournament_index(std::size_t n, unsigned k, double parsimony_prob, Rng& rng,
                                    Better&& better, SizeOf&& size_of) {
    const std::size_t a = tournament_index(n, k, rng, better);
    const std::size_t b = tournament_index(n, k, rng, better);
    if (rng.chance(parsimony_prob)) {
        const auto sa = size_of(a);
        const auto sb = size_of(b);
        if (sa < sb) return a;
        if (sb < sa) return b;
    }
    return better(b, a) ? b : a;
}

}  // namespace egp
