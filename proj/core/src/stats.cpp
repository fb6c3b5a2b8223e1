#include "egp/stats.hpp"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

namespace egp {

double chi_square_upper_tail(double x, unsigned df) {
    if (x <= 0.0) return 1.0;
    return boost::math::gamma_q(static_cast<double>(df) / 2.0, x / 2.0);
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

KWResult kruskal_wallis(const SampleSet& s) {
    const std::size_t k = s.groups.size();
    if (k < 2) throw std::invalid_argument("kruskal_wallis needs at least 2 groups");
    std::size_t n_total = 0;
    for (const auto& g : s.groups) {
        if (g.empty()) throw std::invalid_argument("kruskal_wallis: empty group");
        n_total += g.size();
    }
    if (n_total < 3) throw std::invalid_argument("kruskal_wallis needs at least 3 observations");

    // Pool, sort, assign mid-ranks.
    std::vector<std::pair<double, std::size_t>> pooled;  // (value, group)
    pooled.reserve(n_total);
    for (std::size_t g = 0; g < k; ++g)
        for (double v : s.groups[g]) pooled.emplace_back(v, g);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<double> rank_sum(k, 0.0);
    double tie_sum = 0.0;  // sum of t^3 - t over tie groups
    std::size_t i = 0;
    while (i < n_total) {
        std::size_t j = i;
        while (j < n_total && pooled[j].first == pooled[i].first) ++j;
        const auto t = static_cast<double>(j - i);
        const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t m = i; m < j; ++m) rank_sum[pooled[m].second] += mid_rank;
        tie_sum += t * t * t - t;
        i = j;
    }

    const auto n = static_cast<double>(n_total);
    double h = 0.0;
    for (std::size_t g = 0; g < k; ++g)
        h += rank_sum[g] * rank_sum[g] / static_cast<double>(s.groups[g].size());
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

    const double correction = 1.0 - tie_sum / (n * n * n - n);
    KWResult result;
    result.df = static_cast<unsigned>(k - 1);
    if (correction <= 0.0) {  // every observation identical
        result.H = 0.0;
        result.p_value = 1.0;
        return result;
    }
    result.H = std::max(h / correction, 0.0);
    result.p_value = chi_square_upper_tail(result.H, result.df);
    return result;
}

SignificanceCounts pairwise_significance_counts(const SampleTable& samples, double alpha) {
    if (samples.size() < 2)
        throw std::invalid_argument("pairwise_significance_counts needs at least 2 methods");

    SignificanceCounts out;
    for (const auto& [method, _] : samples) out.methods.push_back(method);
    for (const auto& [_, per_dataset] : samples)
        for (const auto& [dataset, __] : per_dataset)
            if (std::find(out.datasets.begin(), out.datasets.end(), dataset) == out.datasets.end())
                out.datasets.push_back(dataset);
    std::sort(out.datasets.begin(), out.datasets.end());

    out.counts.assign(out.methods.size(), std::vector<int>(out.datasets.size(), 0));
    for (std::size_t a = 0; a < out.methods.size(); ++a) {
        for (std::size_t b = 0; b < out.methods.size(); ++b) {
            if (a == b) continue;
            const auto& sa = samples.at(out.methods[a]);
            const auto& sb = samples.at(out.methods[b]);
            for (std::size_t d = 0; d < out.datasets.size(); ++d) {
                const auto ia = sa.find(out.datasets[d]);
                const auto ib = sb.find(out.datasets[d]);
                if (ia == sa.end() || ib == sb.end()) continue;
                const KWResult kw = kruskal_wallis({{}, {ia->second, ib->second}});
                if (kw.p_value < alpha && median(ia->second) > median(ib->second))
                    ++out.counts[a][d];
            }
        }
    }
    out.totals.resize(out.methods.size(), 0);
    for (std::size_t a = 0; a < out.methods.size(); ++a)
        for (int c : out.counts[a]) out.totals[a] += c;
    return out;
}

void SignificanceCounts::write_csv(std::ostream& os) const {
    os << "method";
    for (const auto& d : datasets) os << ',' << d;
    os << ",total\n";
    for (std::size_t a = 0; a < methods.size(); ++a) {
        os << methods[a];
        for (int c : counts[a]) os << ',' << c;
        os << ',' << totals[a] << '\n';
    }
}

void SignificanceCounts::write_text(std::ostream& os) const {
    std::size_t w = 8;
    for (const auto& m : methods) w = std::max(w, m.size() + 2);
    os << std::left << std::setw(static_cast<int>(w)) << "method";
    for (const auto& d : datasets) os << std::setw(12) << d;
    os << std::setw(8) << "total" << '\n';
    for (std::size_t a = 0; a < methods.size(); ++a) {
        os << std::setw(static_cast<int>(w)) << methods[a];
        for (int c : counts[a]) os << std::setw(12) << c;
        os << std::setw(8) << totals[a] << '\n';
    }
}

}  // namespace egp
