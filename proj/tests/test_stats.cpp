#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "egp/rng.hpp"
#include "egp/stats.hpp"

using namespace egp;

namespace {

// Test-side chi-square tail via a continued-fraction / series evaluation of
// the regularized incomplete gamma function (independent of the library's
// implementation).
double oracle_gamma_q(double a, double x) {
    if (x <= 0.0) return 1.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        // lower series
        double sum = 1.0 / a;
        double term = sum;
        for (int n = 1; n < 500; ++n) {
            term *= x / (a + n);
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
        }
        const double p = sum * std::exp(-x + a * std::log(x) - lg);
        return 1.0 - p;
    }
    // upper continued fraction (Lentz)
    double b = x + 1.0 - a;
    double c = 1e308;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x + a * std::log(x) - lg) * h;
}

double oracle_chi2_sf(double x, unsigned df) { return oracle_gamma_q(df / 2.0, x / 2.0); }

// O(N^2) counting mid-ranks, written independently of the sort-based path.
KWResult oracle_kruskal_wallis(const SampleSet& s) {
    std::vector<double> pooled;
    for (const auto& g : s.groups) pooled.insert(pooled.end(), g.begin(), g.end());
    const double n = static_cast<double>(pooled.size());

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
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

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
    const double correction = 1.0 - ties / (n * n * n - n);

    KWResult r;
    r.df = static_cast<unsigned>(s.groups.size() - 1);
    if (correction <= 0.0) {
        r.H = 0.0;
        r.p_value = 1.0;
        return r;
    }
    r.H = std::max(h / correction, 0.0);
    r.p_value = oracle_chi2_sf(r.H, r.df);
    return r;
}

}  // namespace

TEST_CASE("chi-square tail matches reference values") {
    // reference values computed with scipy.stats.chi2.sf
    CHECK(chi_square_upper_tail(3.857142857142857, 1) ==
          doctest::Approx(0.04953461343562649).epsilon(1e-12));
    CHECK(chi_square_upper_tail(5.0, 2) == doctest::Approx(0.0820849986238988).epsilon(1e-12));
    CHECK(chi_square_upper_tail(10.0, 4) == doctest::Approx(0.04042768199451279).epsilon(1e-12));
    CHECK(chi_square_upper_tail(27.5, 9) == doctest::Approx(0.001155651284351161).epsilon(1e-12));
    CHECK(chi_square_upper_tail(0.0, 1) == 1.0);
}

TEST_CASE("kruskal-wallis on two separated groups") {
    const SampleSet s{{"a", "b"}, {{1, 2, 3}, {101, 102, 103}}};
    const KWResult r = kruskal_wallis(s);
    CHECK(r.df == 1);
    CHECK(r.H == doctest::Approx(27.0 / 7.0).epsilon(1e-12));  // 3.857142...
    CHECK(r.p_value == doctest::Approx(0.0495346134356269).epsilon(1e-10));
    CHECK(r.p_value < 0.05);
}

TEST_CASE("kruskal-wallis textbook three-group case") {
    // reference H and p computed with scipy.stats.kruskal
    const SampleSet s{{"a", "b", "c"},
                      {{27, 31, 36, 38, 45}, {32, 33, 34, 40, 42}, {22, 25, 30, 33, 33}}};
    const KWResult r = kruskal_wallis(s);
    CHECK(r.df == 2);
    CHECK(r.H == doctest::Approx(4.49208633093526).epsilon(1e-10));
    CHECK(r.p_value == doctest::Approx(0.105817098036188).epsilon(1e-10));
}

TEST_CASE("kruskal-wallis with heavy ties matches scipy") {
    const SampleSet s{{"a", "b", "c"}, {{1, 1, 1, 2, 2}, {1, 2, 2, 3, 3}, {2, 2, 3, 3, 3}}};
    const KWResult r = kruskal_wallis(s);
    CHECK(r.H == doctest::Approx(5.82060606060607).epsilon(1e-10));
    CHECK(r.p_value == doctest::Approx(0.0544592245731882).epsilon(1e-10));
}

TEST_CASE("identical groups give H = 0 and p = 1") {
    const SampleSet s{{"a", "b"}, {{5, 5, 5}, {5, 5, 5}}};
    const KWResult r = kruskal_wallis(s);
    CHECK(r.H == 0.0);
    CHECK(r.p_value == 1.0);
}

TEST_CASE("H is invariant under strictly monotone transforms") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        SampleSet s, t;
        const std::size_t k = 2 + rng.index(3);
        for (std::size_t g = 0; g < k; ++g) {
            std::vector<double> a, b;
            const std::size_t n = 3 + rng.index(8);
            for (std::size_t i = 0; i < n; ++i) {
                const double v = static_cast<double>(rng.range(0, 6));
                a.push_back(v);
                b.push_back(3.0 * v + 11.0);  // strictly monotone map
            }
            s.names.push_back("g");
            s.groups.push_back(a);
            t.names.push_back("g");
            t.groups.push_back(b);
        }
        CHECK(kruskal_wallis(s).H == doctest::Approx(kruskal_wallis(t).H).epsilon(1e-12));
    }
}

TEST_CASE("p decreases as H grows for fixed df") {
    for (unsigned df : {1u, 3u, 7u}) {
        double prev = 1.1;
        for (double h = 0.5; h < 30.0; h += 0.5) {
            const double p = chi_square_upper_tail(h, df);
            CHECK(p < prev);
            prev = p;
        }
    }
}

TEST_CASE("kruskal-wallis agrees with the brute-force oracle") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        SampleSet s;
        const std::size_t k = 2 + rng.index(4);
        for (std::size_t g = 0; g < k; ++g) {
            std::vector<double> group;
            const std::size_t n = 2 + rng.index(12);
            for (std::size_t i = 0; i < n; ++i)
                group.push_back(trial % 2 ? static_cast<double>(rng.range(0, 5))  // heavy ties
                                          : rng.real01());
            s.names.push_back("g");
            s.groups.push_back(std::move(group));
        }
        const KWResult got = kruskal_wallis(s);
        const KWResult expected = oracle_kruskal_wallis(s);
        CHECK(got.H == doctest::Approx(expected.H).epsilon(1e-9));
        CHECK(got.p_value == doctest::Approx(expected.p_value).epsilon(1e-9));
    }
}

TEST_CASE("pairwise significance counting") {
    SUBCASE("identical samples count nothing") {
        SampleTable t;
        for (const char* m : {"A", "B", "C"})
            for (const char* d : {"d1", "d2"}) t[m][d] = {0.5, 0.5, 0.5, 0.6};
        const SignificanceCounts c = pairwise_significance_counts(t, 0.01);
        for (const auto& row : c.counts)
            for (int v : row) CHECK(v == 0);
    }
    SUBCASE("a dominant method over 9 others on 8 datasets totals 72") {
        SampleTable t;
        std::vector<std::string> datasets;
        for (int d = 0; d < 8; ++d) datasets.push_back("d" + std::to_string(d));
        for (int m = 0; m < 9; ++m)
            for (const auto& d : datasets) {
                auto& v = t["loser" + std::to_string(m)][d];
                for (int i = 0; i < 10; ++i) v.push_back(0.5 + 0.001 * i);
            }
        for (const auto& d : datasets) {
            auto& v = t["WINNER"][d];
            for (int i = 0; i < 10; ++i) v.push_back(0.9 + 0.001 * i);
        }
        const SignificanceCounts c = pairwise_significance_counts(t, 0.01);
        const auto it = std::find(c.methods.begin(), c.methods.end(), "WINNER");
        REQUIRE(it != c.methods.end());
        CHECK(c.totals[static_cast<std::size_t>(it - c.methods.begin())] == 72);
    }
    SUBCASE("two methods with known separation count (1,0)") {
        SampleTable t;
        t["good"]["d"] = {0.9, 0.91, 0.92, 0.93, 0.94, 0.95};
        t["bad"]["d"] = {0.1, 0.11, 0.12, 0.13, 0.14, 0.15};
        const SignificanceCounts c = pairwise_significance_counts(t, 0.01);
        // methods are sorted: bad, good
        CHECK(c.methods[0] == "bad");
        CHECK(c.totals[0] == 0);
        CHECK(c.totals[1] == 1);
    }
    SUBCASE("row totals are bounded by (methods-1) x datasets") {
        Rng rng(5);
        SampleTable t;
        for (int m = 0; m < 4; ++m)
            for (int d = 0; d < 3; ++d) {
                auto& v = t["m" + std::to_string(m)]["d" + std::to_string(d)];
                for (int i = 0; i < 8; ++i) v.push_back(rng.real01());
            }
        const SignificanceCounts c = pairwise_significance_counts(t, 0.05);
        for (int total : c.totals) CHECK(total <= 3 * 3);
    }
}

TEST_CASE("counting table serializes to csv and text") {
    SampleTable t;
    t["good"]["d"] = {0.9, 0.91, 0.92, 0.93, 0.94, 0.95};
    t["bad"]["d"] = {0.1, 0.11, 0.12, 0.13, 0.14, 0.15};
    const SignificanceCounts c = pairwise_significance_counts(t, 0.01);
    std::ostringstream csv;
    c.write_csv(csv);
    CHECK(csv.str() == "method,d,total\nbad,0,0\ngood,1,1\n");
    std::ostringstream text;
    c.write_text(text);
    CHECK(text.str().find("good") != std::string::npos);
}

TEST_CASE("median") {
    CHECK(median({3.0}) == 3.0);
    CHECK(median({1.0, 2.0}) == 1.5);
    CHECK(median({5.0, 1.0, 3.0}) == 3.0);
}
