#pragma once

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace egp {

/// Named groups of observations (e.g. one group of test accuracies per
/// method). At least two groups, each nonempty.
struct SampleSet {
    std::vector<std::string> names;
    std::vector<std::vector<double>> groups;
};

struct KWResult {
    double H = 0.0;      // tie-corrected statistic
    unsigned df = 0;     // groups - 1
    double p_value = 1.0;
};

/// Kruskal-Wallis rank test with mid-ranks and tie correction; the p-value
/// comes from the chi-square upper tail with df = k-1. When every value in
/// every group is identical the statistic is 0 and p = 1.
KWResult kruskal_wallis(const SampleSet& s);

/// Upper tail of the chi-square distribution, via the regularized upper
/// incomplete gamma function.
double chi_square_upper_tail(double x, unsigned df);

/// method -> dataset -> observations (one phase: either training or test).
using SampleTable = std::map<std::string, std::map<std::string, std::vector<double>>>;

/// For every ordered method pair on every dataset, a two-group
/// Kruskal-Wallis test at `alpha` plus a median comparison; the method with
/// the significantly higher median gains one count.
struct SignificanceCounts {
    std::vector<std::string> methods;   // row order
    std::vector<std::string> datasets;  // column order
    std::vector<std::vector<int>> counts;  // methods x datasets
    std::vector<int> totals;               // per method

    void write_csv(std::ostream& os) const;
    void write_text(std::ostream& os) const;
};

SignificanceCounts pairwise_significance_counts(const SampleTable& samples, double alpha);

double median(std::vector<double> values);

}  // namespace egp
