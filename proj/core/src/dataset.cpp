#include "egp/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <utility>

namespace egp {

void Dataset::validate() const {
    if (n_obs < 2) throw DataError("dataset needs at least 2 observations");
    if (n_feat < 1) throw DataError("dataset needs at least 1 feature");
    if (features.size() != n_obs * n_feat) throw DataError("feature matrix size mismatch");
    if (labels.size() != n_obs) throw DataError("label vector size mismatch");
    if (feature_names.size() != n_feat) throw DataError("feature name count mismatch");
    for (double v : features)
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
    bool seen[2] = {false, false};
    for (int y : labels) {
        if (y != 0 && y != 1) throw DataError("label outside {0,1}");
        seen[y] = true;
    }
    if (!seen[0] || !seen[1]) throw DataError("both classes must be present");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        rows.push_back(split_line(line));
    }
    if (rows.empty()) throw DataError(path + ": file is empty");

    std::vector<std::string> header;
    if (opts.has_header) {
        header = rows.front();
        rows.erase(rows.begin());
        if (rows.empty()) throw DataError(path + ": no data rows after header");
    }
    const std::size_t n_cols = (opts.has_header ? header.size() : rows.front().size());
    if (n_cols < 2) throw DataError(path + ": need at least one feature column plus the label");

    // Resolve the label column: integer index, or name looked up in the header.
    std::size_t label_col;
    {
        const std::string sel = trim(opts.label_column);
        long long idx;
        auto [ptr, ec] = std::from_chars(sel.data(), sel.data() + sel.size(), idx);
        if (ec == std::errc{} && ptr == sel.data() + sel.size()) {
            if (idx < 0) idx += static_cast<long long>(n_cols);
            if (idx < 0 || idx >= static_cast<long long>(n_cols))
                throw DataError(path + ": label column index out of range: " + sel);
            label_col = static_cast<std::size_t>(idx);
        } else {
            if (!opts.has_header)
                throw DataError(path + ": label column by name requires a header row");
            auto it = std::find_if(header.begin(), header.end(),
                                   [&](const std::string& h) { return trim(h) == sel; });
            if (it == header.end())
                throw DataError(path + ": label column not found: " + sel);
            label_col = static_cast<std::size_t>(it - header.begin());
        }
    }

    Dataset ds;
    ds.n_obs = rows.size();
    ds.n_feat = n_cols - 1;
    ds.features.reserve(ds.n_obs * ds.n_feat);

    for (std::size_t c = 0; c < n_cols; ++c) {
        if (c == label_col) continue;
        ds.feature_names.push_back(opts.has_header ? trim(header[c])
                                                   : "x" + std::to_string(ds.feature_names.size()));
    }

    std::vector<std::string> raw_labels;
    raw_labels.reserve(ds.n_obs);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        const std::size_t file_row = r + (opts.has_header ? 2 : 1);
        if (cells.size() != n_cols)
            throw DataError(path + ": row " + std::to_string(file_row) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(n_cols));
        for (std::size_t c = 0; c < n_cols; ++c) {
            if (c == label_col) {
                raw_labels.push_back(trim(cells[c]));
                continue;
            }
            double v;
            if (!parse_double(cells[c], v))
                throw DataError(path + ": row " + std::to_string(file_row) + ", column " +
                                std::to_string(c + 1) + ": cannot parse '" + trim(cells[c]) +
                                "' as a finite number");
            ds.features.push_back(v);
        }
    }

    // Map the two raw label values to 0/1, smaller value -> 0.
    std::vector<std::string> distinct;
    for (const auto& v : raw_labels)
        if (std::find(distinct.begin(), distinct.end(), v) == distinct.end())
            distinct.push_back(v);
    if (distinct.size() != 2)
        throw DataError(path + ": expected exactly 2 label values, found " +
                        std::to_string(distinct.size()));
    double a, b;
    bool numeric = parse_double(distinct[0], a) && parse_double(distinct[1], b);
    bool swap_order = numeric ? (b < a) : (distinct[1] < distinct[0]);
    if (swap_order) std::swap(distinct[0], distinct[1]);
    ds.labels.reserve(ds.n_obs);
    for (const auto& v : raw_labels) ds.labels.push_back(v == distinct[0] ? 0 : 1);

    ds.validate();
    return ds;
}

DataSplit split(const Dataset& ds, Rng& rng) {
    if (ds.n_obs < 2) throw DataError("split needs at least 2 observations");
    const auto n_train =
        static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(ds.n_obs)));

    std::vector<std::size_t> perm(ds.n_obs);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = ds.n_obs - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.index(i + 1)]);

    DataSplit sp;
    sp.train_indices.assign(perm.begin(), perm.begin() + n_train);
    sp.test_indices.assign(perm.begin() + n_train, perm.end());
    std::sort(sp.train_indices.begin(), sp.train_indices.end());
    std::sort(sp.test_indices.begin(), sp.test_indices.end());
    return sp;
}

Bag sample_bag(const DataSplit& sp, std::size_t n_feat, BagMode mode, Rng& rng) {
    const std::size_t n_train = sp.train_indices.size();
    Bag bag;
    switch (mode) {
        case BagMode::FixedObs: {
            const auto k = static_cast<std::size_t>(
                std::llround(0.60 * static_cast<double>(n_train)));
            for (std::size_t pos : rng.sample_without_replacement(n_train, k))
                bag.obs_indices.push_back(sp.train_indices[pos]);
            bag.feature_mask.resize(n_feat);
            std::iota(bag.feature_mask.begin(), bag.feature_mask.end(), 0u);
            break;
        }
        case BagMode::RandomObsFeat: {
            const auto n_obs = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(n_train)));
            const auto n_mask = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(n_feat)));
            for (std::size_t pos : rng.sample_without_replacement(n_train, n_obs))
                bag.obs_indices.push_back(sp.train_indices[pos]);
            for (std::size_t f : rng.sample_without_replacement(n_feat, n_mask))
                bag.feature_mask.push_back(static_cast<std::uint32_t>(f));
            break;
        }
        case BagMode::FullData: {
            bag.obs_indices = sp.train_indices;
            bag.feature_mask.resize(n_feat);
            std::iota(bag.feature_mask.begin(), bag.feature_mask.end(), 0u);
            break;
        }
    }
    return bag;
}

FeatureSimilarity feature_similarity(const Dataset& ds, const DataSplit& sp) {
    const std::size_t n = ds.n_feat;
    const std::size_t m = sp.train_indices.size();
    if (m == 0) throw DataError("feature similarity needs at least one training row");

    // Column magnitudes over the training rows, scaled by the column max so
    // the squared sums cannot overflow.
    std::vector<double> mag(n * m);
    std::vector<double> norm(n, 0.0);
    for (std::size_t f = 0; f < n; ++f) {
        double mx = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            const double v = std::fabs(ds.features[sp.train_indices[r] * n + f]);
            mag[f * m + r] = v;
            mx = std::max(mx, v);
        }
        if (mx == 0.0) continue;
        double ss = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            const double s = mag[f * m + r] / mx;
            ss += s * s;
        }
        norm[f] = mx * std::sqrt(ss);
        for (std::size_t r = 0; r < m; ++r) mag[f * m + r] /= norm[f];
    }

    std::vector<double> sim(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (norm[i] == 0.0) continue;
        sim[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (norm[j] == 0.0) continue;
            double dot = 0.0;
            for (std::size_t r = 0; r < m; ++r) dot += mag[i * m + r] * mag[j * m + r];
            sim[i * n + j] = dot;
            sim[j * n + i] = dot;
        }
    }
    return FeatureSimilarity(n, std::move(sim));
}

}  // namespace egp
