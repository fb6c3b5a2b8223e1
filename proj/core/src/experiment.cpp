#include "egp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "egp/baselines.hpp"

namespace egp {

namespace {

constexpr std::uint64_t kTestSeedSalt = 0x74657374ULL;

const std::pair<Method, const char*> kMethodNames[] = {
    {Method::GP, "GP"},         {Method::M3GP, "M3GP"},     {Method::eGP_N, "eGP-N"},
    {Method::eGP_W, "eGP-W"},   {Method::eGP_N5, "eGP-N5"}, {Method::eGP_W5, "eGP-W5"},
    {Method::eGPn, "eGPn"},     {Method::eGPw, "eGPw"},
};

// Shortest round-trip formatting keeps the CSVs byte-stable and exact.
std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_double_field(const std::string& s, const std::string& context) {
    double v;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError(context + ": cannot parse number '" + s + "'");
    return v;
}

std::uint64_t parse_u64_field(const std::string& s, const std::string& context) {
    std::uint64_t v;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw DataError(context + ": cannot parse integer '" + s + "'");
    return v;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace

const char* method_name(Method m) {
    for (const auto& [method, name] : kMethodNames)
        if (method == m) return name;
    return "?";
}

std::optional<Method> parse_method(const std::string& name) {
    for (const auto& [method, mname] : kMethodNames)
        if (name == mname) return method;
    return std::nullopt;
}

bool method_is_ensemble(Method m) { return m != Method::GP && m != Method::M3GP; }

Variant method_variant(Method m) {
    switch (m) {
        case Method::eGP_N: return Variant::eGP_N;
        case Method::eGP_W: return Variant::eGP_W;
        case Method::eGP_N5: return Variant::eGP_N5;
        case Method::eGP_W5: return Variant::eGP_W5;
        case Method::eGPn: return Variant::eGPn;
        case Method::eGPw: return Variant::eGPw;
        default: throw std::invalid_argument("method has no ensemble variant");
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config: " + path);

    ExperimentConfig cfg;
    cfg.runs = 30;

    std::string section;
    DatasetSpec* current_dataset = nullptr;
    MethodOverrides* current_override = nullptr;

    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& why) -> void {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + why);
    };

    while (std::getline(in, line)) {
        ++line_no;
        // strip comments, allow full-line and trailing
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            current_dataset = nullptr;
            current_override = nullptr;
            if (section == "experiment") {
                // nothing to allocate
            } else if (section.rfind("dataset:", 0) == 0) {
                DatasetSpec spec;
                spec.name = trim(section.substr(8));
                if (spec.name.empty()) fail("dataset section needs a name");
                cfg.datasets.push_back(spec);
                current_dataset = &cfg.datasets.back();
            } else if (section.rfind("method:", 0) == 0) {
                const std::string name = trim(section.substr(7));
                const auto m = parse_method(name);
                if (!m) fail("unknown method '" + name + "'");
                current_override = &cfg.overrides[*m];
            } else {
                fail("unknown section '" + section + "'");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) fail("empty key or value");

        if (section == "experiment") {
            if (key == "runs")
                cfg.runs = static_cast<unsigned>(parse_u64_field(value, path));
            else if (key == "seed")
                cfg.base_seed = parse_u64_field(value, path);
            else if (key == "output")
                cfg.output_dir = value;
            else if (key == "generations")
                cfg.generations = static_cast<unsigned>(parse_u64_field(value, path));
            else if (key == "methods") {
                cfg.methods.clear();
                for (const std::string& name : split_list(value)) {
                    const auto m = parse_method(name);
                    if (!m) fail("unknown method '" + name + "'");
                    cfg.methods.push_back(*m);
                }
            } else {
                fail("unknown key '" + key + "' in [experiment]");
            }
        } else if (current_dataset) {
            if (key == "path")
                current_dataset->path = value;
            else if (key == "label")
                current_dataset->label_column = value;
            else if (key == "header") {
                if (value == "true")
                    current_dataset->has_header = true;
                else if (value == "false")
                    current_dataset->has_header = false;
                else
                    fail("header must be true or false");
            } else {
                fail("unknown key '" + key + "' in dataset section");
            }
        } else if (current_override) {
            if (key == "generations")
                current_override->generations = static_cast<unsigned>(parse_u64_field(value, path));
            else if (key == "population")
                current_override->population = parse_u64_field(value, path);
            else
                fail("unknown key '" + key + "' in method section");
        } else {
            fail("key outside of a section");
        }
    }

    if (cfg.datasets.empty()) throw DataError(path + ": no [dataset:...] sections");
    if (cfg.methods.empty()) throw DataError(path + ": no methods configured");
    if (cfg.runs < 1) throw DataError(path + ": runs must be >= 1");
    for (const auto& d : cfg.datasets)
        if (d.path.empty()) throw DataError(path + ": dataset '" + d.name + "' has no path");
    return cfg;
}

RunResult execute_run(const Dataset& ds, const std::string& dataset_name, Method method,
                      unsigned run, const ExperimentConfig& cfg) {
    const std::uint64_t seed = derive_seed(cfg.base_seed, method_name(method), dataset_name, run);
    unsigned generations = cfg.generations.value_or(100);
    std::optional<std::size_t> population;
    if (auto it = cfg.overrides.find(method); it != cfg.overrides.end()) {
        if (it->second.generations) generations = *it->second.generations;
        if (it->second.population) population = it->second.population;
    }

    RunResult row;
    row.method = method;
    row.dataset = dataset_name;
    row.run = run;
    row.seed = seed;

    const auto started = std::chrono::steady_clock::now();
    switch (method) {
        case Method::GP: {
            GPConfig gp;
            gp.generations = generations;
            if (population) gp.population = *population;
            gp.seed = seed;
            const GPModel model = gp_train(ds, gp);
            const auto test = gp_predict(model, ds, model.split.test_indices);
            std::size_t correct = 0;
            for (std::size_t i = 0; i < test.size(); ++i)
                if (test[i] == ds.labels[model.split.test_indices[i]]) ++correct;
            row.train_accuracy = model.train_accuracy;
            row.test_accuracy =
                static_cast<double>(correct) / static_cast<double>(test.size());
            row.total_nodes = model.tree.node_count();
            row.units = 1;
            break;
        }
        case Method::M3GP: {
            M3GPConfig m3;
            m3.generations = generations;
            if (population) m3.population = *population;
            m3.seed = seed;
            const M3GPModel model = m3gp_train(ds, m3);
            const auto test = m3gp_predict(model, ds, model.split.test_indices);
            std::size_t correct = 0;
            for (std::size_t i = 0; i < test.size(); ++i)
                if (test[i] == ds.labels[model.split.test_indices[i]]) ++correct;
            row.train_accuracy = model.train_accuracy;
            row.test_accuracy =
                static_cast<double>(correct) / static_cast<double>(test.size());
            row.total_nodes = model.best.total_nodes();
            row.units = model.best.dimensions.size();
            break;
        }
        default: {
            EngineConfig ec;
            ec.variant = method_variant(method);
            ec.generations = generations;
            if (population) ec.subpop_size = *population;
            ec.seed = seed;
            const TrainedModel model = train(ds, ec);
            Rng test_rng(mix64(seed ^ kTestSeedSalt));
            const auto test = predict_rows(model, ds, model.split.test_indices, test_rng);
            std::size_t correct = 0;
            for (std::size_t i = 0; i < test.size(); ++i)
                if (test[i] == ds.labels[model.split.test_indices[i]]) ++correct;
            row.train_accuracy = model.train_accuracy;
            row.test_accuracy =
                static_cast<double>(correct) / static_cast<double>(test.size());
            row.total_nodes = model.total_nodes;
            row.units = model.trees.size();
            break;
        }
    }
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return row;
}

ExperimentResults run_experiment(const ExperimentConfig& cfg, unsigned jobs) {
    if (cfg.methods.empty()) throw DataError("no methods configured");
    if (cfg.runs < 1) throw DataError("runs must be >= 1");

    ExperimentResults results;

    // Load datasets up front; a failure records an error row and skips that
    // dataset while the others proceed.
    struct Loaded {
        std::string name;
        Dataset ds;
    };
    std::vector<Loaded> datasets;
    for (const DatasetSpec& spec : cfg.datasets) {
        try {
            CsvOptions opts;
            opts.has_header = spec.has_header;
            opts.label_column = spec.label_column;
            datasets.push_back({spec.name, load_csv(spec.path, opts)});
        } catch (const DataError& e) {
            results.failures.push_back({spec.name, e.what()});
        }
    }

    struct Task {
        std::size_t dataset;
        Method method;
        unsigned run;
    };
    std::vector<Task> tasks;
    for (std::size_t d = 0; d < datasets.size(); ++d)
        for (Method m : cfg.methods)
            for (unsigned r = 0; r < cfg.runs; ++r) tasks.push_back({d, m, r});

    results.rows.resize(tasks.size());
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::string failure_message;
    std::mutex failure_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= tasks.size() || failed.load()) break;
            const Task& t = tasks[i];
            try {
                results.rows[i] =
                    execute_run(datasets[t.dataset].ds, datasets[t.dataset].name, t.method, t.run, cfg);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failure_message = e.what();
                failed.store(true);
                break;
            }
        }
    };

    const unsigned n_workers = std::max(1u, std::min<unsigned>(jobs, std::thread::hardware_concurrency()));
    if (n_workers <= 1 || tasks.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (unsigned w = 0; w < n_workers; ++w) threads.emplace_back(worker);
        for (auto& th : threads) th.join();
    }
    if (failed.load()) throw std::runtime_error("run failed: " + failure_message);
    return results;
}

void write_results_csv(const std::vector<RunResult>& rows, std::ostream& os) {
    os << "method,dataset,run,seed,train_accuracy,test_accuracy,total_nodes,units\n";
    for (const RunResult& r : rows)
        os << method_name(r.method) << ',' << r.dataset << ',' << r.run << ',' << r.seed << ','
           << format_double(r.train_accuracy) << ',' << format_double(r.test_accuracy) << ','
           << r.total_nodes << ',' << r.units << '\n';
}

std::vector<RunResult> read_results_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open results: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty results file");
    if (trim(line) != "method,dataset,run,seed,train_accuracy,test_accuracy,total_nodes,units")
        throw DataError(path + ": unexpected results header");

    std::vector<RunResult> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
        if (cells.size() != 8)
            throw DataError(path + ":" + std::to_string(line_no) + ": expected 8 columns");
        const auto m = parse_method(cells[0]);
        if (!m) throw DataError(path + ":" + std::to_string(line_no) + ": unknown method");
        RunResult r;
        r.method = *m;
        r.dataset = cells[1];
        r.run = static_cast<unsigned>(parse_u64_field(cells[2], path));
        r.seed = parse_u64_field(cells[3], path);
        r.train_accuracy = parse_double_field(cells[4], path);
        r.test_accuracy = parse_double_field(cells[5], path);
        r.total_nodes = parse_u64_field(cells[6], path);
        r.units = parse_u64_field(cells[7], path);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_timings_csv(const std::vector<RunResult>& rows, std::ostream& os) {
    os << "method,dataset,run,wall_time_s\n";
    for (const RunResult& r : rows)
        os << method_name(r.method) << ',' << r.dataset << ',' << r.run << ','
           << format_double(r.wall_time_s) << '\n';
}

void write_failures_csv(const std::vector<DatasetFailure>& failures, std::ostream& os) {
    os << "dataset,error\n";
    for (const DatasetFailure& f : failures) {
        std::string msg = f.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        os << f.dataset << ',' << msg << '\n';
    }
}

Report summarize(const std::vector<RunResult>& rows, double alpha) {
    if (rows.empty()) throw DataError("summarize: no result rows");

    // group rows by (method, dataset), preserving first-appearance order
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::vector<const RunResult*>> groups;
    for (const RunResult& r : rows) {
        const auto key = std::make_pair(std::string(method_name(r.method)), r.dataset);
        if (groups[key].empty()) keys.push_back(key);
        groups[key].push_back(&r);
    }

    Report report;
    for (const auto& key : keys) {
        const auto& group = groups[key];
        SummaryRow s;
        s.method = key.first;
        s.dataset = key.second;
        s.runs = group.size();
        std::vector<double> train, test, nodes, units;
        for (const RunResult* r : group) {
            train.push_back(r->train_accuracy);
            test.push_back(r->test_accuracy);
            nodes.push_back(static_cast<double>(r->total_nodes));
            units.push_back(static_cast<double>(r->units));
        }
        s.train_median = quantile(train, 0.5);
        s.train_q1 = quantile(train, 0.25);
        s.train_q3 = quantile(train, 0.75);
        s.test_median = quantile(test, 0.5);
        s.test_q1 = quantile(test, 0.25);
        s.test_q3 = quantile(test, 0.75);
        s.nodes_median = quantile(nodes, 0.5);
        s.units_median = quantile(units, 0.5);
        report.rows.push_back(std::move(s));
    }

    // significance counting needs at least two methods
    SampleTable train_samples, test_samples;
    for (const RunResult& r : rows) {
        train_samples[method_name(r.method)][r.dataset].push_back(r.train_accuracy);
        test_samples[method_name(r.method)][r.dataset].push_back(r.test_accuracy);
    }
    if (train_samples.size() >= 2) {
        report.train_counts = pairwise_significance_counts(train_samples, alpha);
        report.test_counts = pairwise_significance_counts(test_samples, alpha);
    }
    return report;
}

void write_summary_csv(const Report& report, std::ostream& os) {
    os << "method,dataset,runs,train_median,train_q1,train_q3,test_median,test_q1,test_q3,"
          "nodes_median,units_median\n";
    for (const SummaryRow& s : report.rows)
        os << s.method << ',' << s.dataset << ',' << s.runs << ',' << format_double(s.train_median)
           << ',' << format_double(s.train_q1) << ',' << format_double(s.train_q3) << ','
           << format_double(s.test_median) << ',' << format_double(s.test_q1) << ','
           << format_double(s.test_q3) << ',' << format_double(s.nodes_median) << ','
           << format_double(s.units_median) << '\n';
}

void write_report_text(const Report& report, std::ostream& os) {
    os << "per-method medians (train / test accuracy, nodes, units)\n";
    for (const SummaryRow& s : report.rows)
        os << "  " << s.method << " on " << s.dataset << ": train " << s.train_median << "  test "
           << s.test_median << "  nodes " << s.nodes_median << "  units " << s.units_median
           << "  (" << s.runs << " runs)\n";
    if (!report.train_counts.methods.empty()) {
        os << "\nsignificantly-better counts, training:\n";
        report.train_counts.write_text(os);
        os << "\nsignificantly-better counts, test:\n";
        report.test_counts.write_text(os);
    }
}

void write_boxplot_csv(const std::vector<RunResult>& rows, std::ostream& os,
                       const std::vector<double>& drop_percent) {
    auto dropped = [&](double accuracy) {
        for (double v : drop_percent)
            if (std::fabs(accuracy * 100.0 - v) <= 0.005) return true;
        return false;
    };
    os << "method,dataset,run,seed,phase,accuracy,nodes,units\n";
    for (const RunResult& r : rows) {
        if (!dropped(r.train_accuracy))
            os << method_name(r.method) << ',' << r.dataset << ',' << r.run << ',' << r.seed
               << ",train," << format_double(r.train_accuracy) << ',' << r.total_nodes << ','
               << r.units << '\n';
        if (!dropped(r.test_accuracy))
            os << method_name(r.method) << ',' << r.dataset << ',' << r.run << ',' << r.seed
               << ",test," << format_double(r.test_accuracy) << ',' << r.total_nodes << ','
               << r.units << '\n';
    }
}

std::string write_experiment_outputs(const ExperimentResults& results,
                                     const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);

    const std::string results_path = (dir / "results.csv").string();
    {
        std::ofstream os(results_path, std::ios::binary);
        write_results_csv(results.rows, os);
    }
    {
        std::ofstream os(dir / "timings.csv", std::ios::binary);
        write_timings_csv(results.rows, os);
    }
    if (!results.failures.empty()) {
        std::ofstream os(dir / "errors.csv", std::ios::binary);
        write_failures_csv(results.failures, os);
    }
    if (!results.rows.empty()) {
        // Everything below re-reads the stored CSV: the summaries are pure
        // functions of the persisted results.
        const auto rows = read_results_csv(results_path);
        const Report report = summarize(rows);
        std::ofstream summary(dir / "summary.csv", std::ios::binary);
        write_summary_csv(report, summary);
        std::ofstream box(dir / "boxplot.csv", std::ios::binary);
        write_boxplot_csv(rows, box);
        std::ofstream text(dir / "report.txt", std::ios::binary);
        write_report_text(report, text);
        if (!report.train_counts.methods.empty()) {
            std::ofstream train_csv(dir / "significance_train.csv", std::ios::binary);
            report.train_counts.write_csv(train_csv);
            std::ofstream test_csv(dir / "significance_test.csv", std::ios::binary);
            report.test_counts.write_csv(test_csv);
        }
    }
    return results_path;
}

}  // namespace egp
