#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egp/baselines.hpp"
#include "egp/experiment.hpp"
#include "selftest.hpp"

namespace {

// exit codes: 0 ok, 1 usage, 2 data error, 3 internal invariant violation
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct TrainArgs {
    std::string dataset_path;
    std::string label = "-1";
    bool no_header = false;
    std::string method = "eGP-N";
    unsigned generations = 100;
    std::optional<std::size_t> population;
    std::uint64_t seed = 1;
    std::string out = "model.json";
    std::string trace;
};

int cmd_train(const TrainArgs& a) {
    const auto method = egp::parse_method(a.method);
    if (!method) {
        std::cerr << "unknown method: " << a.method << "\n";
        return kExitUsage;
    }
    egp::CsvOptions opts;
    opts.has_header = !a.no_header;
    opts.label_column = a.label;
    const egp::Dataset ds = egp::load_csv(a.dataset_path, opts);

    std::string model_json;
    std::string trace_csv;
    if (*method == egp::Method::GP) {
        egp::GPConfig cfg;
        cfg.generations = a.generations;
        if (a.population) cfg.population = *a.population;
        cfg.seed = a.seed;
        const egp::GPModel model = egp::gp_train(ds, cfg);
        model_json = model.to_json();
        std::ostringstream os;
        os << "generation,best_rmse\n";
        for (std::size_t g = 0; g < model.best_rmse_trace.size(); ++g)
            os << g << ',' << model.best_rmse_trace[g] << '\n';
        trace_csv = os.str();
        std::cerr << "train accuracy " << model.train_accuracy << ", nodes "
                  << model.tree.node_count() << "\n";
    } else if (*method == egp::Method::M3GP) {
        egp::M3GPConfig cfg;
        cfg.generations = a.generations;
        if (a.population) cfg.population = *a.population;
        cfg.seed = a.seed;
        const egp::M3GPModel model = egp::m3gp_train(ds, cfg);
        model_json = model.to_json();
        std::ostringstream os;
        os << "generation,best_acc\n";
        for (std::size_t g = 0; g < model.best_acc_trace.size(); ++g)
            os << g << ',' << model.best_acc_trace[g] << '\n';
        trace_csv = os.str();
        std::cerr << "train accuracy " << model.train_accuracy << ", dimensions "
                  << model.best.dimensions.size() << "\n";
    } else {
        egp::EngineConfig cfg;
        cfg.variant = egp::method_variant(*method);
        cfg.generations = a.generations;
        if (a.population) cfg.subpop_size = *a.population;
        cfg.seed = a.seed;
        const egp::TrainedModel model = egp::train(ds, cfg);
        model_json = model.to_json();
        std::ostringstream os;
        model.write_trace_csv(os);
        trace_csv = os.str();
        std::cerr << "train accuracy " << model.train_accuracy << ", forest size "
                  << model.trees.size() << ", nodes " << model.total_nodes << "\n";
    }

    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw egp::DataError("cannot write " + a.out);
    out << model_json << '\n';
    if (!a.trace.empty()) {
        std::ofstream tr(a.trace, std::ios::binary);
        if (!tr) throw egp::DataError("cannot write " + a.trace);
        tr << trace_csv;
    }
    std::cerr << "model written to " << a.out << "\n";
    return kExitOk;
}

struct ExperimentArgs {
    std::string config;
    std::string out;
    unsigned jobs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> runs;
    std::vector<std::string> methods;
    std::optional<unsigned> generations;
};

int cmd_experiment(const ExperimentArgs& a) {
    egp::ExperimentConfig cfg = egp::load_config(a.config);
    if (!a.out.empty()) cfg.output_dir = a.out;
    if (a.seed) cfg.base_seed = *a.seed;
    if (a.runs) cfg.runs = *a.runs;
    if (a.generations) cfg.generations = *a.generations;
    if (!a.methods.empty()) {
        cfg.methods.clear();
        for (const std::string& name : a.methods) {
            const auto m = egp::parse_method(name);
            if (!m) {
                std::cerr << "unknown method: " << name << "\n";
                return kExitUsage;
            }
            cfg.methods.push_back(*m);
        }
    }

    const egp::ExperimentResults results = egp::run_experiment(cfg, a.jobs);
    for (const auto& f : results.failures)
        std::cerr << "dataset " << f.dataset << " skipped: " << f.message << "\n";
    const std::string results_path = egp::write_experiment_outputs(results, cfg);
    std::cerr << results.rows.size() << " runs recorded in " << results_path << "\n";
    if (results.rows.empty()) {
        std::cerr << "no dataset could be loaded\n";
        return kExitData;
    }
    return kExitOk;
}

struct SummarizeArgs {
    std::string results_path;
    std::string out;
    std::vector<double> drop_outliers;
};

int cmd_summarize(const SummarizeArgs& a) {
    const auto rows = egp::read_results_csv(a.results_path);
    const egp::Report report = egp::summarize(rows);

    namespace fs = std::filesystem;
    fs::create_directories(a.out);
    {
        std::ofstream os(fs::path(a.out) / "summary.csv", std::ios::binary);
        egp::write_summary_csv(report, os);
    }
    {
        std::ofstream os(fs::path(a.out) / "boxplot.csv", std::ios::binary);
        egp::write_boxplot_csv(rows, os, a.drop_outliers);
    }
    if (!report.train_counts.methods.empty()) {
        std::ofstream train_csv(fs::path(a.out) / "significance_train.csv", std::ios::binary);
        report.train_counts.write_csv(train_csv);
        std::ofstream test_csv(fs::path(a.out) / "significance_test.csv", std::ios::binary);
        report.test_counts.write_csv(test_csv);
    }
    egp::write_report_text(report, std::cout);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ensemble GP trainer and experiment harness"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train one model and dump it as JSON");
    train->add_option("--dataset", train_args.dataset_path, "CSV file")->required();
    train->add_option("--label", train_args.label, "label column name or 0-based index");
    train->add_flag("--no-header", train_args.no_header, "CSV has no header row");
    train->add_option("--method", train_args.method, "GP, M3GP, eGP-N, eGP-W, eGP-N5, eGP-W5, eGPn, eGPw");
    train->add_option("--generations", train_args.generations, "generations to evolve");
    train->add_option("--population", train_args.population, "population / subpopulation size");
    train->add_option("--seed", train_args.seed, "random seed");
    train->add_option("--out", train_args.out, "model output path");
    train->add_option("--trace", train_args.trace, "write per-generation trace CSV here");

    ExperimentArgs exp_args;
    CLI::App* experiment = app.add_subcommand("experiment", "run the full multi-run harness");
    experiment->add_option("--config", exp_args.config, "experiment config file")->required();
    experiment->add_option("--out", exp_args.out, "output directory (overrides config)");
    experiment->add_option("--jobs", exp_args.jobs, "parallel worker count");
    experiment->add_option("--seed", exp_args.seed, "base seed (overrides config)");
    experiment->add_option("--runs", exp_args.runs, "runs per method/dataset (overrides config)");
    experiment->add_option("--methods", exp_args.methods, "methods to run (overrides config)")
        ->delimiter(',');
    experiment->add_option("--generations", exp_args.generations, "generations (overrides config)");

    SummarizeArgs sum_args;
    CLI::App* summarize = app.add_subcommand("summarize", "summarize a stored results.csv");
    summarize->add_option("results", sum_args.results_path, "results.csv path")->required();
    summarize->add_option("--out", sum_args.out, "output directory")->required();
    summarize
        ->add_option("--drop-outliers", sum_args.drop_outliers,
                     "accuracy values (percent) to exclude from boxplot.csv")
        ->delimiter(',');

    std::uint64_t selftest_seed = 1;
    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in invariant suite");
    selftest->add_option("--seed", selftest_seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (experiment->parsed()) return cmd_experiment(exp_args);
        if (summarize->parsed()) return cmd_summarize(sum_args);
        if (selftest->parsed())
            return egp::tools::run_selftest(selftest_seed) == 0 ? kExitOk : kExitInternal;
    } catch (const egp::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::logic_error& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
