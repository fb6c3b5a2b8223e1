#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "egp/dataset.hpp"
#include "egp/engine.hpp"
#include "egp/stats.hpp"

namespace egp {

/// Everything the harness can run: the two baselines plus the six ensemble
/// variants.
enum class Method { GP, M3GP, eGP_N, eGP_W, eGP_N5, eGP_W5, eGPn, eGPw };

const char* method_name(Method m);
std::optional<Method> parse_method(const std::string& name);
bool method_is_ensemble(Method m);
Variant method_variant(Method m);  // only for ensemble methods

struct DatasetSpec {
    std::string name;
    std::string path;
    std::string label_column = "-1";  // name or 0-based index; -1 = last
    bool has_header = true;
};

struct MethodOverrides {
    std::optional<unsigned> generations;
    std::optional<std::size_t> population;  // GP/M3GP population or eGP subpopulation
};

struct ExperimentConfig {
    std::vector<DatasetSpec> datasets;
    std::vector<Method> methods;
    unsigned runs = 30;
    std::uint64_t base_seed = 1;
    std::string output_dir = "out";
    std::optional<unsigned> generations;  // applies to every method unless overridden
    std::map<Method, MethodOverrides> overrides;
};

/// Parse the sectioned key/value config format:
///
///   [experiment]
///   runs = 10
///   seed = 42
///   output = out
///   methods = GP, eGP-N
///   generations = 100
///
///   [dataset:heart]
///   path = data/heart.csv
///   label = class
///   header = true
///
///   [method:eGP-N]
///   generations = 30
///   population = 100
///
/// Throws DataError with a line number on any malformed content.
ExperimentConfig load_config(const std::string& path);

struct RunResult {
    Method method;
    std::string dataset;
    unsigned run = 0;
    std::uint64_t seed = 0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t total_nodes = 0;
    std::size_t units = 0;  // ensemble trees, M3GP dimensions, or 1 for GP
    double wall_time_s = 0.0;
};

struct DatasetFailure {
    std::string dataset;
    std::string message;
};

struct ExperimentResults {
    std::vector<RunResult> rows;
    std::vector<DatasetFailure> failures;
};

/// Train one method once on an already-loaded dataset and measure it.
RunResult execute_run(const Dataset& ds, const std::string& dataset_name, Method method,
                      unsigned run, const ExperimentConfig& cfg);

/// Run every (dataset, method, run) combination. A dataset that fails to
/// load is recorded in `failures` and skipped; the rest proceed. Runs may
/// execute on `jobs` worker threads; the result rows come back in a fixed
/// order regardless of scheduling, because every run derives its own seed.
ExperimentResults run_experiment(const ExperimentConfig& cfg, unsigned jobs = 1);

/// results.csv is the deterministic record (no timing data):
/// method,dataset,run,seed,train_accuracy,test_accuracy,total_nodes,units
void write_results_csv(const std::vector<RunResult>& rows, std::ostream& os);
std::vector<RunResult> read_results_csv(const std::string& path);

/// Wall times go to a separate file so results.csv stays byte-reproducible.
void write_timings_csv(const std::vector<RunResult>& rows, std::ostream& os);

void write_failures_csv(const std::vector<DatasetFailure>& failures, std::ostream& os);

struct SummaryRow {
    std::string method;
    std::string dataset;
    std::size_t runs = 0;
    double train_median = 0, train_q1 = 0, train_q3 = 0;
    double test_median = 0, test_q1 = 0, test_q3 = 0;
    double nodes_median = 0;
    double units_median = 0;
};

struct Report {
    std::vector<SummaryRow> rows;
    SignificanceCounts train_counts;
    SignificanceCounts test_counts;
};

/// Pure function of parsed result rows; the CLI always reads results back
/// from the stored CSV so the in-process report and a later re-summarize
/// are the same computation.
Report summarize(const std::vector<RunResult>& rows, double alpha = 0.01);

void write_summary_csv(const Report& report, std::ostream& os);
void write_report_text(const Report& report, std::ostream& os);

/// Long-format boxplot data with pinned columns:
/// method,dataset,run,seed,phase,accuracy,nodes,units
/// Rows whose accuracy (in percent) matches an entry of drop_percent within
/// 0.005 are excluded, mirroring the outlier lists used for plotting.
void write_boxplot_csv(const std::vector<RunResult>& rows, std::ostream& os,
                       const std::vector<double>& drop_percent = {});

/// Write results/timings/failures plus the summary family into
/// cfg.output_dir. Returns the path of results.csv.
std::string write_experiment_outputs(const ExperimentResults& results,
                                     const ExperimentConfig& cfg);

}  // namespace egp
