#pragma once

#include <map>
#include <string>
#include <vector>

#include "codl/datasets.hpp"
#include "codl/trainer.hpp"

namespace codl {

struct RunReport {
    std::string dataset;
    std::string experiment;
    std::string strategy;
    double tol = 0.0;
    uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double test_mse = 0.0;
    double test_v = 0.0;
    int admissibility_iterations = 0;
    double wall_seconds = 0.0;
    std::string trace_path;
};

// The constraint set a dataset's experiments train and score against; the
// conserved total for CR comes from the data at t_0, not a hard-coded value.
ConstraintSet dataset_constraints(Dataset d, const TimeSeries& train);

// One seeded run: regenerate data, build the net, train, score the test set
// by solving the IVP over the test grid, and persist trace.csv / params.bin /
// report.json under run_dir. Failures are captured in the report.
RunReport run_single(const ExperimentSpec& spec, Strategy strategy, double tol, uint64_t seed,
                     const TrainConfig& base, const std::string& run_dir);

std::vector<RunReport> run_experiment(const ExperimentSpec& spec, Strategy strategy, double tol,
                                      const std::vector<uint64_t>& seeds, const TrainConfig& base,
                                      const std::string& out_dir, int jobs = 1);

struct GridRequest {
    ExperimentSpec spec;
    std::vector<Strategy> strategies;
    std::vector<double> tols;
    std::vector<uint64_t> seeds{1, 2, 3, 4};
    TrainConfig base;
    std::string out_dir;
    int jobs = 1;
};

// Full grid {strategy} x {tol} x {seed}. Single-stage strategies (vanilla,
// penalty) ignore the tolerance: they run once per seed and their reports
// are replicated across tol cells.
std::vector<RunReport> run_grid(const GridRequest& req);

struct CellKey {
    std::string dataset;
    std::string experiment;
    double tol;
    std::string strategy;
    auto operator<=>(const CellKey&) const = default;
};

struct CellStats {
    int count = 0;
    double mse_avg = 0.0, mse_std = 0.0;
    double v_avg = 0.0, v_std = 0.0;
};

struct AggregateReport {
    std::map<CellKey, CellStats> cells; // successful runs only
};

// Mean and population std per (experiment, strategy, tol) cell;
// order-independent, empty cells stay missing.
AggregateReport aggregate(const std::vector<RunReport>& reports);

enum class TableFormat : uint8_t { Csv, Markdown };

// One row per (dataset, experiment, tol), an (MSE, V) column pair per
// strategy, values in 3-significant-digit scientific notation.
void emit_table(const AggregateReport& agg, TableFormat format, const std::string& path);

// 0.01588 -> "1.59E-2"
std::string format_sci(double v);

void write_run_report_json(const RunReport& rep, const std::string& path);
RunReport read_run_report_json(const std::string& path);
// Recursively collects report.json files under a directory tree.
std::vector<RunReport> collect_run_reports(const std::string& dir);

// Mirrors TrainConfig keys plus dataset/experiment; unknown keys rejected.
struct RunRequest {
    ExperimentSpec spec;
    TrainConfig cfg;
};
RunRequest parse_run_config(const std::string& json_text);

// Subcommands: generate-data, train, experiment, report.
// Exit 0 on success, 1 on run failures, 2 on usage errors.
int cli_main(int argc, const char* const* argv);

} // namespace codl
