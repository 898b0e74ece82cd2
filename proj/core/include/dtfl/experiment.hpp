#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dtfl/federation.hpp"
#include "dtfl/scenario.hpp"

namespace dtfl {

struct ExperimentSpec {
    ExperimentSpec();  // applies desk-scale defaults on top of the module ones

    ScenarioConfig scenario;
    FederationConfig fed;
    std::vector<double> channel_sweep{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<int> cluster_sweep{1, 2, 4};
    std::vector<int> fixed_t_sweep{1, 5, 10};
    double target_accuracy = 0.85;
    int repeats = 3;
    std::string output_dir = "out";
    std::vector<std::string> figures{"all"};

    std::vector<std::string> figure_list() const;  // expands "all"
    void validate() const;
};

// Line-oriented "section.key = value" format; '#' starts a comment.
ExperimentSpec parse_config(const std::string& path);
ExperimentSpec parse_config_text(const std::string& text);

void print_defaults(std::ostream& out);

// Known figure analogs, in canonical order.
const std::vector<std::string>& known_figures();

// Runs every requested figure, writing one run directory per
// (arm, seed) plus a summary CSV per figure. Returns the paths of the
// summary files written.
std::vector<std::string> run_experiment(const ExperimentSpec& spec, int threads = 1);

// Per-run CSV emission (metrics.csv, energy.csv, queue.csv, reputation.csv,
// aggregations.csv).
void write_run_csvs(const std::string& dir, const MetricsTrace& trace);
void write_dqn_csv(const std::string& path, const std::vector<DqnStepRecord>& steps);

// Hand-computed oracle checks of the closed-form pieces; prints one line per
// check. Returns true when all pass.
bool run_formula_selftest(std::ostream& out);

// Shared summary helper: linear-interpolation quartiles of a sample.
double quantile(std::vector<double> values, double p);

}  // namespace dtfl
