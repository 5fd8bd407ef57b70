#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "perc/kernel.hpp"

namespace perc {

// Flat dotted-key configuration. Text files use `key = value` lines with #
// comments; .json files are the flattened JSON equivalent.
struct ExperimentConfig {
    std::string experiment = "scaling";
    int d = 2;

    std::string kernel_family = "boolean_power";
    double gamma = 1.0;
    double zeta = 3.0;

    std::string mark_kind = "dirac";
    double mark_value = 0.5;
    double mark_lo = 0.0, mark_hi = 1.0;
    double mark_alpha = 0.0, mark_a0 = 1.0;
    std::vector<double> mark_values, mark_weights;

    double lambda = 4.0;
    std::vector<double> L_list{8.0};
    int trials = 100;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir;
    bool timings = false;
    bool witnesses = false;

    double c = 0.0; // 0: calibrate from the pilot cell

    std::string sweep_param = "lambda"; // or "zeta"
    double sweep_from = 1.0, sweep_to = 8.0;
    int sweep_steps = 8;
    double window_side = 30.0;
    int axis = 0;

    double lambda_star = 0.0;
    double ell_star = 0.2;
    int K = 16;
    double slice_k = 0.0; // 0: default (4N when renorm m,n are set, else L)

    double demo_alpha = 0.05;
    long long demo_kappa = 2;
    int renorm_m = 0, renorm_n = 0; // 0,0: search
    double eps_prime = 1.0 / 24.0;

    int M = 8;
    double p_occ = 0.8;
    std::string oracle = "bernoulli";

    MarkDistribution mark_distribution() const;
    KernelSpec kernel_spec() const;           // raw (unnormalized)
    KernelSpec kernel_spec_normalized() const;
};

std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> parse_config_json(const std::string& text);
ExperimentConfig config_from_map(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> config_to_map(const ExperimentConfig& cfg);
std::uint64_t config_content_hash(const std::map<std::string, std::string>& kv);

struct TrialRecord {
    std::string experiment;
    double L = 0.0, lambda = 0.0, zeta = 0.0;
    int trial = 0;
    std::uint64_t seed = 0;
    long long count = 0;
    bool success = false;
    long long ms = 0;
};

struct ExperimentResult {
    std::vector<TrialRecord> records;
    std::string summary_json; // pretty-printed
    bool ok = true;           // false flags a failed sanity gate, not an error
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

// csv with the stable schema `experiment,L,lambda,zeta,trial,seed,count,success,ms`
std::string records_to_csv(const std::vector<TrialRecord>& records);

int cli_main(int argc, const char* const* argv);

// cooperative cancellation: trial loops stop scheduling new work once set,
// and the runners emit only completed trials (summary gains "interrupted")
void request_interrupt();
bool interrupt_requested();
void clear_interrupt();

// derived per-trial stream key, recorded in the csv seed column
std::uint64_t trial_stream_key(std::uint64_t master, std::uint64_t experiment_id,
                               std::uint64_t cell, std::uint64_t trial);

} // namespace perc
