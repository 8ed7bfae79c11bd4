#ifndef SLOPELAB_EXPERIMENT_HPP
#define SLOPELAB_EXPERIMENT_HPP

#include "slopelab/instance_gen.hpp"
#include "slopelab/stability.hpp"

#include <map>
#include <string>
#include <vector>

namespace slopelab::exp {

// One instance family: `count` draws of the spec, optionally repeated for
// each value of eps_grid (the eps sweep used for the deviation plots).
struct SweepSpec {
    std::string name;
    gen::InstanceSpec spec;
    int count = 10;
    std::vector<double> eps_grid;  // empty: single eps from spec
};

struct ExperimentConfig {
    std::vector<SweepSpec> sweeps;
    double tube_multiple = 2.0;  // tube radius = multiple * d(x, C_f)
    int tube_samples = 256;
    int argmin_samples = 64;
    double tol_scale = 1.0;
    flow::FlowOptions flow;
};

// Parses and validates a JSON config; throws std::invalid_argument with the
// offending field named.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig default_config();

struct RunFlags {
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int jobs = 1;
    double tol_scale = 1.0;
    bool no_timestamp = false;
};

struct InstanceResult {
    std::string id;
    gen::InstanceSpec spec;
    double r = 0.0;
    stability::DeviationReport report;
    bounds::LengthCertificate certificate;
    double cert_delta = 0.0;
    double cert_gap = 0.0;
    bool ok = false;
    std::string error;
};

struct RunSummary {
    int instances = 0;
    int failures = 0;
    double max_margin = -1.0;
    double min_margin = 0.0;
    std::map<int, double> empirical_kn;  // per dimension: max observed length/dist ratio
    bool all_certificates_passed = false;
};

// Writes reports.csv, certificates.csv, summary.json and, for eps sweeps,
// sweep_<name>.csv into flags.out_dir. Returns the summary; exit status policy
// belongs to the CLI.
RunSummary run(const ExperimentConfig& config, const RunFlags& flags,
               std::vector<InstanceResult>* results_out = nullptr);

std::vector<InstanceResult> run_instances(const ExperimentConfig& config, const RunFlags& flags);

}  // namespace slopelab::exp

#endif
