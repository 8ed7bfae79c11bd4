#include "slopelab/experiment.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace slopelab;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    int jobs = 1;
    double tol_scale = 1.0;
    bool no_timestamp = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config (JSON)");
    cmd->add_option("--seed", args.seed, "master seed");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--jobs", args.jobs, "worker count")->check(CLI::PositiveNumber);
    cmd->add_option("--tol-scale", args.tol_scale, "multiplier on certificate slacks")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--no-timestamp", args.no_timestamp, "suppress timestamp header lines");
}

exp::ExperimentConfig load_config(const CommonArgs& args) {
    if (args.config_path.empty()) return exp::default_config();
    std::ifstream in(args.config_path);
    if (!in) throw std::invalid_argument("config: cannot open '" + args.config_path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return exp::parse_config(buf.str());
}

exp::RunFlags make_flags(const CommonArgs& args) {
    exp::RunFlags flags;
    flags.seed = args.seed;
    flags.out_dir = args.out_dir;
    flags.jobs = args.jobs;
    flags.tol_scale = args.tol_scale;
    flags.no_timestamp = args.no_timestamp;
    return flags;
}

gen::Instance first_instance(const exp::ExperimentConfig& cfg, std::uint64_t seed) {
    gen::InstanceSpec spec = cfg.sweeps.front().spec;
    Rng mix(seed);
    spec.seed = mix.next_u64() ^ (spec.seed + 0x100000001ull);
    return gen::generate(spec);
}

int cmd_flow(const CommonArgs& args) {
    exp::ExperimentConfig cfg = load_config(args);
    gen::Instance inst = first_instance(cfg, args.seed);
    flow::FlowTrajectory traj = flow::integrate(inst.f, inst.x, cfg.flow);

    std::filesystem::create_directories(args.out_dir);
    std::ofstream out(std::filesystem::path(args.out_dir) / "trajectory.jsonl");
    out << flow::to_json_lines(traj);
    std::cout << "steps=" << traj.size() << " termination=" << termination_name(traj.termination)
              << " total_length=" << traj.total_length()
              << " final_slope=" << traj.slopes.back() << '\n';
    return 0;
}

int cmd_verify(const CommonArgs& args) {
    exp::ExperimentConfig cfg = load_config(args);
    gen::Instance inst = first_instance(cfg, args.seed);
    double r = cfg.tube_multiple * inst.dist_x;

    stability::VerifyOptions vopts;
    vopts.tube_samples = cfg.tube_samples;
    vopts.argmin_samples = cfg.argmin_samples;
    vopts.flow = cfg.flow;
    vopts.tol_scale = cfg.tol_scale * args.tol_scale;
    stability::DeviationReport rep = stability::verify_instance(inst.f, inst.g, inst.x, r, vopts);

    std::filesystem::create_directories(args.out_dir);
    std::ofstream out(std::filesystem::path(args.out_dir) / "report.json");
    out << stability::report_to_json("verify/0", inst.f.dim(), r, rep) << '\n';

    std::cout.precision(12);
    std::cout << "lhs=" << rep.lhs << " rhs_main=" << rep.rhs_main << " margin=" << rep.margin
              << " slope_dev_traj=" << rep.slope_dev_traj
              << " value_dev_argmin=" << rep.value_dev_argmin
              << " delta_star=" << rep.delta_star << " proof_case=" << rep.proof_case
              << " passed=" << (rep.passed ? "yes" : "no") << '\n';
    if (std::abs(rep.margin) <= 1e-9 * rep.scale)
        std::cout << "equality case (margin 0 within tolerance)\n";
    return rep.passed ? 0 : 1;
}

int cmd_sweep(const CommonArgs& args) {
    exp::ExperimentConfig cfg = load_config(args);
    exp::RunSummary summary = exp::run(cfg, make_flags(args));
    std::cout << "instances=" << summary.instances << " failures=" << summary.failures
              << " min_margin=" << summary.min_margin << '\n';
    return summary.all_certificates_passed ? 0 : 1;
}

int cmd_reconstruct(const CommonArgs& args) {
    exp::ExperimentConfig cfg = load_config(args);
    gen::Instance inst = first_instance(cfg, args.seed);

    flow::FlowOptions fopts = cfg.flow;
    double gap = inst.f.eval(inst.x) - inst.f.min_value();
    fopts.value_gap_floor = std::max(1e-8 * gap, 1e-300);
    fopts.slope_floor = 1e-12;
    fopts.halving_tol = std::min(fopts.halving_tol, 1e-6);
    flow::FlowTrajectory traj = flow::integrate(inst.f, inst.x, fopts);
    bounds::Reconstruction rec = bounds::reconstruct_value_gap(inst.f, traj);

    std::cout.precision(12);
    std::cout << "recovered_gap=" << rec.integral << " true_gap=" << gap
              << " rel_error=" << std::abs(rec.integral - gap) / std::max(gap, 1e-300)
              << (rec.complete ? "" : " (partial: trajectory truncated early)") << '\n';
    return 0;
}

int cmd_knstudy(const CommonArgs& args, int n_override, int count) {
    exp::ExperimentConfig cfg = load_config(args);
    gen::InstanceSpec spec = cfg.sweeps.front().spec;
    if (n_override > 0) spec.n = n_override;

    std::vector<flow::FlowTrajectory> trajs;
    Rng mix(args.seed);
    flow::FlowOptions fopts = cfg.flow;
    fopts.slope_floor = 1e-10;
    for (int k = 0; k < count; ++k) {
        spec.seed = mix.next_u64();
        gen::Instance inst = gen::generate(spec);
        fopts.value_gap_floor =
            std::max(1e-8 * (inst.f.eval(inst.x) - inst.f.min_value()), 1e-300);
        trajs.push_back(flow::integrate(inst.f, inst.x, fopts));
    }
    std::vector<const flow::FlowTrajectory*> ptrs;
    for (const auto& t : trajs) ptrs.push_back(&t);
    bounds::KnSummary summary = bounds::kn_ratio_study(ptrs, spec.n);

    std::cout.precision(12);
    std::cout << "n=" << summary.dimension << " instances=" << summary.count
              << " max_ratio=" << summary.max_ratio << " mean_ratio=" << summary.mean_ratio
              << " theoretical_bound=" << summary.theoretical_bound
              << " within_bound=" << (summary.within_bound ? "yes" : "no") << '\n';
    return summary.within_bound ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"slope-lab: subgradient-flow experiments for convex functions"};
    app.require_subcommand(1);

    CommonArgs args;
    int kn_n = 0, kn_count = 50;

    CLI::App* c_flow = app.add_subcommand("flow", "integrate one trajectory and dump it");
    CLI::App* c_verify = app.add_subcommand("verify", "certify the deviation bound on one instance");
    CLI::App* c_sweep = app.add_subcommand("sweep", "run a family study");
    CLI::App* c_rec = app.add_subcommand("reconstruct", "recover the value gap from slopes");
    CLI::App* c_kn = app.add_subcommand("knstudy", "length/distance ratio study");
    for (CLI::App* c : {c_flow, c_verify, c_sweep, c_rec, c_kn}) add_common(c, args);
    c_kn->add_option("--n", kn_n, "dimension override");
    c_kn->add_option("--count", kn_count, "instance count")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_flow->parsed()) return cmd_flow(args);
        if (c_verify->parsed()) return cmd_verify(args);
        if (c_sweep->parsed()) return cmd_sweep(args);
        if (c_rec->parsed()) return cmd_reconstruct(args);
        if (c_kn->parsed()) return cmd_knstudy(args, kn_n, kn_count);
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
