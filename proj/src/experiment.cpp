#include "slopelab/experiment.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace slopelab::exp {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw std::invalid_argument(where + ": unknown field '" + it.key() + "'");
    }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(where + "." + key + ": wrong type");
    }
}

gen::InstanceSpec parse_spec(const json& j, const std::string& where) {
    reject_unknown_keys(j, {"n", "family", "pieces", "box_bound", "perturbation", "eps", "seed",
                            "name", "count", "eps_grid"},
                        where);
    gen::InstanceSpec s;
    s.n = field_or(j, "n", s.n, where);
    if (j.contains("family")) s.family = gen::family_from_string(j.at("family").get<std::string>());
    s.pieces = field_or(j, "pieces", s.pieces, where);
    s.box_bound = field_or(j, "box_bound", s.box_bound, where);
    if (j.contains("perturbation"))
        s.perturbation = gen::perturbation_from_string(j.at("perturbation").get<std::string>());
    s.eps = field_or(j, "eps", s.eps, where);
    s.seed = field_or(j, "seed", s.seed, where);
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(where + "." + e.what());
    }
    return s;
}

std::string timestamp_line() {
    auto now = std::chrono::system_clock::now();
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    std::ostringstream os;
    os << "# generated_at_unix " << secs;
    return os.str();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }
    reject_unknown_keys(
        j, {"sweeps", "tube_multiple", "tube_samples", "argmin_samples", "tol_scale", "flow"},
        "config");

    ExperimentConfig cfg;
    cfg.tube_multiple = field_or(j, "tube_multiple", cfg.tube_multiple, "config");
    if (!(cfg.tube_multiple > 0))
        throw std::invalid_argument("config.tube_multiple: must be positive");
    cfg.tube_samples = field_or(j, "tube_samples", cfg.tube_samples, "config");
    if (cfg.tube_samples < 1) throw std::invalid_argument("config.tube_samples: must be >= 1");
    cfg.argmin_samples = field_or(j, "argmin_samples", cfg.argmin_samples, "config");
    if (cfg.argmin_samples < 1) throw std::invalid_argument("config.argmin_samples: must be >= 1");
    cfg.tol_scale = field_or(j, "tol_scale", cfg.tol_scale, "config");
    if (!(cfg.tol_scale > 0)) throw std::invalid_argument("config.tol_scale: must be positive");

    if (j.contains("flow")) {
        const json& jf = j.at("flow");
        reject_unknown_keys(jf,
                            {"initial_step", "halving_tol", "slope_floor", "value_gap_floor",
                             "time_cap", "max_step", "trust_length"},
                            "config.flow");
        cfg.flow.initial_step = field_or(jf, "initial_step", cfg.flow.initial_step, "config.flow");
        cfg.flow.halving_tol = field_or(jf, "halving_tol", cfg.flow.halving_tol, "config.flow");
        cfg.flow.slope_floor = field_or(jf, "slope_floor", cfg.flow.slope_floor, "config.flow");
        cfg.flow.value_gap_floor =
            field_or(jf, "value_gap_floor", cfg.flow.value_gap_floor, "config.flow");
        cfg.flow.time_cap = field_or(jf, "time_cap", cfg.flow.time_cap, "config.flow");
        cfg.flow.max_step = field_or(jf, "max_step", cfg.flow.max_step, "config.flow");
        cfg.flow.trust_length =
            field_or(jf, "trust_length", cfg.flow.trust_length, "config.flow");
        if (!(cfg.flow.initial_step > 0 && cfg.flow.halving_tol > 0 && cfg.flow.slope_floor > 0 &&
              cfg.flow.value_gap_floor > 0 && cfg.flow.time_cap > 0 && cfg.flow.max_step > 0))
            throw std::invalid_argument("config.flow: all fields must be positive");
    }

    if (!j.contains("sweeps") || !j.at("sweeps").is_array() || j.at("sweeps").empty())
        throw std::invalid_argument("config.sweeps: must be a nonempty array");
    int idx = 0;
    for (const json& js : j.at("sweeps")) {
        std::string where = "config.sweeps[" + std::to_string(idx) + "]";
        SweepSpec sw;
        sw.name = field_or(js, "name", std::string("sweep") + std::to_string(idx), where);
        sw.spec = parse_spec(js, where);
        sw.count = field_or(js, "count", sw.count, where);
        if (sw.count < 1) throw std::invalid_argument(where + ".count: must be >= 1");
        sw.eps_grid = field_or(js, "eps_grid", std::vector<double>{}, where);
        for (double e : sw.eps_grid)
            if (e < 0) throw std::invalid_argument(where + ".eps_grid: entries must be >= 0");
        cfg.sweeps.push_back(std::move(sw));
        ++idx;
    }
    return cfg;
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    SweepSpec sw;
    sw.name = "default";
    sw.spec = gen::InstanceSpec{};
    sw.count = 20;
    cfg.sweeps.push_back(sw);
    return cfg;
}

std::vector<InstanceResult> run_instances(const ExperimentConfig& config, const RunFlags& flags) {
    // lay out the full instance list first; ids and seeds are independent of
    // scheduling so output order is reproducible
    struct Job {
        std::string id;
        gen::InstanceSpec spec;
    };
    std::vector<Job> jobs;
    for (const SweepSpec& sw : config.sweeps) {
        std::vector<double> eps_values = sw.eps_grid;
        if (eps_values.empty()) eps_values.push_back(sw.spec.eps);
        for (size_t ei = 0; ei < eps_values.size(); ++ei) {
            for (int k = 0; k < sw.count; ++k) {
                Job job;
                job.spec = sw.spec;
                job.spec.eps = eps_values[ei];
                Rng mix(flags.seed);
                job.spec.seed = mix.next_u64() ^ (sw.spec.seed + 0x100000001ull * (ei * 1000 + k + 1));
                std::ostringstream id;
                id << sw.name << "/eps" << ei << "/i" << k;
                job.id = id.str();
                jobs.push_back(std::move(job));
            }
        }
    }

    std::vector<InstanceResult> results(jobs.size());
    std::atomic<size_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = cursor.fetch_add(1);
            if (i >= jobs.size()) return;
            InstanceResult& res = results[i];
            res.id = jobs[i].id;
            res.spec = jobs[i].spec;
            try {
                gen::Instance inst = gen::generate(jobs[i].spec);
                res.r = config.tube_multiple * inst.dist_x;

                stability::VerifyOptions vopts;
                vopts.tube_samples = config.tube_samples;
                vopts.argmin_samples = config.argmin_samples;
                vopts.flow = config.flow;
                vopts.tol_scale = config.tol_scale * flags.tol_scale;
                res.report = stability::verify_instance(inst.f, inst.g, inst.x, res.r, vopts);

                double s0 = inst.f.slope(inst.x);
                res.cert_delta = res.report.delta_star > 0 ? res.report.delta_star
                                 : s0 > 0                  ? 0.5 * s0
                                                           : 1.0;
                flow::FlowTrajectory traj = flow::integrate(inst.f, inst.x, config.flow);
                res.certificate = bounds::lemma1_certificate(inst.f, traj, res.cert_delta);
                res.cert_gap = inst.f.eval(inst.x) - inst.f.min_value();
                res.ok = true;
            } catch (const std::exception& e) {
                res.ok = false;
                res.error = e.what();
            }
        }
    };
    int nthreads = std::max(1, flags.jobs);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    return results;
}

RunSummary run(const ExperimentConfig& config, const RunFlags& flags,
               std::vector<InstanceResult>* results_out) {
    namespace fs = std::filesystem;
    fs::create_directories(flags.out_dir);

    std::vector<InstanceResult> results = run_instances(config, flags);

    RunSummary summary;
    summary.instances = int(results.size());
    summary.all_certificates_passed = true;
    bool first_margin = true;
    for (const InstanceResult& res : results) {
        if (!res.ok) {
            ++summary.failures;
            summary.all_certificates_passed = false;
            continue;
        }
        if (!res.report.passed || !res.certificate.passed) {
            ++summary.failures;
            summary.all_certificates_passed = false;
        }
        if (first_margin) {
            summary.max_margin = summary.min_margin = res.report.margin;
            first_margin = false;
        } else {
            summary.max_margin = std::max(summary.max_margin, res.report.margin);
            summary.min_margin = std::min(summary.min_margin, res.report.margin);
        }
        auto [it, inserted] = summary.empirical_kn.try_emplace(res.spec.n, res.report.kn_ratio);
        if (!inserted) it->second = std::max(it->second, res.report.kn_ratio);
    }

    auto open_csv = [&](const std::string& name, const std::string& header) {
        std::ofstream out(fs::path(flags.out_dir) / name);
        out.precision(17);
        if (!flags.no_timestamp) out << timestamp_line() << '\n';
        out << header << '\n';
        return out;
    };

    {
        std::ofstream out = open_csv("reports.csv", stability::report_csv_header());
        for (const InstanceResult& res : results)
            if (res.ok) out << stability::report_csv_row(res.id, res.spec.n, res.r, res.report) << '\n';
    }
    {
        std::ofstream out = open_csv("certificates.csv", bounds::certificate_csv_header());
        for (const InstanceResult& res : results)
            if (res.ok)
                out << bounds::certificate_csv_row(res.id, res.spec.n, res.report.dist_x,
                                                   res.cert_gap, res.cert_delta, res.certificate)
                    << '\n';
    }

    // per-sweep deviation plot data for eps sweeps
    for (const SweepSpec& sw : config.sweeps) {
        if (sw.eps_grid.empty()) continue;
        std::ofstream out =
            open_csv("sweep_" + sw.name + ".csv", "eps,slope_dev,lhs_sup_sampled,rhs_main");
        for (size_t ei = 0; ei < sw.eps_grid.size(); ++ei) {
            double slope_dev = 0.0, lhs_sup = 0.0, rhs = 0.0;
            for (const InstanceResult& res : results) {
                if (!res.ok || res.spec.eps != sw.eps_grid[ei]) continue;
                if (res.id.rfind(sw.name + "/", 0) != 0) continue;
                slope_dev = std::max(slope_dev, res.report.slope_dev_traj);
                lhs_sup = std::max(lhs_sup, res.report.lhs);
                rhs = std::max(rhs, res.report.rhs_main);
            }
            out << sw.eps_grid[ei] << ',' << slope_dev << ',' << lhs_sup << ',' << rhs << '\n';
        }
    }

    {
        nlohmann::json j;
        if (!flags.no_timestamp) j["generated_at"] = timestamp_line();
        j["instances"] = summary.instances;
        j["failures"] = summary.failures;
        j["max_margin"] = summary.max_margin;
        j["min_margin"] = summary.min_margin;
        j["all_certificates_passed"] = summary.all_certificates_passed;
        nlohmann::json kn = nlohmann::json::object();
        for (const auto& [n, v] : summary.empirical_kn) kn[std::to_string(n)] = v;
        j["empirical_kn"] = kn;
        nlohmann::json errs = nlohmann::json::array();
        for (const InstanceResult& res : results)
            if (!res.ok) errs.push_back({{"id", res.id}, {"error", res.error}});
        j["errors"] = errs;
        std::ofstream out(fs::path(flags.out_dir) / "summary.json");
        out << j.dump(2) << '\n';
    }

    if (results_out) *results_out = std::move(results);
    return summary;
}

}  // namespace slopelab::exp
