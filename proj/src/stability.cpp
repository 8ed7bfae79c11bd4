#include "slopelab/stability.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace slopelab::stability {

std::pair<Vec, Vec> argmin_bounding_box(const ConvexFunction& f) {
    const int n = f.dim();
    const ArgminDescription& am = f.argmin();
    Vec lo(n), hi(n);
    if (am.constraint_system.G.rows() == 0 && am.constraint_system.E.rows() == 0)
        throw QpUnbounded("argmin_bounding_box: argmin set is the whole space", Vec::Zero(n));
    for (int j = 0; j < n; ++j) {
        for (int sgn : {+1, -1}) {
            minnorm::QpProblem prob;
            prob.P = Mat::Zero(n, n);
            prob.q = Vec::Zero(n);
            prob.q[j] = sgn;  // minimize sgn * y_j
            prob.cons = am.constraint_system;
            Vec y = minnorm::solve_qp(prob, am.witness, f.tol().tol_qp).point;
            (sgn > 0 ? lo[j] : hi[j]) = y[j];
        }
    }
    return {lo, hi};
}

Tube make_tube(const ConvexFunction& f, double radius, int sample_count) {
    if (!(radius > 0)) throw std::invalid_argument("make_tube: radius must be positive");
    auto [lo, hi] = argmin_bounding_box(f);
    Vec box_lo = lo.array() - radius;
    Vec box_hi = hi.array() + radius;

    Tube tube;
    tube.radius = radius;
    tube.f = &f;
    HaltonSequence halton(f.dim());
    const long attempts_cap = 20L * sample_count;
    for (long a = 0; a < attempts_cap && int(tube.samples.size()) < sample_count; ++a) {
        Vec u = halton.next();
        Vec x = box_lo.array() + u.array() * (box_hi - box_lo).array();
        if (f.project_argmin(x).second <= radius) tube.samples.push_back(x);
    }
    if (tube.samples.empty())
        throw SolverError("make_tube: rejection cap hit before any sample landed in the tube");
    return tube;
}

std::vector<Vec> sample_argmin(const ConvexFunction& f, int sample_count) {
    const ArgminDescription& am = f.argmin();
    std::vector<Vec> pts{am.witness};
    auto [lo, hi] = argmin_bounding_box(f);
    if ((hi - lo).norm() <= f.tol().tol_argmin) return pts;  // singleton argmin
    HaltonSequence halton(f.dim());
    for (int k = 1; k < sample_count; ++k) {
        Vec u = halton.next();
        Vec x = lo.array() + u.array() * (hi - lo).array();
        pts.push_back(minnorm::project_polyhedron(x, am.constraint_system, am.witness));
    }
    return pts;
}

double one_sided_sup(const std::vector<double>& values) {
    double s = 0.0;
    for (double v : values) s = std::max(s, v);
    return s;
}

double slope_deviation_at(const ConvexFunction& f, const ConvexFunction& g,
                          const std::vector<Vec>& points) {
    double s = 0.0;
    for (const Vec& x : points) s = std::max(s, g.slope(x) - f.slope(x));
    return s;
}

double slope_deviation_tube(const ConvexFunction& f, const ConvexFunction& g, const Tube& tube) {
    return slope_deviation_at(f, g, tube.samples);
}

double value_deviation_argmin(const ConvexFunction& f, const ConvexFunction& g,
                              const std::vector<Vec>& argmin_samples) {
    double s = 0.0;
    for (const Vec& x : argmin_samples) s = std::max(s, g.eval(x) - f.eval(x));
    return s;
}

double delta_star(double slope_dev, double gap, double dist) {
    if (dist <= 0.0 || slope_dev <= 0.0 || gap <= 0.0) return 0.0;
    return std::sqrt(slope_dev * gap / dist);
}

double ad1_rhs(double slope_dev, double delta, double dist, double gap, double value_dev) {
    if (!(delta > 0)) throw std::invalid_argument("ad1_rhs: delta must be positive");
    return (slope_dev + delta) * dist + (slope_dev / delta) * gap + value_dev;
}

double main_rhs(double slope_dev, double dist, double gap, double value_dev) {
    return slope_dev * dist + value_dev + 2.0 * std::sqrt(dist * slope_dev * gap);
}

double cv1_rhs(double kn, double slope_dev, double dist, double value_dev) {
    return kn * slope_dev * dist + value_dev;
}

DeviationReport verify_instance(const ConvexFunction& f, const ConvexFunction& g, const Vec& x,
                                double r, const VerifyOptions& opts) {
    DeviationReport rep;
    rep.x = x;
    auto [proj_x, dist_x] = f.project_argmin(x);
    rep.dist_x = dist_x;
    if (dist_x > r * (1.0 + 1e-9) + f.tol().tol_argmin)
        throw std::invalid_argument("verify_instance: x lies outside the tube of radius r");
    rep.gap_x = f.eval(x) - f.min_value();
    rep.lhs = g.eval(x) - f.eval(x);
    rep.scale = 1.0 + std::abs(f.eval(x)) + std::abs(g.eval(x)) + rep.gap_x;

    Tube tube = make_tube(f, r, opts.tube_samples);
    rep.slope_dev_tube = slope_deviation_tube(f, g, tube);
    rep.value_dev_argmin = value_deviation_argmin(f, g, sample_argmin(f, opts.argmin_samples));

    // flow of f from x; the proof evaluates slope deviations only along it
    flow::FlowTrajectory traj = flow::integrate(f, x, opts.flow);
    rep.kn_ratio = bounds::kn_ratio(traj);

    std::vector<Vec> cert_points = traj.points;
    cert_points.push_back(x);
    cert_points.push_back(proj_x);
    rep.slope_dev_traj = slope_deviation_at(f, g, cert_points);
    rep.delta_star = delta_star(rep.slope_dev_traj, rep.gap_x, rep.dist_x);

    // gamma_T and its projection, at the delta* truncation
    if (rep.delta_star > 0.0) {
        int t_idx = flow::truncate_at_slope(traj, rep.delta_star);
        Vec gamma_t = traj.points[t_idx];
        Vec proj_t = f.project_argmin(gamma_t).first;
        double extra = std::max({g.slope(gamma_t) - f.slope(gamma_t),
                                 g.slope(proj_t) - f.slope(proj_t), 0.0});
        rep.slope_dev_traj = std::max(rep.slope_dev_traj, extra);
    }

    rep.proof_case = f.slope(x) <= rep.delta_star ? 1 : 2;
    rep.rhs_main = main_rhs(rep.slope_dev_traj, rep.dist_x, rep.gap_x, rep.value_dev_argmin);
    rep.rhs_main_tube =
        main_rhs(rep.slope_dev_tube, rep.dist_x, rep.gap_x, rep.value_dev_argmin);
    double kn = opts.kn_constant > 0.0 ? opts.kn_constant : rep.kn_ratio;
    rep.rhs_cv1 = cv1_rhs(kn, rep.slope_dev_traj, rep.dist_x, rep.value_dev_argmin);

    // delta-grid minimum of the parametric bound
    rep.ad1_grid_min = rep.rhs_main;
    if (rep.delta_star > 0.0) {
        rep.ad1_grid_min = std::numeric_limits<double>::infinity();
        const int np = std::max(opts.delta_grid_points, 2);
        for (int i = 0; i < np; ++i) {
            double expo = -4.0 + 8.0 * double(i) / double(np - 1);  // [delta*/16, 16 delta*]
            double d = rep.delta_star * std::pow(2.0, expo);
            rep.ad1_grid_min = std::min(
                rep.ad1_grid_min,
                ad1_rhs(rep.slope_dev_traj, d, rep.dist_x, rep.gap_x, rep.value_dev_argmin));
        }
    }

    rep.margin = rep.rhs_main - rep.lhs;
    rep.passed = rep.lhs <= rep.rhs_main + 1e-6 * rep.scale * opts.tol_scale;
    if (opts.keep_a_sequence) {
        rep.a_sequence.reserve(traj.points.size());
        for (const Vec& p : traj.points) rep.a_sequence.push_back(f.eval(p) - g.eval(p));
    }
    return rep;
}

CorollaryReport corollary_check(const ConvexFunction& f, const std::vector<ConvexFunction>& fk,
                                const Vec& box_lo, const Vec& box_hi, int sample_count) {
    argmin_bounding_box(f);  // throws when C_f is unbounded
    for (const ConvexFunction& g : fk) argmin_bounding_box(g);

    const int n = f.dim();
    HaltonSequence halton(n);
    std::vector<Vec> samples;
    samples.reserve(sample_count);
    for (int k = 0; k < sample_count; ++k) {
        Vec u = halton.next();
        samples.push_back(box_lo.array() + u.array() * (box_hi - box_lo).array());
    }
    double max_dist = 0.0, max_gap = 0.0;
    for (const Vec& x : samples) {
        max_dist = std::max(max_dist, f.project_argmin(x).second);
        max_gap = std::max(max_gap, f.eval(x) - f.min_value());
    }

    CorollaryReport rep;
    rep.all_dominated = true;
    int k = 0;
    for (const ConvexFunction& g : fk) {
        CorollaryRow row;
        row.k = ++k;
        row.slope_dev = slope_deviation_at(f, g, samples);
        row.value_dev_cf = value_deviation_argmin(f, g, sample_argmin(f));
        std::vector<double> devs;
        devs.reserve(samples.size());
        for (const Vec& x : samples) devs.push_back(g.eval(x) - f.eval(x));
        row.sup_dev = one_sided_sup(devs);
        row.envelope = main_rhs(row.slope_dev, max_dist, max_gap, row.value_dev_cf);
        double scale = 1.0 + max_gap + std::abs(f.min_value());
        row.dominated = row.sup_dev <= row.envelope + 1e-6 * scale;
        rep.all_dominated = rep.all_dominated && row.dominated;
        rep.rows.push_back(row);
    }
    return rep;
}

std::string report_csv_header() {
    return "instance_id,n,r,dist_x,gap_x,slope_dev_tube,slope_dev_traj,value_dev_argmin,"
           "delta_star,lhs,rhs_main,rhs_cv1,margin,proof_case,passed";
}

std::string report_csv_row(const std::string& instance_id, int n, double r,
                           const DeviationReport& rep) {
    std::ostringstream os;
    os.precision(17);
    os << instance_id << ',' << n << ',' << r << ',' << rep.dist_x << ',' << rep.gap_x << ','
       << rep.slope_dev_tube << ',' << rep.slope_dev_traj << ',' << rep.value_dev_argmin << ','
       << rep.delta_star << ',' << rep.lhs << ',' << rep.rhs_main << ',' << rep.rhs_cv1 << ','
       << rep.margin << ',' << rep.proof_case << ',' << (rep.passed ? 1 : 0);
    return os.str();
}

std::string report_to_json(const std::string& instance_id, int n, double r,
                           const DeviationReport& rep) {
    nlohmann::json j;
    j["instance_id"] = instance_id;
    j["n"] = n;
    j["r"] = r;
    j["x"] = std::vector<double>(rep.x.data(), rep.x.data() + rep.x.size());
    j["dist_x"] = rep.dist_x;
    j["gap_x"] = rep.gap_x;
    j["slope_dev_tube"] = rep.slope_dev_tube;
    j["slope_dev_traj"] = rep.slope_dev_traj;
    j["value_dev_argmin"] = rep.value_dev_argmin;
    j["delta_star"] = rep.delta_star;
    j["lhs"] = rep.lhs;
    j["rhs_main"] = rep.rhs_main;
    j["rhs_main_tube"] = rep.rhs_main_tube;
    j["rhs_cv1"] = rep.rhs_cv1;
    j["ad1_grid_min"] = rep.ad1_grid_min;
    j["kn_ratio"] = rep.kn_ratio;
    j["margin"] = rep.margin;
    j["proof_case"] = rep.proof_case;
    j["passed"] = rep.passed;
    j["a_sequence"] = rep.a_sequence;
    return j.dump();
}

}  // namespace slopelab::stability
