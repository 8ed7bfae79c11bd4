#include "slopelab/flow.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace slopelab::flow {

const char* termination_name(Termination t) {
    switch (t) {
        case Termination::slope_floor_reached: return "slope_floor_reached";
        case Termination::value_gap_reached: return "value_gap_reached";
        case Termination::time_cap: return "time_cap";
        case Termination::reached_argmin: return "reached_argmin";
    }
    return "unknown";
}

namespace {

// slope_cap: prox certificate ||x_prev - x|| / h, an upper bound on s_f(x)
// that stays sharp when x lands within activation tolerance of a kink
void push_state(FlowTrajectory& traj, const ConvexFunction& f, double t, const Vec& x,
                double slope_cap = std::numeric_limits<double>::infinity()) {
    double len = 0.0;
    if (!traj.points.empty()) len = traj.cum_length.back() + (x - traj.points.back()).norm();
    traj.times.push_back(t);
    traj.points.push_back(x);
    traj.values.push_back(f.eval(x));
    traj.slopes.push_back(std::min(f.slope(x), slope_cap));
    traj.dist_to_argmin.push_back(f.project_argmin(x).second);
    traj.cum_length.push_back(len);
}

FlowTrajectory integrate_exact_quadratic(const ConvexFunction& f, const Vec& x0,
                                         const FlowOptions& opts) {
    // gamma(t) = c + Q exp(-Lambda t) Q' (x0 - c), valid for A positive definite
    Eigen::SelfAdjointEigenSolver<Mat> es(f.quad_matrix());
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("integrate: exact mode requires a positive definite quadratic");
    const Vec lam = es.eigenvalues();
    const Mat q = es.eigenvectors();
    const Vec w0 = q.transpose() * (x0 - f.quad_center());
    const double fstar = f.min_value();

    FlowTrajectory traj;
    double t = 0.0;
    const double dt = opts.initial_step;
    for (;;) {
        Vec w(lam.size());
        for (int i = 0; i < lam.size(); ++i) w[i] = std::exp(-lam[i] * t) * w0[i];
        Vec x = f.quad_center() + q * w;
        push_state(traj, f, t, x);
        if (traj.dist_to_argmin.back() <= f.tol().tol_argmin) {
            traj.termination = Termination::reached_argmin;
            return traj;
        }
        if (traj.slopes.back() <= opts.slope_floor) {
            traj.termination = Termination::slope_floor_reached;
            return traj;
        }
        if (traj.values.back() - fstar <= opts.value_gap_floor) {
            traj.termination = Termination::value_gap_reached;
            return traj;
        }
        if (t >= opts.time_cap) {
            traj.termination = Termination::time_cap;
            return traj;
        }
        t += dt;
    }
}

}  // namespace

FlowTrajectory integrate(const ConvexFunction& f, const Vec& x0, const FlowOptions& opts) {
    if (!(opts.initial_step > 0 && opts.halving_tol > 0 && opts.slope_floor > 0 &&
          opts.value_gap_floor > 0 && opts.time_cap > 0 && opts.max_step > 0))
        throw std::invalid_argument("integrate: all FlowOptions fields must be positive");
    if (opts.exact_quadratic) return integrate_exact_quadratic(f, x0, opts);

    const double fstar = f.min_value();
    FlowTrajectory traj;
    push_state(traj, f, 0.0, x0);

    auto done = [&](FlowTrajectory& tr) {
        if (tr.dist_to_argmin.back() <= f.tol().tol_argmin) {
            tr.termination = Termination::reached_argmin;
            return true;
        }
        if (tr.slopes.back() <= opts.slope_floor) {
            tr.termination = Termination::slope_floor_reached;
            return true;
        }
        if (tr.values.back() - fstar <= opts.value_gap_floor) {
            tr.termination = Termination::value_gap_reached;
            return true;
        }
        if (tr.times.back() >= opts.time_cap) {
            tr.termination = Termination::time_cap;
            return true;
        }
        return false;
    };
    if (done(traj)) return traj;

    double h = std::min(opts.initial_step, opts.max_step);
    int clean_steps = 0;
    Vec x = x0;
    double t = 0.0;
    while (true) {
        // step-halving control: one full prox step vs two half steps
        Vec y_full = f.prox(h, x);
        Vec y_mid = f.prox(0.5 * h, x);
        Vec y_half = f.prox(0.5 * h, y_mid);
        double err = (y_full - y_half).norm();
        double move = (y_half - x).norm();
        double cap_mid = (y_mid - x).norm() / (0.5 * h);
        double cap_half = (y_half - y_mid).norm() / (0.5 * h);
        double slope_mid = std::min(f.slope(y_mid), cap_mid);
        double slope_half = std::min(f.slope(y_half), cap_half);
        double slope_slack = 1e-9 * (1.0 + std::abs(traj.values.back()));
        bool monotone = slope_mid <= traj.slopes.back() + slope_slack &&
                        slope_half <= slope_mid + slope_slack;
        if ((err > opts.halving_tol * (1.0 + x.norm()) || move > opts.trust_length ||
             !monotone) && h > 1e-12) {
            h *= 0.5;
            clean_steps = 0;
            if (h <= 1e-12)
                throw SolverError("integrate: step underflow (halved below 1e-12)");
            continue;
        }

        // accept both half points so each record is an exact prox step
        push_state(traj, f, t + 0.5 * h, y_mid, cap_mid);
        if (done(traj)) return traj;
        push_state(traj, f, t + h, y_half, cap_half);
        if (done(traj)) return traj;
        t += h;
        x = y_half;
        if (++clean_steps >= 5) {
            h = std::min(2.0 * h, opts.max_step);
            clean_steps = 0;
        }
    }
}

ViolationReport check_properties(const ConvexFunction& f, const FlowTrajectory& traj) {
    if (traj.size() == 0) throw std::invalid_argument("check_properties: empty trajectory");
    ViolationReport rep;
    const int n = traj.size();
    for (int k = 0; k + 1 < n; ++k) {
        double ds = traj.slopes[k + 1] - traj.slopes[k];
        if (ds > rep.p1_slope_increase) {
            rep.p1_slope_increase = ds;
            rep.p1_index = k + 1;
        }
        double dv = traj.values[k + 1] - traj.values[k];
        if (dv > rep.p2_value_increase) {
            rep.p2_value_increase = dv;
            rep.p2_index = k + 1;
        }
        double dd = traj.dist_to_argmin[k + 1] - traj.dist_to_argmin[k];
        if (dd > rep.p3_dist_increase) {
            rep.p3_dist_increase = dd;
            rep.p3_index = k + 1;
        }
    }
    // discrete convexity of t -> f(gamma(t)): secant slopes nondecreasing
    for (int k = 0; k + 2 < n; ++k) {
        double dt1 = traj.times[k + 1] - traj.times[k];
        double dt2 = traj.times[k + 2] - traj.times[k + 1];
        if (dt1 <= 0 || dt2 <= 0) continue;
        double s1 = (traj.values[k + 1] - traj.values[k]) / dt1;
        double s2 = (traj.values[k + 2] - traj.values[k + 1]) / dt2;
        if (s1 - s2 > rep.p2_convexity_violation) {
            rep.p2_convexity_violation = s1 - s2;
            rep.p2_convexity_index = k + 1;
        }
    }
    // (P3) second clause, against a fixed minimizer
    const Vec xstar = f.argmin().witness;
    double prev = (traj.points[0] - xstar).norm();
    for (int k = 1; k < n; ++k) {
        double cur = (traj.points[k] - xstar).norm();
        if (cur - prev > rep.p3_fixed_point_increase) {
            rep.p3_fixed_point_increase = cur - prev;
            rep.p3_fixed_index = k;
        }
        prev = cur;
    }
    return rep;
}

int truncate_at_slope(const FlowTrajectory& traj, double delta) {
    if (!(delta > 0)) throw std::invalid_argument("truncate_at_slope: delta must be positive");
    int idx = 0;
    for (int k = 0; k < traj.size(); ++k)
        if (traj.slopes[k] > delta) idx = k;
    return idx;
}

double arc_length(const FlowTrajectory& traj, int upto) {
    if (upto < 0 || upto >= traj.size())
        throw std::out_of_range("arc_length: index out of range");
    return traj.cum_length[upto];
}

SlopeCrossing refine_to_slope(const ConvexFunction& f, const Vec& from, double delta,
                              double initial_step) {
    SlopeCrossing out;
    out.point = from;
    out.slope = f.slope(from);
    double h = std::max(initial_step, 1e-8);
    for (int iter = 0; iter < 400 && h > 1e-12; ++iter) {
        Vec y = f.prox(h, out.point);
        // the prox optimality inclusion certifies s_f(y) <= ||y - x|| / h,
        // which stays sharp when y lands a hair off a kink
        double landing = std::min(f.slope(y), (y - out.point).norm() / h);
        if (landing > delta) {
            out.extra_length += (y - out.point).norm();
            out.point = y;
            out.slope = landing;
            h = std::min(2.0 * h, std::max(initial_step, 1.0));
        } else {
            h *= 0.5;
        }
    }
    return out;
}

std::string to_json_lines(const FlowTrajectory& traj) {
    std::string out;
    for (int k = 0; k < traj.size(); ++k) {
        nlohmann::json j;
        j["t"] = traj.times[k];
        j["x"] = std::vector<double>(traj.points[k].data(),
                                     traj.points[k].data() + traj.points[k].size());
        j["f"] = traj.values[k];
        j["slope"] = traj.slopes[k];
        j["dist"] = traj.dist_to_argmin[k];
        j["cumlen"] = traj.cum_length[k];
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace slopelab::flow
