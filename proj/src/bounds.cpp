#include "slopelab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace slopelab::bounds {

LengthCertificate lemma1_certificate(const ConvexFunction& f, const flow::FlowTrajectory& traj,
                                     double delta) {
    if (!(delta > 0)) throw std::invalid_argument("lemma1_certificate: delta must be positive");
    LengthCertificate cert;
    cert.truncation_index = flow::truncate_at_slope(traj, delta);

    const double gap = traj.values.front() - f.min_value();
    cert.length_to_T = traj.cum_length[cert.truncation_index];
    cert.slope_at_T = traj.slopes[cert.truncation_index];

    if (traj.slopes.front() > delta) {
        // walk the remaining piece of {s_f > delta} beyond the last grid point
        double h0 = traj.size() > 1
                        ? std::max(traj.times.back() - traj.times[traj.size() - 2], 1e-6)
                        : 1e-2;
        flow::SlopeCrossing cross =
            flow::refine_to_slope(f, traj.points[cert.truncation_index], delta, h0);
        cert.length_to_T += cross.extra_length;
        cert.slope_at_T = cross.slope;
    }

    cert.degenerate = cert.slope_at_T < 1e-14;
    cert.lemma1_bound = cert.degenerate ? std::numeric_limits<double>::infinity()
                                        : gap / cert.slope_at_T;
    cert.delta_weakened_bound = gap / delta;
    cert.kn_ratio = kn_ratio(traj);
    double scale = 1.0 + std::abs(traj.values.front()) + std::abs(f.min_value());
    cert.passed = cert.length_to_T <= cert.lemma1_bound + 1e-6 * scale;
    return cert;
}

double kn_ratio(const flow::FlowTrajectory& traj) {
    double dist0 = traj.dist_to_argmin.front();
    if (dist0 <= 1e-12) return 1.0;
    // complete the curve with the straight hop from the last point to C_f
    double total = traj.cum_length.back() + traj.dist_to_argmin.back();
    return total / dist0;
}

KnSummary kn_ratio_study(const std::vector<const flow::FlowTrajectory*>& trajectories,
                         int dimension) {
    KnSummary s;
    s.dimension = dimension;
    s.theoretical_bound = std::pow(double(dimension), 0.5 * dimension + 1.0);
    double sum = 0.0;
    for (const flow::FlowTrajectory* traj : trajectories) {
        if (traj->termination != flow::Termination::reached_argmin &&
            traj->termination != flow::Termination::value_gap_reached)
            throw std::invalid_argument(
                "kn_ratio_study: trajectory did not terminate at the argmin or value-gap floor");
        double r = kn_ratio(*traj);
        s.ratios.push_back(r);
        s.max_ratio = std::max(s.max_ratio, r);
        sum += r;
        ++s.count;
    }
    if (s.count > 0) s.mean_ratio = sum / s.count;
    s.within_bound = s.max_ratio <= s.theoretical_bound;
    return s;
}

double integrate_squared_slopes(const std::vector<double>& times,
                                const std::vector<double>& slopes) {
    double acc = 0.0;
    for (size_t k = 0; k + 1 < times.size(); ++k) {
        double dt = times[k + 1] - times[k];
        acc += 0.5 * dt * (slopes[k] * slopes[k] + slopes[k + 1] * slopes[k + 1]);
    }
    return acc;
}

namespace {

// int s dl over one straight segment of the discrete curve, adaptive Simpson
// in arc length. The midpoint test localizes kinks, where s jumps along the
// segment and a fixed rule would misattribute the crossing.
double segment_slope_integral(const ConvexFunction& f, const Vec& a, const Vec& b, double sa,
                              double sb, double tol, int depth) {
    double len = (b - a).norm();
    if (len == 0.0) return 0.0;
    Vec m = 0.5 * (a + b);
    double sm = f.slope(m);
    if (depth == 0 || std::abs(sm - 0.5 * (sa + sb)) * len <= tol)
        return len / 6.0 * (sa + 4.0 * sm + sb);
    return segment_slope_integral(f, a, m, sa, sm, 0.5 * tol, depth - 1) +
           segment_slope_integral(f, m, b, sm, sb, 0.5 * tol, depth - 1);
}

}  // namespace

Reconstruction reconstruct_value_gap(const ConvexFunction& f, const flow::FlowTrajectory& traj) {
    Reconstruction rec;
    // int s^2 dt = int s dl: quadrature in arc length along the recorded
    // polyline, so the kink landings (where the time grid overweights the
    // final step) carry their true length
    double acc = 0.0;
    double tol = 1e-9 * (1.0 + std::abs(traj.values.front()));
    for (int k = 0; k + 1 < traj.size(); ++k)
        acc += segment_slope_integral(f, traj.points[k], traj.points[k + 1], traj.slopes[k],
                                      traj.slopes[k + 1], tol, 30);
    rec.integral = acc;
    rec.complete = traj.termination == flow::Termination::reached_argmin ||
                   traj.termination == flow::Termination::value_gap_reached;
    rec.remaining_gap = traj.values.back() - f.min_value();
    return rec;
}

std::string certificate_csv_header() {
    return "instance_id,n,dist_x0,f_gap,delta,T_index,length_T,lemma1_bound,kn_ratio,passed";
}

std::string certificate_csv_row(const std::string& instance_id, int n, double dist0, double f_gap,
                                double delta, const LengthCertificate& cert) {
    std::ostringstream os;
    os.precision(17);
    os << instance_id << ',' << n << ',' << dist0 << ',' << f_gap << ',' << delta << ','
       << cert.truncation_index << ',' << cert.length_to_T << ',' << cert.lemma1_bound << ','
       << cert.kn_ratio << ',' << (cert.passed ? 1 : 0);
    return os.str();
}

}  // namespace slopelab::bounds
