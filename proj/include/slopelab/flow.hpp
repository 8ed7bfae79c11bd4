#ifndef SLOPELAB_FLOW_HPP
#define SLOPELAB_FLOW_HPP

#include "slopelab/convex_core.hpp"

#include <string>
#include <vector>

namespace slopelab::flow {

enum class Termination { slope_floor_reached, value_gap_reached, time_cap, reached_argmin };

const char* termination_name(Termination t);

// Discretized solution of the subgradient system: every recorded point is one
// implicit-Euler (prox) step from its predecessor.
struct FlowTrajectory {
    std::vector<double> times;
    std::vector<Vec> points;
    std::vector<double> values;
    std::vector<double> slopes;
    std::vector<double> dist_to_argmin;
    std::vector<double> cum_length;
    Termination termination = Termination::time_cap;

    int size() const { return int(times.size()); }
    const Vec& start() const { return points.front(); }
    const Vec& end() const { return points.back(); }
    double total_length() const { return cum_length.back(); }
};

struct FlowOptions {
    double initial_step = 1e-2;
    double halving_tol = 1e-5;     // local error tolerance driving step halving
    double slope_floor = 1e-9;     // stop once s_f drops to this level
    double value_gap_floor = 1e-10;  // stop once f - f_* drops to this level
    double time_cap = 1e3;
    double max_step = 0.25;
    double trust_length = 1e6;     // halve when a single step moves farther than this
    bool exact_quadratic = false;  // closed-form flow for PD quadratics (test oracle)
};

FlowTrajectory integrate(const ConvexFunction& f, const Vec& x0, const FlowOptions& opts);

struct ViolationReport {
    double p1_slope_increase = 0.0;        // max rise of the slope sequence
    int p1_index = -1;
    double p2_value_increase = 0.0;        // max rise of the value sequence
    int p2_index = -1;
    double p2_convexity_violation = 0.0;   // max drop of secant slopes of t -> f(gamma(t))
    int p2_convexity_index = -1;
    double p3_dist_increase = 0.0;         // max rise of d(gamma, C_f)
    int p3_index = -1;
    double p3_fixed_point_increase = 0.0;  // max rise of ||gamma - x*|| for fixed x* in C_f
    int p3_fixed_index = -1;
};

ViolationReport check_properties(const ConvexFunction& f, const FlowTrajectory& traj);

// Last index with slopes[k] > delta (0 when none).
int truncate_at_slope(const FlowTrajectory& traj, double delta);

double arc_length(const FlowTrajectory& traj, int upto);

// Continue with halving prox steps from `from` while the slope stays above
// delta. Locates the slope crossing to high accuracy; returns the landing
// point, the extra length walked, and the slope at the landing point.
struct SlopeCrossing {
    Vec point;
    double extra_length = 0.0;
    double slope = 0.0;
};
SlopeCrossing refine_to_slope(const ConvexFunction& f, const Vec& from, double delta,
                              double initial_step);

// One record per step: {"t":..,"x":[..],"f":..,"slope":..,"dist":..,"cumlen":..}
std::string to_json_lines(const FlowTrajectory& traj);

}  // namespace slopelab::flow

#endif
