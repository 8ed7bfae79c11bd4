#ifndef SLOPELAB_BOUNDS_HPP
#define SLOPELAB_BOUNDS_HPP

#include "slopelab/flow.hpp"

#include <string>
#include <vector>

namespace slopelab::bounds {

struct LengthCertificate {
    int truncation_index = 0;
    double length_to_T = 0.0;      // arc length until the slope crosses delta
    double slope_at_T = 0.0;       // left limit of the slope at the crossing
    double lemma1_bound = 0.0;     // (f(x0) - f_*) / slope_at_T
    double delta_weakened_bound = 0.0;  // (f(x0) - f_*) / delta
    double kn_ratio = 0.0;         // total curve length / d(x0, C_f)
    bool passed = false;
    bool degenerate = false;       // slope at the crossing below 1e-14
};

LengthCertificate lemma1_certificate(const ConvexFunction& f, const flow::FlowTrajectory& traj,
                                     double delta);

struct KnSummary {
    int dimension = 0;
    int count = 0;
    double max_ratio = 0.0;
    double mean_ratio = 0.0;
    double theoretical_bound = 0.0;  // n^(n/2 + 1)
    bool within_bound = false;
    std::vector<double> ratios;
};

// Ratio of total curve length to d(x0, C_f) across trajectories. Trajectories
// that stop at a value-gap floor are completed with the straight hop to C_f,
// a lower bound on the remaining length.
KnSummary kn_ratio_study(const std::vector<const flow::FlowTrajectory*>& trajectories,
                         int dimension);

double kn_ratio(const flow::FlowTrajectory& traj);

struct Reconstruction {
    double integral = 0.0;        // trapezoidal integral of slope^2 over time
    bool complete = false;        // trajectory reached the argmin or the value-gap floor
    double remaining_gap = 0.0;   // f(end) - f_*, bound on the unintegrated part
};

// Recovers f(x0) - f_* from the slope sequence alone: the computational form
// of determination up to an additive constant.
Reconstruction reconstruct_value_gap(const ConvexFunction& f, const flow::FlowTrajectory& traj);
double integrate_squared_slopes(const std::vector<double>& times,
                                const std::vector<double>& slopes);

// Certificate CSV row: instance_id, n, d(x0,Cf), f_gap, delta, T_index,
// length_T, lemma1_bound, kn_ratio, passed
std::string certificate_csv_header();
std::string certificate_csv_row(const std::string& instance_id, int n, double dist0, double f_gap,
                                double delta, const LengthCertificate& cert);

}  // namespace slopelab::bounds

#endif
