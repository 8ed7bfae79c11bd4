#ifndef SLOPELAB_STABILITY_HPP
#define SLOPELAB_STABILITY_HPP

#include "slopelab/bounds.hpp"
#include "slopelab/flow.hpp"

#include <string>
#include <vector>

namespace slopelab::stability {

// U_r = {x : d(x, C_f) <= r}, carried as a deterministic low-discrepancy
// sample inside a bounding box of C_f inflated by r.
struct Tube {
    double radius = 0.0;
    const ConvexFunction* f = nullptr;
    std::vector<Vec> samples;
};

// Axis-aligned bounding box of C_f via 2n support LPs; throws QpUnbounded
// when C_f is unbounded in some direction.
std::pair<Vec, Vec> argmin_bounding_box(const ConvexFunction& f);

Tube make_tube(const ConvexFunction& f, double radius, int sample_count = 4096);

// Points of C_f: low-discrepancy box samples projected onto the argmin set,
// witness included.
std::vector<Vec> sample_argmin(const ConvexFunction& f, int sample_count = 256);

// sup of max(value, 0); 0 on an empty list
double one_sided_sup(const std::vector<double>& values);

double slope_deviation_tube(const ConvexFunction& f, const ConvexFunction& g, const Tube& tube);
double slope_deviation_at(const ConvexFunction& f, const ConvexFunction& g,
                          const std::vector<Vec>& points);
double value_deviation_argmin(const ConvexFunction& f, const ConvexFunction& g,
                              const std::vector<Vec>& argmin_samples);

// delta minimizing the delta-parametric bound: sqrt(slope_dev * gap / dist)
double delta_star(double slope_dev, double gap, double dist);

// right side of the delta-parametric estimate:
// (slope_dev + delta) * dist + (slope_dev / delta) * gap + value_dev
double ad1_rhs(double slope_dev, double delta, double dist, double gap, double value_dev);

// optimized form: slope_dev * dist + value_dev + 2 sqrt(dist * slope_dev * gap)
double main_rhs(double slope_dev, double dist, double gap, double value_dev);

// dimension-constant form: K * slope_dev * dist + value_dev
double cv1_rhs(double kn, double slope_dev, double dist, double value_dev);

struct VerifyOptions {
    int tube_samples = 4096;
    int argmin_samples = 256;
    flow::FlowOptions flow;
    double kn_constant = 0.0;  // 0: use this trajectory's own length/distance ratio
    double tol_scale = 1.0;
    int delta_grid_points = 33;   // geometric grid on [delta*/16, 16 delta*]
    bool keep_a_sequence = true;
};

struct DeviationReport {
    Vec x;
    double dist_x = 0.0;
    double gap_x = 0.0;
    double slope_dev_tube = 0.0;   // sampled lower estimate over U_r
    double slope_dev_traj = 0.0;   // sound certificate over the proof's evaluation points
    double value_dev_argmin = 0.0;
    double delta_star = 0.0;
    double lhs = 0.0;              // g(x) - f(x)
    double rhs_main = 0.0;         // certificate variant (slope_dev_traj)
    double rhs_main_tube = 0.0;
    double rhs_cv1 = 0.0;
    double ad1_grid_min = 0.0;
    double kn_ratio = 0.0;         // observed length/distance ratio of this trajectory
    double margin = 0.0;           // rhs_main - lhs
    double scale = 1.0;            // 1 + |f(x)| + |g(x)| + gap_x
    int proof_case = 0;            // 1: s_f(x) <= delta*, 2: otherwise
    bool passed = false;
    std::vector<double> a_sequence;  // f(gamma_k) - g(gamma_k)
};

// Full proof pipeline for one instance: flow of f from x, truncation at
// delta*, projections, deviation certificate.
DeviationReport verify_instance(const ConvexFunction& f, const ConvexFunction& g, const Vec& x,
                                double r, const VerifyOptions& opts = {});

struct CorollaryRow {
    int k = 0;
    double slope_dev = 0.0;   // one-sided, over the bounded set samples
    double value_dev_cf = 0.0;
    double sup_dev = 0.0;     // one-sided sup of f_k - f over the bounded set
    double envelope = 0.0;    // Theorem-1 bound built from the first two
    bool dominated = false;
};

struct CorollaryReport {
    std::vector<CorollaryRow> rows;
    bool all_dominated = false;
};

// Sequence check behind the robust-determination corollaries, over the box
// [box_lo, box_hi] as the bounded set. Rejects families whose argmin sets are
// unbounded.
CorollaryReport corollary_check(const ConvexFunction& f,
                                const std::vector<ConvexFunction>& fk, const Vec& box_lo,
                                const Vec& box_hi, int sample_count = 2048);

std::string report_csv_header();
std::string report_csv_row(const std::string& instance_id, int n, double r,
                           const DeviationReport& rep);
std::string report_to_json(const std::string& instance_id, int n, double r,
                           const DeviationReport& rep);

}  // namespace slopelab::stability

#endif
