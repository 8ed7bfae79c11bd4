#ifndef SLOPELAB_MINNORM_QP_HPP
#define SLOPELAB_MINNORM_QP_HPP

#include "slopelab/common.hpp"

#include <optional>
#include <vector>

namespace slopelab::minnorm {

// Vertex-described polytope: translation + conv(generators).
struct Polytope {
    std::vector<Vec> generators;
    Vec translation;  // zero vector when absent

    int dim() const { return generators.empty() ? int(translation.size()) : int(generators.front().size()); }
};

struct MinNormResult {
    Vec point;
    double norm = 0.0;
    std::vector<double> weights;  // convex weights over generators (zero off the corral)
};

// Wolfe's minimum-norm-point algorithm over the simplex of generator weights.
// Optimality is certified by <v, p_i - v> >= -tol for every shifted generator
// p_i = translation + generators[i]. Ties broken by lowest index.
MinNormResult min_norm_point(const Polytope& p, double tol = 1e-10);

// Linear constraints G y <= h, E y = e. Either block may be empty (0 rows).
struct LinearConstraints {
    Mat G;
    Vec h;
    Mat E;
    Vec e;

    int dim() const { return G.rows() > 0 ? int(G.cols()) : int(E.cols()); }
    bool satisfied(const Vec& y, double tol) const;
    double max_violation(const Vec& y) const;
};

struct QpProblem {
    Mat P;  // symmetric PSD
    Vec q;
    LinearConstraints cons;
};

struct QpResult {
    Vec point;
    double objective = 0.0;
    int iterations = 0;
};

// Primal active-set method for convex (PSD) QP, dense, desk scale. A feasible
// start may be supplied; otherwise a phase-1 subproblem finds one.
QpResult solve_qp(const QpProblem& prob, std::optional<Vec> feasible_start = std::nullopt,
                  double tol = 1e-10);

// Euclidean projection onto {y : G y <= h, E y = e}.
Vec project_polyhedron(const Vec& x, const LinearConstraints& cons,
                       std::optional<Vec> feasible_start = std::nullopt, double tol = 1e-10);

// Feasible point via phase 1; throws QpInfeasible.
Vec find_feasible_point(const LinearConstraints& cons, double tol = 1e-10);

// Max KKT residual (stationarity, feasibility, complementarity) of a claimed
// solution; multipliers recovered by least squares over the active set.
double kkt_residual(const QpProblem& prob, const Vec& y, double activity_tol = 1e-7);

}  // namespace slopelab::minnorm

#endif
