#include "slopelab/minnorm_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace slopelab::minnorm {

namespace {

std::string diag_json(const char* where, int iter, double residual) {
    std::ostringstream os;
    os << "{\"where\":\"" << where << "\",\"iterations\":" << iter
       << ",\"residual\":" << residual << "}";
    return os.str();
}

// Affine minimizer of ||M alpha|| subject to sum(alpha) = 1, columns of M are
// the current corral. KKT system [M'M 1; 1' 0].
Vec affine_min_weights(const Mat& m) {
    const int s = int(m.cols());
    Mat kkt(s + 1, s + 1);
    kkt.topLeftCorner(s, s) = m.transpose() * m;
    kkt.topRightCorner(s, 1).setOnes();
    kkt.bottomLeftCorner(1, s).setOnes();
    kkt(s, s) = 0.0;
    Vec rhs = Vec::Zero(s + 1);
    rhs[s] = 1.0;
    Vec sol = kkt.fullPivLu().solve(rhs);
    return sol.head(s);
}

}  // namespace

MinNormResult min_norm_point(const Polytope& p, double tol) {
    const int m = int(p.generators.size());
    if (m < 1) throw SolverError("min_norm_point: empty generator list");
    const int n = int(p.generators.front().size());
    Vec shift = p.translation.size() ? p.translation : Vec::Zero(n);
    if (shift.size() != n) throw DimensionMismatch("min_norm_point: translation dimension");

    Mat pts(n, m);
    for (int i = 0; i < m; ++i) {
        if (p.generators[i].size() != n)
            throw DimensionMismatch("min_norm_point: generator dimension");
        pts.col(i) = shift + p.generators[i];
    }

    double scale = 1.0;
    for (int i = 0; i < m; ++i) scale = std::max(scale, pts.col(i).norm());
    const double opt_tol = tol * scale * scale;

    // start from the generator of smallest norm, lowest index on ties
    int start = 0;
    double best = pts.col(0).squaredNorm();
    for (int i = 1; i < m; ++i) {
        double v = pts.col(i).squaredNorm();
        if (v < best - 1e-15 * scale * scale) {
            best = v;
            start = i;
        }
    }

    std::vector<int> corral{start};
    std::vector<double> lam{1.0};
    Vec x = pts.col(start);

    const int cap = 10 * (m + n) * (m + n);
    for (int iter = 0; iter < cap; ++iter) {
        // most violating vertex of the Wolfe criterion
        int j = -1;
        double bestdot = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            double d = x.dot(pts.col(i));
            if (d < bestdot - 1e-15 * scale * scale) {
                bestdot = d;
                j = i;
            }
        }
        if (bestdot >= x.squaredNorm() - opt_tol) {
            MinNormResult res;
            res.point = x;
            res.norm = x.norm();
            res.weights.assign(m, 0.0);
            for (size_t k = 0; k < corral.size(); ++k) res.weights[corral[k]] = lam[k];
            return res;
        }
        if (std::find(corral.begin(), corral.end(), j) == corral.end()) {
            corral.push_back(j);
            lam.push_back(0.0);
        }

        // minor cycle: pull the affine minimizer back into the simplex
        for (int minor = 0; minor < cap; ++minor) {
            const int s = int(corral.size());
            Mat msub(n, s);
            for (int k = 0; k < s; ++k) msub.col(k) = pts.col(corral[k]);
            Vec alpha = affine_min_weights(msub);

            double amin = alpha.minCoeff();
            if (amin > tol) {
                lam.assign(alpha.data(), alpha.data() + s);
                x = msub * alpha;
                break;
            }
            // step toward alpha until the first weight hits zero
            double theta = 1.0;
            for (int k = 0; k < s; ++k) {
                if (alpha[k] < tol) {
                    double denom = lam[k] - alpha[k];
                    if (denom > 0.0) theta = std::min(theta, lam[k] / denom);
                }
            }
            std::vector<int> next_corral;
            std::vector<double> next_lam;
            for (int k = 0; k < s; ++k) {
                double w = (1.0 - theta) * lam[k] + theta * alpha[k];
                if (w > tol) {
                    next_corral.push_back(corral[k]);
                    next_lam.push_back(w);
                }
            }
            if (next_corral.empty()) {  // numerical corner: keep the best single vertex
                next_corral.push_back(corral[0]);
                next_lam.push_back(1.0);
            }
            corral.swap(next_corral);
            lam.swap(next_lam);
            double wsum = 0.0;
            for (double w : lam) wsum += w;
            for (double& w : lam) w /= wsum;
            x.setZero();
            for (size_t k = 0; k < corral.size(); ++k) x += lam[k] * pts.col(corral[k]);
        }
    }

    double resid = 0.0;
    for (int i = 0; i < m; ++i)
        resid = std::max(resid, x.squaredNorm() - x.dot(pts.col(i)));
    throw IterationCapExceeded("min_norm_point: iteration cap exceeded", x, resid,
                               diag_json("min_norm_point", cap, resid));
}

bool LinearConstraints::satisfied(const Vec& y, double tol) const {
    return max_violation(y) <= tol;
}

double LinearConstraints::max_violation(const Vec& y) const {
    double v = 0.0;
    if (G.rows() > 0) v = std::max(v, (G * y - h).maxCoeff());
    if (E.rows() > 0) v = std::max(v, (E * y - e).cwiseAbs().maxCoeff());
    return v;
}

namespace {

struct ActiveSetState {
    Vec z;
    std::vector<int> working;  // active inequality rows, sorted ascending
};

Mat working_matrix(const QpProblem& prob, const std::vector<int>& working) {
    const int n = prob.cons.dim();
    const int ne = int(prob.cons.E.rows());
    Mat a(ne + int(working.size()), n);
    if (ne > 0) a.topRows(ne) = prob.cons.E;
    for (size_t k = 0; k < working.size(); ++k) a.row(ne + int(k)) = prob.cons.G.row(working[k]);
    return a;
}

// Largest feasible step along p from z; returns {alpha, blocking row or -1}.
std::pair<double, int> ratio_test(const QpProblem& prob, const std::vector<int>& working,
                                  const Vec& z, const Vec& p, double alpha_max) {
    double alpha = alpha_max;
    int blocker = -1;
    const Mat& g = prob.cons.G;
    for (int i = 0; i < g.rows(); ++i) {
        if (std::binary_search(working.begin(), working.end(), i)) continue;
        double dir = g.row(i).dot(p);
        if (dir > 1e-13 * (1.0 + p.norm())) {
            double slack = prob.cons.h[i] - g.row(i).dot(z);
            double a = std::max(slack, 0.0) / dir;
            if (a < alpha) {
                alpha = a;
                blocker = i;
            }
        }
    }
    return {alpha, blocker};
}

}  // namespace

QpResult solve_qp(const QpProblem& prob, std::optional<Vec> feasible_start, double tol) {
    const int n = prob.cons.dim() > 0 ? prob.cons.dim() : int(prob.q.size());
    const int mi = int(prob.cons.G.rows());
    if (prob.P.rows() != n || prob.P.cols() != n || prob.q.size() != n)
        throw DimensionMismatch("solve_qp: objective dimensions");

    const double pscale = 1.0 + prob.P.cwiseAbs().maxCoeff() + prob.q.cwiseAbs().maxCoeff();
    const double feas_tol = 1e-8;

    Vec z;
    if (feasible_start) {
        z = *feasible_start;
        if (!prob.cons.satisfied(z, feas_tol))
            throw QpInfeasible("solve_qp: supplied start infeasible");
    } else if (mi == 0 && prob.cons.E.rows() == 0) {
        z = Vec::Zero(n);
    } else {
        z = find_feasible_point(prob.cons, tol);
    }

    std::vector<int> working;
    for (int i = 0; i < mi; ++i)
        if (prob.cons.G.row(i).dot(z) >= prob.cons.h[i] - 1e-9 * (1.0 + std::abs(prob.cons.h[i])))
            working.push_back(i);

    auto objective = [&](const Vec& y) { return 0.5 * y.dot(prob.P * y) + prob.q.dot(y); };

    const int cap = 10 * (mi + n + int(prob.cons.E.rows()) + 2) * (mi + n + 2);
    int consecutive_drops = 0;
    for (int iter = 0; iter < cap; ++iter) {
        Mat a = working_matrix(prob, working);
        Mat zbasis;
        if (a.rows() == 0) {
            zbasis = Mat::Identity(n, n);
        } else {
            Eigen::FullPivLU<Mat> lu(a);
            lu.setThreshold(1e-10);
            zbasis = lu.kernel();
            if (lu.dimensionOfKernel() == 0) zbasis = Mat(n, 0);
        }
        Vec grad = prob.P * z + prob.q;

        Vec p = Vec::Zero(n);
        bool ray_step = false;
        if (zbasis.cols() > 0) {
            Mat h = zbasis.transpose() * prob.P * zbasis;
            Vec g = zbasis.transpose() * grad;
            Eigen::SelfAdjointEigenSolver<Mat> es(h);
            const Vec& ev = es.eigenvalues();
            const Mat& u = es.eigenvectors();
            const double lam_tol = 1e-10 * (1.0 + ev.cwiseAbs().maxCoeff());

            // zero-curvature descent direction (linear piece of the objective)
            Vec w = Vec::Zero(zbasis.cols());
            for (int k = 0; k < ev.size(); ++k)
                if (ev[k] <= lam_tol) w -= u.col(k) * u.col(k).dot(g);
            if (w.norm() > 1e-9 * pscale) {
                Vec pr = zbasis * w;
                pr.normalize();
                auto [alpha, blocker] = ratio_test(prob, working, z, pr,
                                                   std::numeric_limits<double>::infinity());
                if (blocker < 0)
                    throw QpUnbounded("solve_qp: objective unbounded below", pr,
                                      diag_json("solve_qp", iter, grad.norm()));
                z += alpha * pr;
                working.insert(std::lower_bound(working.begin(), working.end(), blocker),
                               blocker);
                ray_step = true;
            } else {
                Vec v = Vec::Zero(zbasis.cols());
                for (int k = 0; k < ev.size(); ++k)
                    if (ev[k] > lam_tol) v -= u.col(k) * (u.col(k).dot(g) / ev[k]);
                p = zbasis * v;
            }
        }
        if (ray_step) continue;

        if (p.norm() <= 1e-11 * (1.0 + z.norm())) {
            // stationary on the working set: check multipliers
            if (a.rows() == 0) {
                return {z, objective(z), iter};
            }
            Vec mu = a.transpose().colPivHouseholderQr().solve(-grad);
            const int ne = int(prob.cons.E.rows());
            int drop = -1;
            double most_neg = -1e-8 * pscale;
            for (size_t k = 0; k < working.size(); ++k) {
                double mk = mu[ne + int(k)];
                if (mk < most_neg) {
                    most_neg = mk;
                    drop = int(k);
                }
            }
            if (drop < 0) {
                return {z, objective(z), iter};
            }
            working.erase(working.begin() + drop);
            if (++consecutive_drops > mi + n + 2)
                throw IterationCapExceeded("solve_qp: cycling on working set", z, grad.norm(),
                                           diag_json("solve_qp", iter, grad.norm()));
            continue;
        }
        consecutive_drops = 0;

        auto [alpha, blocker] = ratio_test(prob, working, z, p, 1.0);
        z += alpha * p;
        if (blocker >= 0)
            working.insert(std::lower_bound(working.begin(), working.end(), blocker), blocker);
    }
    throw IterationCapExceeded("solve_qp: iteration cap exceeded", z,
                               (prob.P * z + prob.q).norm(),
                               diag_json("solve_qp", cap, (prob.P * z + prob.q).norm()));
}

Vec find_feasible_point(const LinearConstraints& cons, double tol) {
    const int n = cons.dim();
    Vec y0;
    if (cons.E.rows() > 0) {
        y0 = cons.E.completeOrthogonalDecomposition().solve(cons.e);
        if ((cons.E * y0 - cons.e).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + cons.e.cwiseAbs().maxCoeff()))
            throw QpInfeasible("find_feasible_point: inconsistent equality system");
    } else {
        y0 = Vec::Zero(n);
    }
    double viol = cons.G.rows() > 0 ? (cons.G * y0 - cons.h).maxCoeff() : 0.0;
    if (viol <= 1e-10) return y0;

    // phase 1: min s subject to G y - s 1 <= h, s >= -1, E y = e
    QpProblem ph;
    ph.P = Mat::Zero(n + 1, n + 1);
    ph.q = Vec::Zero(n + 1);
    ph.q[n] = 1.0;
    const int mi = int(cons.G.rows());
    ph.cons.G = Mat::Zero(mi + 1, n + 1);
    ph.cons.G.topLeftCorner(mi, n) = cons.G;
    ph.cons.G.col(n).head(mi).setConstant(-1.0);
    ph.cons.G(mi, n) = -1.0;
    ph.cons.h = Vec(mi + 1);
    ph.cons.h.head(mi) = cons.h;
    ph.cons.h[mi] = 1.0;
    if (cons.E.rows() > 0) {
        ph.cons.E = Mat::Zero(cons.E.rows(), n + 1);
        ph.cons.E.leftCols(n) = cons.E;
        ph.cons.e = cons.e;
    }
    Vec start(n + 1);
    start.head(n) = y0;
    start[n] = viol * (1.0 + 1e-9) + 1e-12;
    QpResult r = solve_qp(ph, start, tol);
    if (r.point[n] > 1e-7 * (1.0 + cons.h.cwiseAbs().maxCoeff()))
        throw QpInfeasible("find_feasible_point: system infeasible");
    return r.point.head(n);
}

Vec project_polyhedron(const Vec& x, const LinearConstraints& cons,
                       std::optional<Vec> feasible_start, double tol) {
    const int n = cons.dim();
    if (x.size() != n) throw DimensionMismatch("project_polyhedron: point dimension");
    QpProblem prob;
    prob.P = Mat::Identity(n, n);
    prob.q = -x;
    prob.cons = cons;
    return solve_qp(prob, std::move(feasible_start), tol).point;
}

double kkt_residual(const QpProblem& prob, const Vec& y, double activity_tol) {
    double res = prob.cons.max_violation(y);  // primal feasibility
    Vec grad = prob.P * y + prob.q;

    std::vector<int> active;
    for (int i = 0; i < prob.cons.G.rows(); ++i)
        if (prob.cons.G.row(i).dot(y) >= prob.cons.h[i] - activity_tol * (1.0 + std::abs(prob.cons.h[i])))
            active.push_back(i);

    const int ne = int(prob.cons.E.rows());
    Mat a(ne + int(active.size()), int(y.size()));
    if (ne > 0) a.topRows(ne) = prob.cons.E;
    for (size_t k = 0; k < active.size(); ++k) a.row(ne + int(k)) = prob.cons.G.row(active[k]);

    if (a.rows() == 0) return std::max(res, grad.cwiseAbs().maxCoeff());

    Vec mu = a.transpose().completeOrthogonalDecomposition().solve(-grad);
    res = std::max(res, (a.transpose() * mu + grad).cwiseAbs().maxCoeff());  // stationarity
    for (size_t k = 0; k < active.size(); ++k)
        res = std::max(res, -mu[ne + int(k)]);  // dual feasibility on inequalities
    return res;
}

}  // namespace slopelab::minnorm
