#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "slopelab/minnorm_qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace slopelab;
using namespace slopelab::minnorm;

namespace {

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

// brute force over a fine simplex grid, refined around the best cell
double grid_min_norm(const Polytope& p, int levels = 4, int grid = 40) {
    const int m = int(p.generators.size());
    Vec trans = p.translation.size() ? p.translation : Vec::Zero(p.dim());
    if (m == 1) return (trans + p.generators[0]).norm();
    if (m == 2) {
        double best = 1e300;
        Vec lo = Vec::Zero(1), hi = Vec::Ones(1);
        double a = 0.0, b = 1.0;
        for (int lvl = 0; lvl < levels; ++lvl) {
            double best_t = a;
            for (int i = 0; i <= grid; ++i) {
                double t = a + (b - a) * double(i) / grid;
                double nrm = (trans + t * p.generators[0] + (1 - t) * p.generators[1]).norm();
                if (nrm < best) {
                    best = nrm;
                    best_t = t;
                }
            }
            double w = (b - a) / grid;
            a = std::max(0.0, best_t - w);
            b = std::min(1.0, best_t + w);
        }
        return best;
    }
    // m == 3 exhaustive barycentric grid with refinement
    double best = 1e300;
    double a0 = 0, a1 = 1, b0 = 0, b1 = 1;
    for (int lvl = 0; lvl < levels; ++lvl) {
        double bu = a0, bv = b0;
        for (int i = 0; i <= grid; ++i) {
            for (int j = 0; j <= grid; ++j) {
                double u = a0 + (a1 - a0) * double(i) / grid;
                double v = b0 + (b1 - b0) * double(j) / grid;
                if (u + v > 1.0) continue;
                Vec pt = trans + u * p.generators[0] + v * p.generators[1] +
                         (1 - u - v) * p.generators[2];
                if (pt.norm() < best) {
                    best = pt.norm();
                    bu = u;
                    bv = v;
                }
            }
        }
        double wu = (a1 - a0) / grid, wv = (b1 - b0) / grid;
        a0 = std::max(0.0, bu - wu);
        a1 = std::min(1.0, bu + wu);
        b0 = std::max(0.0, bv - wv);
        b1 = std::min(1.0, bv + wv);
    }
    return best;
}

}  // namespace

TEST_CASE("min_norm_point: symmetric pair straddling the origin") {
    Polytope p;
    p.generators = {v2(1, 0), v2(-1, 0)};
    p.translation = Vec::Zero(2);
    auto res = min_norm_point(p);
    CHECK(res.norm <= 1e-10);
    CHECK(res.point.norm() <= 1e-9);
}

TEST_CASE("min_norm_point: singleton") {
    Polytope p;
    p.generators = {v2(3, 4)};
    p.translation = Vec::Zero(2);
    auto res = min_norm_point(p);
    CHECK(res.norm == doctest::Approx(5.0));
    CHECK((res.point - v2(3, 4)).norm() <= 1e-12);
}

TEST_CASE("min_norm_point: triangle away from origin") {
    // closest point of conv{(2,1),(1,2),(2,2)} to 0 is (1.5,1.5) on the
    // (2,1)-(1,2) edge
    Polytope p;
    p.generators = {v2(2, 1), v2(1, 2), v2(2, 2)};
    p.translation = Vec::Zero(2);
    auto res = min_norm_point(p);
    CHECK(res.norm == doctest::Approx(std::sqrt(4.5)));
    CHECK((res.point - v2(1.5, 1.5)).norm() <= 1e-8);
    CHECK(res.norm == doctest::Approx(grid_min_norm(p)).epsilon(1e-5));
}

TEST_CASE("min_norm_point: Wolfe optimality criterion on every generator") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + int(rng.next_u64() % 3);
        int m = 1 + int(rng.next_u64() % 6);
        Polytope p;
        p.translation = rng.normal_vec(n);
        for (int i = 0; i < m; ++i) p.generators.push_back(rng.normal_vec(n));
        auto res = min_norm_point(p);
        const Vec& v = res.point;
        for (const Vec& g : p.generators) {
            double inner = v.dot(p.translation + g - v);
            CHECK(inner >= -1e-8 * (1.0 + v.squaredNorm()));
        }
        // weights reproduce the point
        Vec rebuilt = p.translation;
        double wsum = 0.0;
        for (size_t i = 0; i < p.generators.size(); ++i) {
            rebuilt += res.weights[i] * p.generators[i];
            wsum += res.weights[i];
            CHECK(res.weights[i] >= -1e-12);
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-9));
        CHECK((rebuilt - v).norm() <= 1e-8);
    }
}

TEST_CASE("min_norm_point: invariance under permutation and duplication") {
    Polytope p;
    p.generators = {v2(2, 1), v2(1, 2), v2(2, 2)};
    p.translation = v2(0.3, -0.2);
    double base = min_norm_point(p).norm;

    Polytope perm;
    perm.generators = {v2(2, 2), v2(2, 1), v2(1, 2)};
    perm.translation = p.translation;
    CHECK(std::abs(min_norm_point(perm).norm - base) <= 1e-10);

    Polytope dup;
    dup.generators = {v2(2, 1), v2(2, 1), v2(1, 2), v2(2, 2), v2(1, 2)};
    dup.translation = p.translation;
    CHECK(std::abs(min_norm_point(dup).norm - base) <= 1e-10);
}

TEST_CASE("min_norm_point: matches simplex-grid oracle on random triangles") {
    Rng rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        Polytope p;
        p.translation = rng.normal_vec(2);
        for (int i = 0; i < 3; ++i) p.generators.push_back(rng.normal_vec(2));
        double wolfe = min_norm_point(p).norm;
        double oracle = grid_min_norm(p);
        CHECK(wolfe <= oracle + 1e-9);           // wolfe is a feasible min
        CHECK(wolfe == doctest::Approx(oracle).epsilon(1e-4));
    }
}

TEST_CASE("solve_qp: single active constraint") {
    // min ||x||^2 s.t. x1 >= 1
    const int n = 3;
    QpProblem prob;
    prob.P = 2.0 * Mat::Identity(n, n);
    prob.q = Vec::Zero(n);
    prob.cons.G = Mat::Zero(1, n);
    prob.cons.G(0, 0) = -1.0;
    prob.cons.h = Vec::Constant(1, -1.0);
    prob.cons.E = Mat(0, n);
    prob.cons.e = Vec(0);
    auto res = solve_qp(prob);
    Vec expect = Vec::Zero(n);
    expect[0] = 1.0;
    CHECK((res.point - expect).norm() <= 1e-8);
    CHECK(kkt_residual(prob, res.point) <= 1e-7);
}

TEST_CASE("solve_qp: unconstrained identity quadratic") {
    const int n = 4;
    QpProblem prob;
    prob.P = Mat::Identity(n, n);
    Rng rng(3);
    prob.q = rng.normal_vec(n);
    prob.cons.G = Mat(0, n);
    prob.cons.h = Vec(0);
    prob.cons.E = Mat(0, n);
    prob.cons.e = Vec(0);
    auto res = solve_qp(prob);
    CHECK((res.point + prob.q).norm() <= 1e-9);
}

TEST_CASE("solve_qp: random problems vs projected-gradient oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3;
        Mat b(n, n);
        for (int i = 0; i < n; ++i) b.row(i) = rng.normal_vec(n).transpose();
        QpProblem prob;
        prob.P = b.transpose() * b + 0.1 * Mat::Identity(n, n);
        prob.q = rng.normal_vec(n);
        // box-ish feasible region around a known interior point
        Vec center = rng.normal_vec(n);
        prob.cons.G = Mat(5, n);
        prob.cons.h = Vec(5);
        for (int i = 0; i < 5; ++i) {
            Vec g = rng.normal_vec(n);
            prob.cons.G.row(i) = g.transpose();
            prob.cons.h[i] = g.dot(center) + rng.uniform(0.2, 1.5);
        }
        prob.cons.E = Mat(0, n);
        prob.cons.e = Vec(0);
        auto res = solve_qp(prob, center);
        CHECK(prob.cons.max_violation(res.point) <= 1e-8);
        CHECK(kkt_residual(prob, res.point) <= 1e-6);

        // projected gradient: alternate gradient steps with a crude projection
        // via project_polyhedron (itself tested by idempotence below)
        Vec y = center;
        double lip = prob.P.norm() + 1.0;
        for (int k = 0; k < 4000; ++k) {
            Vec grad = prob.P * y + prob.q;
            y = project_polyhedron(y - grad / lip, prob.cons, center);
        }
        double obj_pg = 0.5 * y.dot(prob.P * y) + prob.q.dot(y);
        CHECK(res.objective <= obj_pg + 1e-6 * (1.0 + std::abs(obj_pg)));
        CHECK(res.objective == doctest::Approx(obj_pg).epsilon(1e-5));

        // never beaten by random feasible points
        for (int k = 0; k < 100; ++k) {
            Vec z = project_polyhedron(center + rng.normal_vec(n), prob.cons, center);
            double obj_z = 0.5 * z.dot(prob.P * z) + prob.q.dot(z);
            CHECK(res.objective <= obj_z + 1e-8 * (1.0 + std::abs(obj_z)));
        }
    }
}

TEST_CASE("solve_qp: equality constrained") {
    // min ||x||^2 s.t. x1 + x2 = 2 -> (1,1)
    QpProblem prob;
    prob.P = 2.0 * Mat::Identity(2, 2);
    prob.q = Vec::Zero(2);
    prob.cons.G = Mat(0, 2);
    prob.cons.h = Vec(0);
    prob.cons.E = Mat(1, 2);
    prob.cons.E << 1, 1;
    prob.cons.e = Vec::Constant(1, 2.0);
    auto res = solve_qp(prob);
    CHECK((res.point - v2(1, 1)).norm() <= 1e-8);
}

TEST_CASE("solve_qp: infeasible region reported") {
    QpProblem prob;
    prob.P = Mat::Identity(1, 1);
    prob.q = Vec::Zero(1);
    prob.cons.G = Mat(2, 1);
    prob.cons.G << 1, -1;
    prob.cons.h = Vec(2);
    prob.cons.h << -1, -1;  // x <= -1 and x >= 1
    prob.cons.E = Mat(0, 1);
    prob.cons.e = Vec(0);
    CHECK_THROWS_AS(solve_qp(prob), QpInfeasible);
}

TEST_CASE("solve_qp: linear objective with unbounded descent reported") {
    QpProblem prob;
    prob.P = Mat::Zero(2, 2);
    prob.q = v2(0, -1);  // minimize -x2, x2 free above
    prob.cons.G = Mat(1, 2);
    prob.cons.G << 0, -1;  // x2 >= 0
    prob.cons.h = Vec::Constant(1, 0.0);
    prob.cons.E = Mat(0, 2);
    prob.cons.e = Vec(0);
    CHECK_THROWS_AS(solve_qp(prob), QpUnbounded);
}

TEST_CASE("project_polyhedron: interval and idempotence") {
    // interval [-1,1] in 1D
    LinearConstraints cons;
    cons.G = Mat(2, 1);
    cons.G << 1, -1;
    cons.h = Vec(2);
    cons.h << 1, 1;
    cons.E = Mat(0, 1);
    cons.e = Vec(0);
    Vec x = Vec::Constant(1, 3.0);
    Vec p = project_polyhedron(x, cons);
    CHECK(p[0] == doctest::Approx(1.0));
    Vec inside = Vec::Constant(1, 0.25);
    CHECK((project_polyhedron(inside, cons) - inside).norm() <= 1e-10);
    CHECK((project_polyhedron(p, cons) - p).norm() <= 1e-9);
}

TEST_CASE("find_feasible_point: produces a feasible point or throws") {
    LinearConstraints cons;
    cons.G = Mat(3, 2);
    cons.G << 1, 0, 0, 1, -1, -1;
    cons.h = Vec(3);
    cons.h << 2, 2, 1;
    cons.E = Mat(0, 2);
    cons.e = Vec(0);
    Vec y = find_feasible_point(cons);
    CHECK(cons.max_violation(y) <= 1e-8);
}
