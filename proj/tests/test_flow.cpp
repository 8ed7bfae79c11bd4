#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "slopelab/flow.hpp"

#include <cmath>
#include <vector>

using namespace slopelab;
using namespace slopelab::flow;

namespace {

Vec v1(double a) {
    Vec v(1);
    v << a;
    return v;
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

ConvexFunction abs_1d() {
    return ConvexFunction::max_affine({v1(1), v1(-1)}, {0.0, 0.0});
}

ConvexFunction half_sq(int n) {
    return ConvexFunction::quadratic(Mat::Identity(n, n), Vec::Zero(n));
}

ConvexFunction random_coercive(Rng& rng, int n, int pieces, bool with_quad) {
    Mat a = Mat::Zero(n, n);
    Vec c = Vec::Zero(n);
    if (with_quad) {
        Mat b(n, n);
        for (int i = 0; i < n; ++i) b.row(i) = rng.normal_vec(n).transpose();
        a = b.transpose() * b / double(n);
        c = rng.normal_vec(n);
    }
    std::vector<Vec> slopes;
    std::vector<double> offsets;
    for (int i = 0; i < pieces; ++i) {
        slopes.push_back(rng.normal_vec(n));
        offsets.push_back(rng.normal());
    }
    const double bb = 4.0;
    for (int j = 0; j < n; ++j) {
        Vec e = Vec::Zero(n);
        e[j] = bb;
        slopes.push_back(e);
        offsets.push_back(-bb * bb);
        slopes.push_back(-e);
        offsets.push_back(-bb * bb);
    }
    return ConvexFunction(a, c, slopes, offsets, rng.normal());
}

// implicit-Euler residual of a consecutive pair: distance from the divided
// difference to the subdifferential at the landing point
double euler_residual(const ConvexFunction& f, const Vec& prev, const Vec& cur, double h) {
    Vec target = (prev - cur) / h;
    auto sub = f.subdifferential(cur, 1e-7 * (1.0 + std::abs(f.max_affine_value(cur))));
    minnorm::Polytope p;
    p.translation = sub.base - target;
    p.generators =
        sub.generators.empty() ? std::vector<Vec>{Vec::Zero(int(cur.size()))} : sub.generators;
    return minnorm::min_norm_point(p).norm;
}

}  // namespace

TEST_CASE("integrate: quadratic flow tracks the exponential decay") {
    auto f = half_sq(2);
    FlowOptions opts;
    opts.initial_step = 1e-4;
    opts.max_step = 1e-4;
    opts.time_cap = 1.0;
    auto traj = integrate(f, v2(1, 0), opts);
    REQUIRE(traj.termination == Termination::time_cap);
    double t_end = traj.times.back();
    CHECK(t_end >= 1.0);
    CHECK(t_end <= 1.0 + 2e-4);
    CHECK(std::abs(traj.points.back()[0] - std::exp(-t_end)) <= 1e-4);
    CHECK(std::abs(traj.points.back()[1]) <= 1e-12);
}

TEST_CASE("integrate: exact quadratic mode equals e^{-t}") {
    auto f = half_sq(2);
    FlowOptions opts;
    opts.exact_quadratic = true;
    opts.initial_step = 0.05;
    opts.time_cap = 3.0;
    auto traj = integrate(f, v2(1, 0), opts);
    for (int k = 0; k < traj.size(); ++k) {
        CHECK(std::abs(traj.points[k][0] - std::exp(-traj.times[k])) <= 1e-12);
        CHECK(std::abs(traj.slopes[k] - std::exp(-traj.times[k])) <= 1e-10);
    }
}

TEST_CASE("integrate: stationary start") {
    auto f = abs_1d();
    FlowOptions opts;
    auto traj = integrate(f, v1(0), opts);
    CHECK(traj.termination == Termination::reached_argmin);
    CHECK(traj.size() == 1);
    CHECK(traj.total_length() == 0.0);
}

TEST_CASE("integrate: |x| from 2 has total length 2") {
    auto f = abs_1d();
    FlowOptions opts;
    auto traj = integrate(f, v1(2), opts);
    CHECK(traj.termination == Termination::reached_argmin);
    CHECK(std::abs(traj.total_length() - 2.0) <= 1e-6);
    CHECK(std::abs(traj.points.back()[0]) <= 1e-8);
    // unit slope until the end
    for (int k = 0; k + 1 < traj.size(); ++k) CHECK(std::abs(traj.slopes[k] - 1.0) <= 1e-9);
}

TEST_CASE("integrate: rejects non-positive options") {
    FlowOptions opts;
    opts.time_cap = -1.0;
    CHECK_THROWS_AS(integrate(abs_1d(), v1(1), opts), std::invalid_argument);
}

TEST_CASE("check_properties: clean on computed trajectories, flags injected faults") {
    Rng rng(13);
    auto f = random_coercive(rng, 2, 5, true);
    FlowOptions opts;
    auto traj = integrate(f, rng.normal_vec(2) * 2.0, opts);
    auto rep = check_properties(f, traj);
    double scale = 1.0 + std::abs(traj.values.front());
    CHECK(rep.p1_slope_increase <= 1e-6);
    CHECK(rep.p2_value_increase <= 1e-9 * scale);
    CHECK(rep.p2_convexity_violation <= 1e-6 * scale);
    CHECK(rep.p3_dist_increase <= 1e-8);
    CHECK(rep.p3_fixed_point_increase <= 1e-8);

    // corrupt one value upward; P2 must point at it
    REQUIRE(traj.size() > 4);
    auto bad = traj;
    bad.values[3] = bad.values[2] + 0.5;
    auto rep2 = check_properties(f, bad);
    CHECK(rep2.p2_value_increase >= 0.5 - 1e-12);
    CHECK(rep2.p2_index == 3);
}

TEST_CASE("check_properties: stationary trajectory has zero violations") {
    auto f = abs_1d();
    auto traj = integrate(f, v1(0), FlowOptions{});
    auto rep = check_properties(f, traj);
    CHECK(rep.p1_slope_increase == 0.0);
    CHECK(rep.p2_value_increase == 0.0);
    CHECK(rep.p3_dist_increase == 0.0);
}

TEST_CASE("implicit-Euler residual along accepted steps") {
    Rng rng(29);
    for (int trial = 0; trial < 4; ++trial) {
        auto f = random_coercive(rng, 2, 4, trial % 2 == 0);
        auto traj = integrate(f, rng.normal_vec(2) * 2.0, FlowOptions{});
        for (int k = 0; k + 1 < traj.size(); ++k) {
            double h = traj.times[k + 1] - traj.times[k];
            REQUIRE(h > 0);
            CHECK(euler_residual(f, traj.points[k], traj.points[k + 1], h) <= 1e-7);
        }
    }
}

TEST_CASE("discrete energy identity (prox descent)") {
    Rng rng(37);
    for (int trial = 0; trial < 4; ++trial) {
        auto f = random_coercive(rng, 3, 4, trial % 2 == 1);
        auto traj = integrate(f, rng.normal_vec(3) * 2.0, FlowOptions{});
        for (int k = 0; k + 1 < traj.size(); ++k) {
            double h = traj.times[k + 1] - traj.times[k];
            double drop = traj.values[k] - traj.values[k + 1];
            double move2 = (traj.points[k + 1] - traj.points[k]).squaredNorm();
            double scale = 1.0 + std::abs(traj.values[k]);
            CHECK(drop >= move2 / h - 1e-9 * scale);
        }
    }
}

TEST_CASE("halving the step moves the endpoint by O(h)") {
    Rng rng(43);
    auto f = random_coercive(rng, 2, 5, true);
    Vec x0 = rng.normal_vec(2) * 2.0;
    std::vector<double> errs;
    FlowOptions fine;
    fine.initial_step = 1e-3 / 8.0;
    fine.max_step = fine.initial_step;
    fine.time_cap = 2.0;
    Vec ref = integrate(f, x0, fine).points.back();
    for (double h : {1e-3, 5e-4, 2.5e-4}) {
        FlowOptions opts;
        opts.initial_step = h;
        opts.max_step = h;
        opts.time_cap = 2.0;
        errs.push_back((integrate(f, x0, opts).points.back() - ref).norm());
    }
    // first-order: constant err/h across three halvings, loosely
    for (size_t i = 0; i < errs.size(); ++i) {
        double h = 1e-3 / std::pow(2.0, double(i));
        CHECK(errs[i] <= 50.0 * h);
    }
    CHECK(errs[2] <= errs[0] + 1e-12);
}

TEST_CASE("truncate_at_slope on a handmade trajectory") {
    FlowTrajectory traj;
    double slopes[] = {3, 2, 1, 0.5};
    for (int k = 0; k < 4; ++k) {
        traj.times.push_back(k);
        traj.points.push_back(v1(4 - k));
        traj.values.push_back(4 - k);
        traj.slopes.push_back(slopes[k]);
        traj.dist_to_argmin.push_back(4 - k);
        traj.cum_length.push_back(k);
    }
    CHECK(truncate_at_slope(traj, 0.7) == 2);
    CHECK(truncate_at_slope(traj, 10.0) == 0);
    CHECK_THROWS_AS(truncate_at_slope(traj, -1.0), std::invalid_argument);
    CHECK(arc_length(traj, 2) == doctest::Approx(2.0));
    CHECK(arc_length(traj, 0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(arc_length(traj, 9), std::out_of_range);
}

TEST_CASE("truncate_at_slope: |x| trajectory stops where the slope drops") {
    auto f = abs_1d();
    auto traj = integrate(f, v1(2), FlowOptions{});
    int idx = truncate_at_slope(traj, 0.5);
    // everything before the final kink landing has slope 1
    CHECK(traj.slopes[idx] > 0.5);
    if (idx + 1 < traj.size()) CHECK(traj.slopes[idx + 1] <= 0.5);
    // truncation is grid-resolution accurate; half-step records land every
    // max_step/2 = 0.125 at the widest
    CHECK(std::abs(arc_length(traj, idx) - 2.0) <= 0.13);
}

TEST_CASE("refine_to_slope walks the quadratic flow to the crossing") {
    auto f = half_sq(1);
    double delta = std::exp(-1.0);
    auto crossing = refine_to_slope(f, v1(1), delta, 1e-2);
    // slope equals position for this f; crossing sits at x = delta
    CHECK(crossing.slope >= delta);
    CHECK(crossing.slope <= delta * (1.0 + 1e-4));
    CHECK(std::abs(crossing.point[0] - delta) <= 1e-4);
    CHECK(std::abs(crossing.extra_length - (1.0 - delta)) <= 1e-4);
}

TEST_CASE("to_json_lines emits one record per step") {
    auto traj = integrate(abs_1d(), v1(1), FlowOptions{});
    std::string dump = to_json_lines(traj);
    int lines = 0;
    for (char ch : dump)
        if (ch == '\n') ++lines;
    CHECK(lines == traj.size());
    CHECK(dump.find("\"slope\"") != std::string::npos);
}
