#include "slopelab/instance_gen.hpp"

#include <cmath>
#include <stdexcept>

namespace slopelab::gen {

Family family_from_string(const std::string& s) {
    if (s == "pure-quadratic") return Family::pure_quadratic;
    if (s == "max-affine") return Family::max_affine;
    if (s == "mixed") return Family::mixed;
    throw std::invalid_argument("family: expected pure-quadratic | max-affine | mixed, got '" +
                                s + "'");
}

Perturbation perturbation_from_string(const std::string& s) {
    if (s == "constant") return Perturbation::constant;
    if (s == "affine") return Perturbation::affine;
    if (s == "scale") return Perturbation::scale;
    if (s == "random-mixed") return Perturbation::random_mixed;
    throw std::invalid_argument(
        "perturbation: expected constant | affine | scale | random-mixed, got '" + s + "'");
}

const char* to_string(Family f) {
    switch (f) {
        case Family::pure_quadratic: return "pure-quadratic";
        case Family::max_affine: return "max-affine";
        case Family::mixed: return "mixed";
    }
    return "?";
}

const char* to_string(Perturbation p) {
    switch (p) {
        case Perturbation::constant: return "constant";
        case Perturbation::affine: return "affine";
        case Perturbation::scale: return "scale";
        case Perturbation::random_mixed: return "random-mixed";
    }
    return "?";
}

void InstanceSpec::validate() const {
    if (n < 1 || n > 16) throw std::invalid_argument("n: must be in [1,16]");
    if (pieces < 1 || pieces > 64) throw std::invalid_argument("pieces: must be in [1,64]");
    if (!(box_bound > 0)) throw std::invalid_argument("box_bound: must be positive");
    if (eps < 0) throw std::invalid_argument("eps: must be >= 0");
}

namespace {

Mat random_psd(Rng& rng, int n, int rank, double lam_lo, double lam_hi) {
    Mat gauss(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) gauss(r, c) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(gauss);
    Mat q = qr.householderQ();
    Vec lam = Vec::Zero(n);
    for (int i = 0; i < rank; ++i) lam[i] = rng.uniform(lam_lo, lam_hi);
    Mat a = q * lam.asDiagonal() * q.transpose();
    return 0.5 * (a + a.transpose());  // clean up symmetry to the last bit
}

void append_coercivity_box(std::vector<Vec>& slopes, std::vector<double>& offsets, int n,
                           double b) {
    for (int j = 0; j < n; ++j) {
        for (int sgn : {+1, -1}) {
            Vec a = Vec::Zero(n);
            a[j] = sgn * b;
            slopes.push_back(a);
            offsets.push_back(-b * b);
        }
    }
}

ConvexFunction make_base(const InstanceSpec& spec, Rng& rng) {
    const int n = spec.n;
    const double b = spec.box_bound;
    switch (spec.family) {
        case Family::pure_quadratic: {
            Mat a = random_psd(rng, n, n, 0.5, 2.5);
            Vec c = rng.uniform_vec(n, -0.5 * b, 0.5 * b);
            return ConvexFunction::quadratic(a, c, rng.uniform(-1.0, 1.0));
        }
        case Family::max_affine: {
            std::vector<Vec> slopes;
            std::vector<double> offsets;
            for (int i = 0; i < spec.pieces; ++i) {
                // interior slopes dominated by the coercivity pieces
                slopes.push_back(rng.uniform_vec(n, -0.4 * b, 0.4 * b));
                offsets.push_back(rng.uniform(-1.0, 1.0));
            }
            append_coercivity_box(slopes, offsets, n, b);
            return ConvexFunction::max_affine(std::move(slopes), std::move(offsets),
                                              rng.uniform(-1.0, 1.0));
        }
        case Family::mixed: {
            int rank = std::max(1, n / 2);
            Mat a = random_psd(rng, n, rank, 0.3, 1.5);
            Vec c = rng.uniform_vec(n, -0.5 * b, 0.5 * b);
            std::vector<Vec> slopes;
            std::vector<double> offsets;
            for (int i = 0; i < spec.pieces; ++i) {
                slopes.push_back(rng.uniform_vec(n, -0.4 * b, 0.4 * b));
                offsets.push_back(rng.uniform(-1.0, 1.0));
            }
            append_coercivity_box(slopes, offsets, n, b);
            return ConvexFunction(std::move(a), std::move(c), std::move(slopes),
                                  std::move(offsets), rng.uniform(-1.0, 1.0));
        }
    }
    throw std::logic_error("make_base: unreachable");
}

ConvexFunction perturb(const ConvexFunction& f, const InstanceSpec& spec, Rng& rng) {
    switch (spec.perturbation) {
        case Perturbation::constant:
            return add_constant(f, spec.eps);
        case Perturbation::affine: {
            Vec dir = rng.normal_vec(f.dim());
            double nrm = dir.norm();
            if (nrm > 0) dir /= nrm;
            return add_affine(f, spec.eps * dir, spec.eps * rng.uniform(-1.0, 1.0));
        }
        case Perturbation::scale:
            return scale(f, 1.0 + spec.eps);
        case Perturbation::random_mixed: {
            ConvexFunction g = scale(f, 1.0 + spec.eps * rng.uniform());
            Vec dir = rng.normal_vec(f.dim());
            double nrm = dir.norm();
            if (nrm > 0) dir /= nrm;
            g = add_affine(g, spec.eps * rng.uniform() * dir, 0.0);
            return add_constant(g, spec.eps * rng.uniform(-1.0, 1.0));
        }
    }
    throw std::logic_error("perturb: unreachable");
}

}  // namespace

Instance generate(const InstanceSpec& spec) {
    spec.validate();
    Rng rng(spec.seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull);

    ConvexFunction f = make_base(spec, rng);
    self_check(f, rng.split());
    ConvexFunction g = perturb(f, spec, rng);
    g.argmin();  // perturbation must keep the minimum attained

    // x near C_f at positive distance
    const Vec& w = f.argmin().witness;
    const int cap = 64;
    for (int attempt = 0; attempt < cap; ++attempt) {
        Vec dir = rng.normal_vec(spec.n);
        double nrm = dir.norm();
        if (nrm == 0) continue;
        double rho = spec.box_bound * rng.uniform(0.2, 0.6);
        Vec x = w + (rho / nrm) * dir;
        double dist = f.project_argmin(x).second;
        if (dist > 1e-4 * spec.box_bound) return Instance{f, g, x, dist};
    }
    throw SolverError("generate: rejection cap hit while sampling x near the argmin");
}

void self_check(const ConvexFunction& f, std::uint64_t seed) {
    const ArgminDescription& am = f.argmin();
    if (!am.constraint_system.satisfied(am.witness, 1e-8))
        throw SolverError("self_check: argmin witness violates its constraint system");
    if (std::abs(f.eval(am.witness) - am.min_value) > 1e-8 * (1.0 + std::abs(am.min_value)))
        throw SolverError("self_check: witness value disagrees with min_value");
    if (f.slope(am.witness) > 1e-6)
        throw SolverError("self_check: positive slope at the argmin witness");

    Rng rng(seed);
    for (int k = 0; k < 32; ++k) {
        Vec x = rng.uniform_vec(f.dim(), -3.0, 3.0);
        Vec y = rng.uniform_vec(f.dim(), -3.0, 3.0);
        double scale = 1.0 + std::abs(f.eval(x)) + std::abs(f.eval(y));
        if (f.eval(0.5 * (x + y)) > 0.5 * (f.eval(x) + f.eval(y)) + 1e-9 * scale)
            throw SolverError("self_check: midpoint convexity violated");
    }
}

}  // namespace slopelab::gen
