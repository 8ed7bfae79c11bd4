#ifndef SLOPELAB_COMMON_HPP
#define SLOPELAB_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace slopelab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// All numerical slacks used across the library. Defaults are the ones the
// test suite is pinned to; callers may scale them uniformly.
struct Tolerances {
    double tol_argmin = 1e-8;
    double tol_qp = 1e-10;
    double eps_active_rel = 1e-9;  // eps_active = eps_active_rel * (1 + |max affine value|)
};

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::string diagnostics_json = "{}")
        : std::runtime_error(what), diagnostics(std::move(diagnostics_json)) {}
    std::string diagnostics;
};

class QpInfeasible : public SolverError {
public:
    using SolverError::SolverError;
};

class QpUnbounded : public SolverError {
public:
    QpUnbounded(const std::string& what, Vec ray_, std::string diag = "{}")
        : SolverError(what, std::move(diag)), ray(std::move(ray_)) {}
    Vec ray;  // direction of unbounded descent
};

class IterationCapExceeded : public SolverError {
public:
    IterationCapExceeded(const std::string& what, Vec best_, double residual_,
                         std::string diag = "{}")
        : SolverError(what, std::move(diag)), best(std::move(best_)), residual(residual_) {}
    Vec best;
    double residual;
};

// Deterministic 64-bit generator (splitmix64). The standard distributions are
// not pinned across library versions, so doubles are derived from raw bits.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method on deterministic uniforms
    double normal() {
        for (;;) {
            double u = 2.0 * uniform() - 1.0;
            double v = 2.0 * uniform() - 1.0;
            double s = u * u + v * v;
            if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

    Vec normal_vec(int n) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    Vec uniform_vec(int n, double lo, double hi) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = uniform(lo, hi);
        return v;
    }

    std::uint64_t split() { return next_u64(); }

private:
    std::uint64_t state_;
};

// Halton low-discrepancy sequence, one radical-inverse digit expansion per
// coordinate. Deterministic; index 0 maps to the box center-ish corner.
class HaltonSequence {
public:
    explicit HaltonSequence(int dim);
    // point in [0,1)^dim
    Vec next();

private:
    std::vector<int> bases_;
    std::uint64_t index_ = 0;
};

inline double radical_inverse(std::uint64_t i, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * double(i % std::uint64_t(base));
        i /= std::uint64_t(base);
        f *= inv;
    }
    return r;
}

inline HaltonSequence::HaltonSequence(int dim) {
    static const int primes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                                 23, 29, 31, 37, 41, 43, 47, 53};
    if (dim < 1 || dim > 16) throw DimensionMismatch("HaltonSequence: dim must be in [1,16]");
    bases_.assign(primes, primes + dim);
}

inline Vec HaltonSequence::next() {
    ++index_;
    Vec p(int(bases_.size()));
    for (int d = 0; d < p.size(); ++d) p[d] = radical_inverse(index_, bases_[d]);
    return p;
}

}  // namespace slopelab

#endif
