#ifndef SLOPELAB_CONVEX_CORE_HPP
#define SLOPELAB_CONVEX_CORE_HPP

#include "slopelab/common.hpp"
#include "slopelab/minnorm_qp.hpp"

#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace slopelab {

// Minimizer set C_f = {y : E y = e, G y <= h} with the minimal value and one
// feasible witness. The constraint system is linear, so C_f is convex.
struct ArgminDescription {
    double min_value = 0.0;
    minnorm::LinearConstraints constraint_system;
    Vec witness;
};

// The set base + conv(generators); {base} when generators is empty.
struct SubdifferentialPolytope {
    Vec base;
    std::vector<Vec> generators;
};

// f(x) = 1/2 (x-c)' A (x-c) + max_i (a_i' x + b_i) + d, the max term absent
// when the affine list is empty. A symmetric PSD. Immutable after
// construction; all operations are pure.
class ConvexFunction {
public:
    ConvexFunction(Mat quad_matrix, Vec quad_center, std::vector<Vec> affine_slopes,
                   std::vector<double> affine_offsets, double constant);

    static ConvexFunction quadratic(Mat a, Vec c, double d = 0.0);
    static ConvexFunction max_affine(std::vector<Vec> slopes, std::vector<double> offsets,
                                     double d = 0.0);

    int dim() const { return int(quad_center_.size()); }
    const Mat& quad_matrix() const { return quad_matrix_; }
    const Vec& quad_center() const { return quad_center_; }
    const std::vector<Vec>& affine_slopes() const { return affine_slopes_; }
    const std::vector<double>& affine_offsets() const { return affine_offsets_; }
    double constant() const { return constant_; }
    bool has_quadratic() const { return quad_nonzero_; }

    double eval(const Vec& x) const;
    double quad_value(const Vec& x) const;
    // max_i(a_i x + b_i); 0 when the list is empty
    double max_affine_value(const Vec& x) const;

    SubdifferentialPolytope subdifferential(const Vec& x, double eps_active) const;
    SubdifferentialPolytope subdifferential(const Vec& x) const;  // default eps rule

    // s_f(x) = dist(0, subdifferential(x))
    double slope(const Vec& x) const;
    Vec min_norm_subgradient(const Vec& x) const;

    const ArgminDescription& argmin() const;  // cached; throws QpUnbounded when inf not attained
    double min_value() const { return argmin().min_value; }

    // (projection of x onto C_f, d(x, C_f))
    std::pair<Vec, double> project_argmin(const Vec& x) const;

    // argmin_y f(y) + ||y - x||^2 / (2 step)
    Vec prox(double step, const Vec& x) const;

    const Tolerances& tol() const { return tol_; }

private:
    void check_dim(const Vec& x, const char* op) const;

    Mat quad_matrix_;
    Vec quad_center_;
    std::vector<Vec> affine_slopes_;
    std::vector<double> affine_offsets_;
    double constant_;
    bool quad_nonzero_;
    Tolerances tol_;

    // copies share the cache; the represented function is identical
    struct ArgminCache {
        std::mutex mutex;
        std::shared_ptr<const ArgminDescription> value;
    };
    std::shared_ptr<ArgminCache> argmin_cache_ = std::make_shared<ArgminCache>();
};

// Combinators; every result stays in the representable class with exact
// coefficient arithmetic.
ConvexFunction add_constant(const ConvexFunction& f, double c);
ConvexFunction scale(const ConvexFunction& f, double lambda);
ConvexFunction add_affine(const ConvexFunction& f, const Vec& a, double b);
// Blend toward g: f + eps * (g - f) applied to the representation; requires
// matching dimension and identical quad centers, or one of the quadratic
// parts zero.
ConvexFunction perturb_toward(const ConvexFunction& f, const ConvexFunction& g, double eps);

// JSON round trip; finite doubles survive bit-exactly.
std::string to_json(const ConvexFunction& f);
ConvexFunction function_from_json(const std::string& text);

}  // namespace slopelab

#endif
