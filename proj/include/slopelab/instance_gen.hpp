#ifndef SLOPELAB_INSTANCE_GEN_HPP
#define SLOPELAB_INSTANCE_GEN_HPP

#include "slopelab/convex_core.hpp"

#include <cstdint>
#include <string>

namespace slopelab::gen {

enum class Family { pure_quadratic, max_affine, mixed };
enum class Perturbation { constant, affine, scale, random_mixed };

Family family_from_string(const std::string& s);
Perturbation perturbation_from_string(const std::string& s);
const char* to_string(Family f);
const char* to_string(Perturbation p);

struct InstanceSpec {
    int n = 2;
    Family family = Family::max_affine;
    int pieces = 6;          // max-affine piece count before coercivity pieces
    double box_bound = 2.0;  // coercivity box half-width B
    Perturbation perturbation = Perturbation::affine;
    double eps = 1e-2;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument naming the field
};

struct Instance {
    ConvexFunction f;
    ConvexFunction g;
    Vec x;
    double dist_x = 0.0;  // d(x, C_f)
};

// Deterministic under spec.seed. The generated f has a nonempty bounded
// argmin (coercivity pieces appended for polyhedral families), verified
// post-generation; x is sampled near C_f at positive distance.
Instance generate(const InstanceSpec& spec);

// Construction sanity: argmin solvable, witness stationary, midpoint
// convexity on random pairs. Throws on failure.
void self_check(const ConvexFunction& f, std::uint64_t seed);

}  // namespace slopelab::gen

#endif
