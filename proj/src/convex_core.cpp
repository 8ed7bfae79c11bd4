#include "slopelab/convex_core.hpp"

#include <json.hpp>

#include <cmath>

namespace slopelab {

ConvexFunction::ConvexFunction(Mat quad_matrix, Vec quad_center, std::vector<Vec> affine_slopes,
                               std::vector<double> affine_offsets, double constant)
    : quad_matrix_(std::move(quad_matrix)),
      quad_center_(std::move(quad_center)),
      affine_slopes_(std::move(affine_slopes)),
      affine_offsets_(std::move(affine_offsets)),
      constant_(constant) {
    const int n = int(quad_center_.size());
    if (quad_matrix_.rows() != n || quad_matrix_.cols() != n)
        throw DimensionMismatch("ConvexFunction: quad_matrix must be n x n");
    if (affine_slopes_.size() != affine_offsets_.size())
        throw DimensionMismatch("ConvexFunction: affine slope/offset length mismatch");
    for (const Vec& a : affine_slopes_)
        if (a.size() != n) throw DimensionMismatch("ConvexFunction: affine slope dimension");

    double asym = n > 0 ? (quad_matrix_ - quad_matrix_.transpose()).cwiseAbs().maxCoeff() : 0.0;
    if (asym > 1e-12 * (1.0 + quad_matrix_.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("ConvexFunction: quad_matrix not symmetric");
    quad_nonzero_ = n > 0 && quad_matrix_.cwiseAbs().maxCoeff() > 0.0;
    if (quad_nonzero_) {
        Eigen::SelfAdjointEigenSolver<Mat> es(quad_matrix_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw std::invalid_argument("ConvexFunction: quad_matrix not positive semidefinite");
    }
}

ConvexFunction ConvexFunction::quadratic(Mat a, Vec c, double d) {
    return ConvexFunction(std::move(a), std::move(c), {}, {}, d);
}

ConvexFunction ConvexFunction::max_affine(std::vector<Vec> slopes, std::vector<double> offsets,
                                          double d) {
    if (slopes.empty()) throw std::invalid_argument("max_affine: needs at least one piece");
    const int n = int(slopes.front().size());
    return ConvexFunction(Mat::Zero(n, n), Vec::Zero(n), std::move(slopes), std::move(offsets), d);
}

void ConvexFunction::check_dim(const Vec& x, const char* op) const {
    if (x.size() != dim()) throw DimensionMismatch(std::string(op) + ": point dimension mismatch");
}

double ConvexFunction::quad_value(const Vec& x) const {
    if (!quad_nonzero_) return 0.0;
    Vec d = x - quad_center_;
    return 0.5 * d.dot(quad_matrix_ * d);
}

double ConvexFunction::max_affine_value(const Vec& x) const {
    if (affine_slopes_.empty()) return 0.0;
    double m = affine_slopes_[0].dot(x) + affine_offsets_[0];
    for (size_t i = 1; i < affine_slopes_.size(); ++i)
        m = std::max(m, affine_slopes_[i].dot(x) + affine_offsets_[i]);
    return m;
}

double ConvexFunction::eval(const Vec& x) const {
    check_dim(x, "eval");
    return quad_value(x) + max_affine_value(x) + constant_;
}

SubdifferentialPolytope ConvexFunction::subdifferential(const Vec& x, double eps_active) const {
    check_dim(x, "subdifferential");
    if (eps_active < 0) throw std::invalid_argument("subdifferential: eps_active must be >= 0");
    SubdifferentialPolytope s;
    s.base = quad_nonzero_ ? Vec(quad_matrix_ * (x - quad_center_)) : Vec(Vec::Zero(dim()));
    if (!affine_slopes_.empty()) {
        double mx = max_affine_value(x);
        for (size_t i = 0; i < affine_slopes_.size(); ++i)
            if (affine_slopes_[i].dot(x) + affine_offsets_[i] >= mx - eps_active)
                s.generators.push_back(affine_slopes_[i]);
    }
    return s;
}

SubdifferentialPolytope ConvexFunction::subdifferential(const Vec& x) const {
    double mx = affine_slopes_.empty() ? 0.0 : max_affine_value(x);
    return subdifferential(x, tol_.eps_active_rel * (1.0 + std::abs(mx)));
}

double ConvexFunction::slope(const Vec& x) const { return min_norm_subgradient(x).norm(); }

Vec ConvexFunction::min_norm_subgradient(const Vec& x) const {
    SubdifferentialPolytope s = subdifferential(x);
    if (s.generators.empty()) return s.base;
    minnorm::Polytope p;
    p.generators = s.generators;
    p.translation = s.base;
    return min_norm_point(p).point;
}

const ArgminDescription& ConvexFunction::argmin() const {
    std::lock_guard<std::mutex> lock(argmin_cache_->mutex);
    if (argmin_cache_->value) return *argmin_cache_->value;

    auto desc = std::make_shared<ArgminDescription>();
    const int n = dim();
    if (affine_slopes_.empty()) {
        // pure quadratic: minimized on c + ker(A)
        desc->witness = quad_center_;
        desc->min_value = constant_;
        desc->constraint_system.E = quad_matrix_;
        desc->constraint_system.e = quad_matrix_ * quad_center_;
        desc->constraint_system.G = Mat(0, n);
        desc->constraint_system.h = Vec(0);
    } else {
        // epigraph QP over (y, s): min quad(y) + s  s.t.  a_i'y + b_i <= s
        const int m = int(affine_slopes_.size());
        minnorm::QpProblem prob;
        prob.P = Mat::Zero(n + 1, n + 1);
        prob.P.topLeftCorner(n, n) = quad_matrix_;
        prob.q = Vec::Zero(n + 1);
        prob.q.head(n) = -(quad_matrix_ * quad_center_);
        prob.q[n] = 1.0;
        prob.cons.G = Mat::Zero(m, n + 1);
        prob.cons.h = Vec(m);
        for (int i = 0; i < m; ++i) {
            prob.cons.G.row(i).head(n) = affine_slopes_[i];
            prob.cons.G(i, n) = -1.0;
            prob.cons.h[i] = -affine_offsets_[i];
        }
        prob.cons.E = Mat(0, n + 1);
        prob.cons.e = Vec(0);
        Vec start(n + 1);
        start.head(n) = quad_center_;
        start[n] = max_affine_value(quad_center_) + 1e-12;
        minnorm::QpResult r;
        try {
            r = minnorm::solve_qp(prob, start, tol_.tol_qp);
        } catch (const QpUnbounded& e) {
            throw QpUnbounded("argmin: function unbounded below", e.ray, e.diagnostics);
        }
        Vec ystar = r.point.head(n);
        desc->witness = ystar;
        desc->min_value = eval(ystar);
        double mstar = desc->min_value - constant_ - quad_value(ystar);

        // C_f = {y : A y = A y*,  a_i'y + b_i <= max-affine level at the argmin}
        desc->constraint_system.E = quad_nonzero_ ? quad_matrix_ : Mat(0, n);
        desc->constraint_system.e =
            quad_nonzero_ ? Vec(quad_matrix_ * ystar) : Vec(Vec::Zero(0));
        desc->constraint_system.G = Mat(m, n);
        desc->constraint_system.h = Vec(m);
        for (int i = 0; i < m; ++i) {
            desc->constraint_system.G.row(i) = affine_slopes_[i];
            desc->constraint_system.h[i] = mstar - affine_offsets_[i];
        }
    }
    argmin_cache_->value = desc;
    return *argmin_cache_->value;
}

std::pair<Vec, double> ConvexFunction::project_argmin(const Vec& x) const {
    check_dim(x, "project_argmin");
    const ArgminDescription& am = argmin();
    if (am.constraint_system.G.rows() == 0 && am.constraint_system.E.rows() == 0)
        return {x, 0.0};
    Vec p = minnorm::project_polyhedron(x, am.constraint_system, am.witness, tol_.tol_qp);
    return {p, (x - p).norm()};
}

Vec ConvexFunction::prox(double step, const Vec& x) const {
    check_dim(x, "prox");
    if (!(step > 0.0)) throw std::invalid_argument("prox: step must be positive");
    const int n = dim();
    Mat aq = quad_matrix_ + Mat::Identity(n, n) / step;
    Vec rhs = (quad_nonzero_ ? Vec(quad_matrix_ * quad_center_) : Vec(Vec::Zero(n))) + x / step;
    if (affine_slopes_.empty()) return aq.ldlt().solve(rhs);

    const int m = int(affine_slopes_.size());
    minnorm::QpProblem prob;
    prob.P = Mat::Zero(n + 1, n + 1);
    prob.P.topLeftCorner(n, n) = aq;
    prob.q = Vec::Zero(n + 1);
    prob.q.head(n) = -rhs;
    prob.q[n] = 1.0;
    prob.cons.G = Mat::Zero(m, n + 1);
    prob.cons.h = Vec(m);
    for (int i = 0; i < m; ++i) {
        prob.cons.G.row(i).head(n) = affine_slopes_[i];
        prob.cons.G(i, n) = -1.0;
        prob.cons.h[i] = -affine_offsets_[i];
    }
    prob.cons.E = Mat(0, n + 1);
    prob.cons.e = Vec(0);
    Vec start(n + 1);
    start.head(n) = x;
    start[n] = max_affine_value(x) + 1e-12;
    return minnorm::solve_qp(prob, start, tol_.tol_qp).point.head(n);
}

ConvexFunction add_constant(const ConvexFunction& f, double c) {
    return ConvexFunction(f.quad_matrix(), f.quad_center(), f.affine_slopes(),
                          f.affine_offsets(), f.constant() + c);
}

ConvexFunction scale(const ConvexFunction& f, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("scale: lambda must be positive");
    std::vector<Vec> slopes = f.affine_slopes();
    std::vector<double> offsets = f.affine_offsets();
    for (Vec& a : slopes) a *= lambda;
    for (double& b : offsets) b *= lambda;
    return ConvexFunction(lambda * f.quad_matrix(), f.quad_center(), std::move(slopes),
                          std::move(offsets), lambda * f.constant());
}

ConvexFunction add_affine(const ConvexFunction& f, const Vec& a, double b) {
    if (a.size() != f.dim()) throw DimensionMismatch("add_affine: slope dimension");
    std::vector<Vec> slopes = f.affine_slopes();
    std::vector<double> offsets = f.affine_offsets();
    if (slopes.empty()) {
        slopes.push_back(a);
        offsets.push_back(b);
    } else {
        for (Vec& s : slopes) s += a;
        for (double& o : offsets) o += b;
    }
    return ConvexFunction(f.quad_matrix(), f.quad_center(), std::move(slopes),
                          std::move(offsets), f.constant());
}

ConvexFunction perturb_toward(const ConvexFunction& f, const ConvexFunction& g, double eps) {
    if (f.dim() != g.dim()) throw DimensionMismatch("perturb_toward: dimension mismatch");
    const int n = f.dim();
    const double wf = 1.0 - eps, wg = eps;

    Mat a = wf * f.quad_matrix() + wg * g.quad_matrix();
    Vec lin = wf * (f.quad_matrix() * f.quad_center()) + wg * (g.quad_matrix() * g.quad_center());
    // recover a center with A c = lin (consistent: lin lies in range(A) for PSD parts)
    Vec c = a.completeOrthogonalDecomposition().solve(lin);
    double quad_const = 0.5 * wf * f.quad_center().dot(f.quad_matrix() * f.quad_center()) +
                        0.5 * wg * g.quad_center().dot(g.quad_matrix() * g.quad_center()) -
                        0.5 * c.dot(a * c);

    // convex combination of max-affine parts: pairwise sums of pieces
    std::vector<Vec> slopes;
    std::vector<double> offsets;
    auto pieces = [n](const ConvexFunction& fn) {
        std::vector<std::pair<Vec, double>> p;
        if (fn.affine_slopes().empty()) p.emplace_back(Vec::Zero(n), 0.0);
        for (size_t i = 0; i < fn.affine_slopes().size(); ++i)
            p.emplace_back(fn.affine_slopes()[i], fn.affine_offsets()[i]);
        return p;
    };
    for (const auto& [af, bf] : pieces(f))
        for (const auto& [ag, bg] : pieces(g)) {
            slopes.push_back(wf * af + wg * ag);
            offsets.push_back(wf * bf + wg * bg);
        }
    if (slopes.size() == 1 && slopes[0].isZero(0.0) && offsets[0] == 0.0) {
        slopes.clear();
        offsets.clear();
    }
    return ConvexFunction(std::move(a), std::move(c), std::move(slopes), std::move(offsets),
                          wf * f.constant() + wg * g.constant() + quad_const);
}

std::string to_json(const ConvexFunction& f) {
    nlohmann::json j;
    const int n = f.dim();
    j["n"] = n;
    std::vector<double> qm(size_t(n) * n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) qm[size_t(r) * n + c] = f.quad_matrix()(r, c);
    j["quad_matrix"] = qm;
    j["quad_center"] = std::vector<double>(f.quad_center().data(), f.quad_center().data() + n);
    auto slopes = nlohmann::json::array();
    for (const Vec& a : f.affine_slopes())
        slopes.push_back(std::vector<double>(a.data(), a.data() + n));
    j["affine_slopes"] = slopes;
    j["affine_offsets"] = f.affine_offsets();
    j["constant"] = f.constant();
    return j.dump();
}

ConvexFunction function_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const int n = j.at("n").get<int>();
    auto qm = j.at("quad_matrix").get<std::vector<double>>();
    if (int(qm.size()) != n * n) throw std::invalid_argument("function_from_json: quad_matrix size");
    Mat a(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = qm[size_t(r) * n + c];
    auto cc = j.at("quad_center").get<std::vector<double>>();
    if (int(cc.size()) != n) throw std::invalid_argument("function_from_json: quad_center size");
    Vec center = Eigen::Map<const Vec>(cc.data(), n);
    std::vector<Vec> slopes;
    for (const auto& row : j.at("affine_slopes")) {
        auto v = row.get<std::vector<double>>();
        if (int(v.size()) != n) throw std::invalid_argument("function_from_json: slope size");
        slopes.push_back(Eigen::Map<const Vec>(v.data(), n));
    }
    auto offsets = j.at("affine_offsets").get<std::vector<double>>();
    return ConvexFunction(std::move(a), std::move(center), std::move(slopes), std::move(offsets),
                          j.at("constant").get<double>());
}

}  // namespace slopelab
