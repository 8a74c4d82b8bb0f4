#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "ampere2d/errors.hpp"
#include "ampere2d/interp.hpp"
#include "ampere2d/polar_grid.hpp"
#include "ampere2d/quadrature.hpp"
#include "ampere2d/source_field.hpp"

namespace ampere2d {

/// Radial source handle: the deviation ftilde - 1 is the primary quantity so
/// the mass quadrature keeps full relative precision where ftilde is close
/// to 1. Constructible from a plain value function (deviation by
/// subtraction) or from a (value, deviation) pair.
class RadialSourceFn {
  public:
    template <class F, class = std::enable_if_t<!std::is_same_v<std::decay_t<F>, RadialSourceFn>>>
    RadialSourceFn(F&& value) : value_(std::forward<F>(value)) {}

    RadialSourceFn(std::function<double(double)> value, std::function<double(double)> deviation)
        : value_(std::move(value)), dev_(std::move(deviation)) {}

    double operator()(double r) const { return value_(r); }
    double dev(double r) const { return dev_ ? dev_(r) : value_(r) - 1.0; }

  private:
    std::function<double(double)> value_;
    std::function<double(double)> dev_;
};

namespace detail {

/// Cumulative machinery around the radial source: caches
/// excess(r) = int_0^r 2t (ftilde(t) - 1) dt at the given nodes and evaluates
/// it (and U') anywhere without cancellation. excess(inf) = 2d.
class RadialAccumulator {
  public:
    RadialAccumulator(RadialSourceFn ft, std::vector<double> nodes)
        : ft_(std::move(ft)), nodes_(std::move(nodes)) {
        if (nodes_.empty() || nodes_.front() != 0.0)
            throw SolverError("radial nodes must start at 0");
        excess_ = cumulative_integral(
            [this](double t) {
                double v = ft_.dev(t);
                if (!(v > -1.0))
                    throw DegenerateSourceError("spherical average is nonpositive at r=" +
                                                std::to_string(t));
                return 2.0 * t * v;
            },
            nodes_, 1e-14);
    }

    double excess_at(double s) const {
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s);
        int k = static_cast<int>(it - nodes_.begin()) - 1;
        k = std::clamp(k, 0, static_cast<int>(nodes_.size()) - 1);
        double a = (s <= nodes_.back()) ? nodes_[k] : nodes_.back();
        double base = (s <= nodes_.back()) ? excess_[k] : excess_.back();
        if (s == a) return base;
        // sub-node distances are short; one fixed panel is already at the
        // accuracy floor and keeps nested evaluation O(1)
        double v, err;
        detail::gk15([this](double t) { return 2.0 * t * ft_.dev(t); }, a, s, v, err);
        return base + v;
    }

    double uprime(double s) const {
        double inner = s * s + excess_at(s);
        if (s > 0.0 && inner <= 0.0)
            throw DegenerateSourceError("U' lost positivity at r=" + std::to_string(s));
        return std::sqrt(std::max(0.0, inner));
    }

    /// U'(s) - s, computed from the excess to avoid cancellation.
    double uprime_minus_s(double s) const {
        double e = excess_at(s);
        return e / (uprime(s) + s + (s == 0.0 ? 1e-300 : 0.0));
    }

    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& excess() const { return excess_; }
    double ft(double s) const { return ft_(s); }

  private:
    RadialSourceFn ft_;
    std::vector<double> nodes_;
    std::vector<double> excess_;
};

/// Node set dense enough that segment-local quadrature stays cheap when the
/// accumulator is evaluated at arbitrary interior points.
inline std::vector<double> dense_nodes(double r_max) {
    std::vector<double> n{0.0};
    for (double r = 0.01; r < r_max; r *= 1.05) n.push_back(r);
    n.push_back(r_max);
    return n;
}

}  // namespace detail

struct IntegralWithTail {
    double value = 0;
    double tail_error = 0;
    bool domain_warning = false;
};

namespace detail {

/// Clips a node list to [0, r_max], or builds the default dense set.
inline std::vector<double> quad_nodes(const std::vector<double>& preferred, double r_max) {
    std::vector<double> nodes;
    if (preferred.empty()) return dense_nodes(r_max);
    nodes.push_back(0.0);
    for (double t : preferred)
        if (t > nodes.back() && t < r_max) nodes.push_back(t);
    nodes.push_back(r_max);
    return nodes;
}

}  // namespace detail

/// d = int_0^inf r (ftilde - 1) dr, truncated at r_max with the analytic tail
/// bound c0 r_max^{2-beta} / (beta - 2) reported as the error bar. Supplying
/// the knots of a tabulated ftilde keeps every panel smooth.
inline IntegralWithTail compute_d(const RadialSourceFn& ftilde, double r_max, double c0,
                                  double beta, const std::vector<double>& knots = {}) {
    if (!(beta > 2.0)) throw InvalidSourceError("compute_d requires beta > 2");
    IntegralWithTail out;
    std::vector<double> nodes = detail::quad_nodes(knots, r_max);
    for (std::size_t k = 1; k < nodes.size(); ++k)
        out.value += integrate([&](double t) { return t * ftilde.dev(t); }, nodes[k - 1],
                               nodes[k], 1e-14);
    out.tail_error = c0 * std::pow(r_max, 2.0 - beta) / (beta - 2.0);
    return out;
}

/// c_d as the additive constant of the expansion U = r^2/2 + d log r + c_d +
/// o(1): quadrature of [U'(s) - s - d/sqrt(s^2+d)] with the exact boundary
/// terms d log 2 - (d/2) log|d|. For d < 0 the square-root subtraction only
/// exists for s^2 > |d|; the complement uses the plain integrand and the run
/// is flagged.
inline IntegralWithTail compute_cd(const RadialSourceFn& ftilde, double d, double r_max,
                                   double c0 = 1.0, double beta = 4.0,
                                   const std::vector<double>& knots = {}) {
    std::vector<double> nodes = detail::quad_nodes(knots, r_max);
    detail::RadialAccumulator acc(ftilde, nodes);
    IntegralWithTail out;
    const double s0 = d < 0.0 ? std::sqrt(-d) : 0.0;
    if (s0 > 0.0) {
        out.domain_warning = true;
        auto pos = std::lower_bound(nodes.begin(), nodes.end(), s0);
        if (pos == nodes.end() || *pos != s0) nodes.insert(pos, s0);
    }
    double v = 0.0;
    for (std::size_t k = 1; k < nodes.size(); ++k) {
        double a = nodes[k - 1], b = nodes[k];
        if (b <= s0) {
            v += integrate([&](double s) { return acc.uprime_minus_s(s); }, a, b, 1e-13);
        } else {
            v += integrate(
                [&](double s) { return acc.uprime_minus_s(s) - d / std::sqrt(s * s + d); }, a, b,
                1e-13);
        }
    }
    if (d != 0.0) v += d * std::log(2.0) - 0.5 * d * std::log(std::abs(d));
    out.value = v;
    double end = std::abs(acc.uprime_minus_s(r_max) - d / std::sqrt(r_max * r_max + d));
    out.tail_error = 0.5 * r_max * end + c0 * std::pow(r_max, 2.0 - beta) / sq(beta - 2.0) +
                     d * d / (2.0 * r_max * r_max);
    return out;
}

/// Radial base solution of det(D^2 U) = ftilde and its expansion constants.
/// U(0) = 0 always; prescribed additive constants are applied downstream.
struct RadialProfile {
    std::vector<double> r;
    std::vector<double> ftilde;
    std::vector<double> U, Uprime, Usecond, F1, F2;
    std::vector<double> excess;        // U'^2 - r^2, monotone data for evaluators
    std::vector<double> U_minus_quad;  // U - r^2/2, cancellation-free far field
    double d = 0, d_tail_error = 0;
    double c_d = 0, cd_tail_error = 0;
    bool cd_domain_warning = false;

    double uprime_over_r(int i) const {
        if (r[i] == 0.0) return Usecond[0];
        return std::sqrt(std::max(0.0, 1.0 + excess[i] / (r[i] * r[i])));
    }
};

struct RadialBuildOptions {
    double d_integration_radius = 0;  // 0: 64 x grid radius
    bool compute_expansion_constants = true;
    std::vector<double> quadrature_knots;  // knot set of a tabulated ftilde
};

/// Profile-only build, skipping the improper integrals for d and c_d.
inline RadialBuildOptions no_expansion_constants() {
    RadialBuildOptions opt;
    opt.compute_expansion_constants = false;
    return opt;
}

inline RadialProfile build_radial_solution(const RadialSourceFn& ftilde,
                                           const std::vector<double>& radii,
                                           const RadialBuildOptions& opt = {}) {
    RadialProfile p;
    p.r = radii;
    detail::RadialAccumulator acc(ftilde, radii);
    const int n = static_cast<int>(radii.size());
    p.ftilde.resize(n);
    for (int i = 0; i < n; ++i) {
        p.ftilde[i] = ftilde(radii[i]);
        if (!(p.ftilde[i] > 0.0))
            throw DegenerateSourceError("ftilde nonpositive at node " + std::to_string(i));
    }
    p.excess = acc.excess();
    p.U_minus_quad = cumulative_integral(
        [&](double s) { return acc.uprime_minus_s(s); }, radii, 1e-14);
    p.U.resize(n);
    p.Uprime.resize(n);
    p.Usecond.resize(n);
    p.F1.resize(n);
    p.F2.resize(n);
    for (int i = 0; i < n; ++i) {
        double r = radii[i];
        p.U[i] = 0.5 * r * r + p.U_minus_quad[i];
        double inner = r * r + p.excess[i];
        if (i > 0 && inner <= 0.0)
            throw DegenerateSourceError("U' lost positivity at node " + std::to_string(i));
        p.Uprime[i] = std::sqrt(std::max(0.0, inner));
        p.Usecond[i] = (r == 0.0) ? std::sqrt(p.ftilde[0]) : r * p.ftilde[i] / p.Uprime[i];
        double up_over_r = p.uprime_over_r(i);
        p.F1[i] = 0.5 * (p.Usecond[i] + up_over_r);
        p.F2[i] = 0.5 * (p.Usecond[i] - up_over_r);
    }
    if (opt.compute_expansion_constants) {
        // the additive constant inherits a delta_d log R error from any mass
        // deficit in d, so both integrals run far past the grid
        double R = opt.d_integration_radius > 0 ? opt.d_integration_radius : 64.0 * radii.back();
        auto dd = compute_d(ftilde, R, 1.0, 4.0, opt.quadrature_knots);
        p.d = dd.value;
        p.d_tail_error = dd.tail_error;
        auto cd = compute_cd(ftilde, p.d, R, 1.0, 4.0, opt.quadrature_knots);
        p.c_d = cd.value;
        p.cd_tail_error = cd.tail_error;
        p.cd_domain_warning = cd.domain_warning;
    }
    return p;
}

/// Separable form of the linearized operator for radial-derived coefficients:
/// L psi = p psi'' + q (psi'/r - m^2 psi / r^2) with p = U'/r, q = U''.
struct SeparableCoefficients {
    std::vector<double> p, q;
};

/// Linearized coefficients a* = adj(D^2 U) on a polar grid, with ellipticity
/// certificates. When derived from a radial profile the separable form is
/// attached and per-mode solves are exact.
struct CoefficientField {
    PolarField a11, a12, a22;
    std::optional<SeparableCoefficients> separable;
    PolarField b1, b2;  // first-order (drift) terms, Kelvin image problems
    bool has_drift = false;
    double lambda_min = 0, lambda_max = 0;

    SymMat2 matrix(int i, int j) const { return {a11.at(i, j), a12.at(i, j), a22.at(i, j)}; }
};

inline CoefficientField build_coefficients(const RadialProfile& p,
                                           std::shared_ptr<const PolarGrid> grid) {
    const auto& g = *grid;
    if (g.n_r() != static_cast<int>(p.r.size()))
        throw SolverError("profile and grid radii differ");
    CoefficientField cf{PolarField(grid), PolarField(grid), PolarField(grid)};
    double lmin = 1e300, lmax = -1e300;
    for (int i = 0; i < g.n_r(); ++i) {
        double F1 = p.F1[i], F2 = p.F2[i];
        lmin = std::min(lmin, F1 - std::abs(F2));
        lmax = std::max(lmax, F1 + std::abs(F2));
        for (int j = 0; j < g.n_theta; ++j) {
            double c2 = std::cos(2.0 * g.theta[j]), s2 = std::sin(2.0 * g.theta[j]);
            cf.a11.at(i, j) = F1 - F2 * c2;
            cf.a22.at(i, j) = F1 + F2 * c2;
            cf.a12.at(i, j) = -F2 * s2;
        }
    }
    cf.lambda_min = lmin;
    cf.lambda_max = lmax;
    if (!(lmin > 0.0))
        throw CoefficientDegeneracyError("coefficient field lost ellipticity, lambda_min=" +
                                         std::to_string(lmin));
    SeparableCoefficients sep;
    sep.p.resize(g.n_r());
    sep.q.resize(g.n_r());
    for (int i = 0; i < g.n_r(); ++i) {
        sep.p[i] = p.uprime_over_r(i);
        sep.q[i] = p.Usecond[i];
    }
    cf.separable = std::move(sep);
    return cf;
}

/// Off-grid evaluator for radial-derived coefficients, used by the Kelvin
/// transform (which needs a at y/|y|^2 up to infinity). Inside the tabulated
/// range the excess is splined; beyond it the captured mass is frozen, which
/// is consistent with the (af) decay.
class RadialCoefficientEvaluator {
  public:
    RadialCoefficientEvaluator(const RadialProfile& p, std::function<double(double)> ftilde)
        : ft_(std::move(ftilde)), excess_spline_(p.r, p.excess), r_max_(p.r.back()),
          excess_back_(p.excess.back()) {}

    void f1f2(double r, double& F1, double& F2) const {
        double e = r <= r_max_ ? excess_spline_(r) : excess_back_;
        double up_over_r = std::sqrt(std::max(1e-300, 1.0 + e / (r * r)));
        double up = r * up_over_r;
        double upp = r * ft_(r) / up;
        F1 = 0.5 * (upp + up_over_r);
        F2 = 0.5 * (upp - up_over_r);
    }

    SymMat2 operator()(Vec2 x) const {
        double r = x.norm();
        if (r < 1e-14) {
            double F1, F2;
            f1f2(1e-14, F1, F2);
            return {F1, 0.0, F1};
        }
        double F1, F2;
        f1f2(r, F1, F2);
        double c = x.x / r, s = x.y / r;
        double c2 = c * c - s * s, s2 = 2.0 * s * c;
        return {F1 - F2 * c2, -F2 * s2, F1 + F2 * c2};
    }

  private:
    std::function<double(double)> ft_;
    CubicSpline excess_spline_;
    double r_max_, excess_back_;
};

/// Radial-derived coefficients sampled on an arbitrary grid (annuli of the
/// exterior problem); the separable form is attached with p = U'/r = F1 - F2
/// and q = U'' = F1 + F2.
inline CoefficientField build_coefficients_from_evaluator(const RadialCoefficientEvaluator& ev,
                                                          std::shared_ptr<const PolarGrid> grid) {
    const auto& g = *grid;
    CoefficientField cf{PolarField(grid), PolarField(grid), PolarField(grid)};
    SeparableCoefficients sep;
    sep.p.resize(g.n_r());
    sep.q.resize(g.n_r());
    double lmin = 1e300, lmax = -1e300;
    for (int i = 0; i < g.n_r(); ++i) {
        double F1, F2;
        ev.f1f2(std::max(g.r[i], 1e-14), F1, F2);
        sep.p[i] = F1 - F2;
        sep.q[i] = F1 + F2;
        lmin = std::min(lmin, F1 - std::abs(F2));
        lmax = std::max(lmax, F1 + std::abs(F2));
        for (int j = 0; j < g.n_theta; ++j) {
            double c2 = std::cos(2.0 * g.theta[j]), s2 = std::sin(2.0 * g.theta[j]);
            cf.a11.at(i, j) = F1 - F2 * c2;
            cf.a22.at(i, j) = F1 + F2 * c2;
            cf.a12.at(i, j) = -F2 * s2;
        }
    }
    cf.lambda_min = lmin;
    cf.lambda_max = lmax;
    if (!(lmin > 0.0))
        throw CoefficientDegeneracyError("coefficient field lost ellipticity, lambda_min=" +
                                         std::to_string(lmin));
    cf.separable = std::move(sep);
    return cf;
}

}  // namespace ampere2d
