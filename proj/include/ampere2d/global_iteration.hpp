#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ampere2d/asymptotics.hpp"
#include "ampere2d/linear_elliptic.hpp"
#include "ampere2d/radial_profile.hpp"
#include "ampere2d/source_field.hpp"

namespace ampere2d {

class NonConvergenceError;

struct IterationHistoryEntry {
    int level;
    double sup_psi;
    double weighted_sup;  // sup (1+r)^tau |psi|
    double residual;      // sup |det D^2 (U + phi) - f1|
    double min_eig;       // convexity margin of U + phi
};

/// Iteration driver state: phi is the accumulated correction, psi the last
/// increment, and the flux pairs of the previous two iterates feed the
/// divergence-form right-hand sides.
struct IterationState {
    int level = -1;
    PolarField phi, psi;
    double tau = 0;
    double alpha_holder = 0.5;  // diagnostic exponent of the estimate scale
    std::vector<IterationHistoryEntry> history;
    FluxPair flux_prev, flux_cur;
};

/// Everything a Picard level needs: grid, base solution and its linearized
/// coefficients, and the sampled source.
struct GlobalWorkspace {
    std::shared_ptr<const PolarGrid> grid;
    RadialProfile profile;
    CoefficientField coeffs;
    PolarField f1_grid;
    PolarField U_field;
    double tau = 0.9;
    EdgeData outer_bc;  // far-field truncation condition

    std::shared_ptr<const SphericalAverageTable> ftilde;

    static GlobalWorkspace make(const SourceField& f1, std::shared_ptr<const PolarGrid> grid,
                                double tau, int n_theta_average = 64,
                                EdgeData outer = EdgeData::zero()) {
        GlobalWorkspace ws;
        ws.grid = grid;
        ws.tau = tau;
        ws.outer_bc = std::move(outer);
        ws.ftilde = std::make_shared<SphericalAverageTable>(f1, grid->r, 64.0 * grid->r_max(),
                                                            n_theta_average);
        auto table = ws.ftilde;
        RadialBuildOptions ropt;
        ropt.quadrature_knots = table->nodes();
        RadialSourceFn ft([table](double r) { return (*table)(r); },
                          [table](double r) { return table->deviation(r); });
        ws.profile = build_radial_solution(ft, grid->r, ropt);
        ws.coeffs = build_coefficients(ws.profile, grid);
        ws.f1_grid = field_from_xy(grid, f1.eval);
        ws.U_field = PolarField(grid);
        for (int i = 0; i < grid->n_r(); ++i)
            for (int j = 0; j < grid->n_theta; ++j) ws.U_field.at(i, j) = ws.profile.U[i];
        return ws;
    }
};

struct EquationCheck {
    double residual_sup = 0;
    double min_eig = 0;
    int worst_i = 0, worst_j = 0;
};

inline EquationCheck equation_check(const GlobalWorkspace& ws, const PolarField& phi) {
    PolarField u = ws.U_field + phi;
    HessianField H = cartesian_hessian(u);
    PolarField det = det_hessian(H);
    EquationCheck out;
    out.min_eig = 1e300;
    const auto& g = *ws.grid;
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta; ++j) {
            double r = std::abs(det.at(i, j) - ws.f1_grid.at(i, j));
            if (r > out.residual_sup) {
                out.residual_sup = r;
                out.worst_i = i;
                out.worst_j = j;
            }
            out.min_eig = std::min(out.min_eig, H.sym(i, j).eig_min());
        }
    return out;
}

/// phi^0 with L phi^0 = f1 - ftilde. The spherical average removes the whole
/// mode-0 component of the right-hand side, so phi^0 carries no logarithm.
inline PolarField initial_correction(const CoefficientField& coeffs, const PolarField& f1_grid,
                                     const std::vector<double>& ftilde,
                                     const EdgeData& outer = EdgeData::zero()) {
    PolarField rhs = f1_grid;
    for (int i = 0; i < rhs.n_r(); ++i)
        for (int j = 0; j < rhs.n_theta(); ++j) rhs.at(i, j) -= ftilde[i];
    ModeStack modes = mode_decompose(rhs);
    for (int i = 0; i < modes.n_r(); ++i) modes.at(i, 0) = 0.0;
    rhs = mode_recompose(modes);
    LinearBC bc;
    bc.outer = outer;
    return solve_linearized(coeffs, rhs, bc).psi;
}

inline IterationState initial_state(const GlobalWorkspace& ws) {
    IterationState st;
    st.tau = ws.tau;
    st.phi = initial_correction(ws.coeffs, ws.f1_grid, ws.profile.ftilde, ws.outer_bc);
    st.psi = st.phi;
    st.level = 0;
    GradientField grad = cartesian_gradient(st.phi);
    HessianField hess = cartesian_hessian(st.phi);
    st.flux_cur = det_flux(grad, hess);
    st.flux_prev = FluxPair{PolarField(ws.grid), PolarField(ws.grid)};
    EquationCheck chk = equation_check(ws, st.phi);
    st.history.push_back({0, st.phi.sup_abs(), weighted_sup(st.phi, ws.tau), chk.residual_sup,
                          chk.min_eig});
    return st;
}

/// One Picard level: L psi^l = det(D^2 phi^{l-2}) - det(D^2 phi^{l-1}),
/// assembled as the divergence of the flux-pair difference, then
/// phi^l = phi^{l-1} + psi^l.
inline IterationState picard_step(IterationState state, const GlobalWorkspace& ws) {
    const int level = state.level + 1;
    PolarField rhs = divergence(state.flux_prev.f1 - state.flux_cur.f1,
                                state.flux_prev.f2 - state.flux_cur.f2);
    LinearBC bc;
    bc.outer = ws.outer_bc;
    state.psi = solve_linearized(ws.coeffs, rhs, bc).psi;
    state.phi += state.psi;
    state.level = level;

    state.flux_prev = std::move(state.flux_cur);
    GradientField grad = cartesian_gradient(state.phi);
    HessianField hess = cartesian_hessian(state.phi);
    state.flux_cur = det_flux(grad, hess);

    EquationCheck chk = equation_check(ws, state.phi);
    if (!(chk.min_eig > 0.0))
        throw IterationBreakdownError(
            "convexity of U + phi lost at level " + std::to_string(level) + " (min eig " +
                std::to_string(chk.min_eig) + ")",
            ws.grid->r[chk.worst_i], ws.grid->theta[chk.worst_j]);
    state.history.push_back({level, state.psi.sup_abs(), weighted_sup(state.psi, state.tau),
                             chk.residual_sup, chk.min_eig});
    return state;
}

class NonConvergenceError : public SolverError {
  public:
    NonConvergenceError(std::string msg, std::vector<IterationHistoryEntry> hist)
        : SolverError(std::move(msg)), history(std::move(hist)) {}
    std::vector<IterationHistoryEntry> history;
};

class SourceValidationError : public InvalidSourceError {
  public:
    explicit SourceValidationError(ValidationReport rep)
        : InvalidSourceError(join(rep)), report(std::move(rep)) {}
    ValidationReport report;

  private:
    static std::string join(const ValidationReport& rep) {
        std::string s = "source validation failed:";
        for (const auto& v : rep.violations) s += "\n  " + v;
        return s;
    }
};

struct GridSpec {
    int n_r = 256;
    int n_theta = 64;
    double r_max = 64.0;
};

struct GlobalSolveOptions {
    double tol = 1e-10;
    int l_max = 40;
    double eps0_threshold = 0.1;
    bool validate = true;
    bool certify_truncation = true;  // Richardson check at doubled R_max
    double tau = 0;                  // 0: 0.9 min(beta/2 - 1, 1)
    bool outer_robin = false;        // Robin decay condition instead of Dirichlet
    int n_theta_average = 64;
};

struct TruncationCheck {
    bool performed = false;
    double d_delta = 0;
    double c_delta = 0;
};

struct GlobalSolution {
    std::shared_ptr<const PolarGrid> grid;
    AffineData aff;
    RadialProfile profile;
    PolarField v;    // solution of det D^2 v = f1, shift applied
    PolarField phi;  // v - U
    double shift = 0;
    AsymptoticFit fit;
    std::vector<IterationHistoryEntry> history;
    bool converged = false;
    int levels = 0;
    double final_residual = 0;
    double min_eig = 0;
    ValidationReport validation;
    TruncationCheck truncation;
    PolarInterpolant v_interp;
    std::shared_ptr<const SphericalAverageTable> ftilde;

    /// u(x) = v(sqrtA x) + b.x; the prescribed constant is already in v.
    double u_eval(Vec2 x) const {
        Vec2 y = mat_vec(aff.sqrtA, x);
        return v_interp(y.norm(), std::atan2(y.y, y.x)) + dot(aff.b, x);
    }
};

namespace detail {

inline GlobalSolution solve_global_impl(const SourceField& f, const AffineData& aff,
                                        const GridSpec& gs, const GlobalSolveOptions& opt) {
    GlobalSolution out;
    out.aff = aff;
    SourceField f1 = aff.is_identity() ? f : normalize_source(f, aff);
    if (opt.validate) {
        ValidationOptions vopt;
        vopt.eps0_threshold = opt.eps0_threshold;
        out.validation = validate_source(f1, SamplingPlan::geometric(gs.r_max), vopt);
        if (!out.validation.passed) throw SourceValidationError(out.validation);
    }
    double tau = opt.tau > 0 ? opt.tau : 0.9 * std::min(f1.beta / 2.0 - 1.0, 1.0);
    auto grid = PolarGrid::make_global(gs.n_r, gs.n_theta, gs.r_max);
    EdgeData outer = opt.outer_robin ? EdgeData::robin(tau) : EdgeData::zero();
    GlobalWorkspace ws = GlobalWorkspace::make(f1, grid, tau, opt.n_theta_average, outer);

    IterationState st = initial_state(ws);
    bool converged = false;
    while (st.level < opt.l_max) {
        st = picard_step(std::move(st), ws);
        if (st.history.back().weighted_sup < opt.tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw NonConvergenceError("picard iteration did not reach tolerance " +
                                      std::to_string(opt.tol) + " in " +
                                      std::to_string(opt.l_max) + " levels",
                                  st.history);

    out.grid = grid;
    out.profile = std::move(ws.profile);
    out.ftilde = ws.ftilde;
    out.phi = st.phi;
    out.v = ws.U_field + st.phi;
    out.history = std::move(st.history);
    out.converged = true;
    out.levels = st.level;
    out.final_residual = out.history.back().residual;
    out.min_eig = out.history.back().min_eig;

    out.fit = fit_expansion(out.v, gs.r_max / 8.0, gs.r_max / 2.0);
    out.shift = aff.c - out.fit.c_fit;
    out.v += out.shift;
    out.fit.c_fit = aff.c;
    out.v_interp = PolarInterpolant(out.v);
    return out;
}

}  // namespace detail

/// Full constructive solve of det(D^2 u) = f with the prescribed affine
/// behavior at infinity. Throws SourceValidationError, NonConvergenceError,
/// or IterationBreakdownError.
inline GlobalSolution solve_global(const SourceField& f, const AffineData& aff,
                                   const GridSpec& gs = {}, const GlobalSolveOptions& opt = {}) {
    GlobalSolution sol = detail::solve_global_impl(f, aff, gs, opt);
    if (opt.certify_truncation) {
        GlobalSolveOptions o2 = opt;
        o2.certify_truncation = false;
        o2.validate = false;
        GridSpec gs2 = gs;
        gs2.r_max = 2.0 * gs.r_max;
        GlobalSolution wide = detail::solve_global_impl(f, aff, gs2, o2);
        sol.truncation.performed = true;
        sol.truncation.d_delta = std::abs(wide.fit.d_fit - sol.fit.d_fit);
        // compare the raw additive constants (both runs pin c_fit to the
        // prescribed value, so the difference lives in the shifts)
        sol.truncation.c_delta = std::abs(wide.shift - sol.shift);
    }
    return sol;
}

}  // namespace ampere2d
