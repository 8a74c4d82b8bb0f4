#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ampere2d/global_iteration.hpp"
#include "ampere2d/kelvin.hpp"

namespace ampere2d {

/// Deviation-form spherical average of f, needed where the average is close
/// to 1 and absolute subtraction would lose the mass integrand.
inline double spherical_average_deviation(const SourceField& f, double r, int n_angles = 64) {
    if (r == 0.0) return f.eval({0, 0}) - 1.0;
    double acc = 0;
    for (int j = 0; j < n_angles; ++j) {
        double t = 2.0 * std::numbers::pi * j / n_angles;
        acc += f.eval({r * std::cos(t), r * std::sin(t)}) - 1.0;
    }
    return acc / n_angles;
}

/// (1/2pi) int_{|x| >= r0} (f - 1), truncated with the (af) tail bound.
inline IntegralWithTail exterior_mass(const SourceField& f, double r0, double r_far = 0) {
    double R = r_far > 0 ? r_far : 4096.0 * std::max(1.0, r0);
    IntegralWithTail out;
    std::vector<double> nodes{r0};
    for (double r = r0 * 1.05; r < R; r *= 1.05) nodes.push_back(r);
    nodes.push_back(R);
    for (std::size_t k = 1; k < nodes.size(); ++k)
        out.value += integrate(
            [&](double r) { return r * spherical_average_deviation(f, r); }, nodes[k - 1],
            nodes[k], 1e-13);
    out.tail_error = f.c0 * std::pow(R, 2.0 - f.beta) / (f.beta - 2.0);
    return out;
}

/// Compactly supported radial bump used for the interior mass correction.
inline double default_bump(double t) {
    return std::abs(t) < 1.0 ? std::pow(1.0 - t * t, 3.0) : 0.0;
}

struct ExtendedSource {
    SourceField f_ext;
    double gamma = 0;        // bump amplitude fixed by the mass constraint
    double mass_outside = 0; // (1/2pi) int_{|x|>=r0} (f-1)
    double c0_achieved = 0;  // two-sided bound of the extension
};

/// Extends f inside B_{r0}: a C2 radial ramp from 1 up to the boundary-ray
/// values of f over [0.8 r0, r0], plus gamma chi(|x|/r0) with gamma solved so
/// the total mass is the prescribed d. Values outside B_{r0} are untouched.
inline ExtendedSource extend_source(const SourceField& f, double r0, double d_target,
                                    const std::function<double(double)>& bump = default_bump) {
    ExtendedSource out;
    auto mass_out = exterior_mass(f, r0);
    out.mass_outside = mass_out.value;
    if (!(d_target > out.mass_outside - 0.5 * r0 * r0))
        throw ExtensionInfeasibleError(
            "prescribed log coefficient violates the admissibility bound d > " +
            std::to_string(out.mass_outside - 0.5 * r0 * r0));

    auto ramp = [](double t) {
        // quintic smoothstep on [0.8, 1], C2 at both ends
        if (t <= 0.8) return 0.0;
        if (t >= 1.0) return 1.0;
        double u = (t - 0.8) / 0.2;
        return u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    };
    auto base_eval = f.eval;
    auto make_ext = [base_eval, r0, ramp, bump](double gamma) {
        return [base_eval, r0, ramp, bump, gamma](Vec2 x) {
            double r = x.norm();
            double t = r / r0;
            if (t >= 1.0) return base_eval(x);
            double s = ramp(t);
            double boundary = 0.0;
            if (s > 0.0) {
                Vec2 ray{r0 * x.x / r, r0 * x.y / r};
                boundary = base_eval(ray);
            }
            return (1.0 - s) + s * boundary + gamma * bump(t);
        };
    };
    auto interior_mass = [&](double gamma) {
        auto fe = make_ext(gamma);
        SourceField probe;
        probe.eval = fe;
        return integrate(
            [&](double r) { return r * spherical_average_deviation(probe, r); }, 0.0, r0, 1e-13);
    };
    // the mass is affine in gamma; a secant step lands exactly, iterate to be
    // safe for arbitrary bump profiles
    double g0 = 0.0, g1 = 1.0;
    double m0 = interior_mass(g0) + out.mass_outside - d_target;
    double m1 = interior_mass(g1) + out.mass_outside - d_target;
    double gamma = g1;
    for (int it = 0; it < 8; ++it) {
        if (std::abs(m1 - m0) < 1e-300)
            throw ExtensionInfeasibleError("bump profile carries no mass");
        gamma = g1 - m1 * (g1 - g0) / (m1 - m0);
        double mg = interior_mass(gamma) + out.mass_outside - d_target;
        g0 = g1;
        m0 = m1;
        g1 = gamma;
        m1 = mg;
        if (std::abs(mg) < 1e-12) break;
    }
    out.gamma = gamma;

    out.f_ext.eval = make_ext(gamma);
    out.f_ext.beta = f.beta;
    out.f_ext.k_smooth = f.k_smooth;
    // achieved hypothesis constants over the modified region, m = 0, 1
    double lo = 1e300, c0 = f.c0;
    for (int i = 0; i <= 96; ++i)
        for (int j = 0; j < 64; ++j) {
            double t = 2.0 * std::numbers::pi * j / 64.0;
            double r = 1.5 * r0 * i / 96.0;
            Vec2 x{r * std::cos(t), r * std::sin(t)};
            double v = out.f_ext.eval(x);
            lo = std::min(lo, v);
            double w = std::pow(1.0 + r, f.beta);
            Vec2 grad = out.f_ext.gradient(x);
            c0 = std::max({c0, v, std::abs(v - 1.0) * w, grad.norm() * w * (1.0 + r)});
            if (r == 0.0) break;
        }
    if (!(lo >= 0.5 / f.c0))
        throw ExtensionInfeasibleError(
            "no admissible amplitude keeps the extension above 1/(2 c0); prescribed d too "
            "negative for this radius (min value " +
            std::to_string(lo) + ")");
    out.c0_achieved = 1.05 * std::max(c0, 1.0 / lo);
    out.f_ext.c0 = out.c0_achieved;
    return out;
}

struct BoundaryNormalization {
    double shift = 0;            // mean of phi - U over the boundary circle
    std::vector<double> offset;  // phi - (U + shift) at the theta nodes
    double eps_sup = 0;
    double holder = 0;
};

/// Shifts the base solution so the boundary offset phi - U has zero mean,
/// and reports the size and Hoelder seminorm of what remains.
inline BoundaryNormalization normalize_boundary(const GlobalSolution& base,
                                                const ExteriorSpec& spec, int n_theta) {
    BoundaryNormalization out;
    out.offset.resize(n_theta);
    double mean = 0;
    for (int j = 0; j < n_theta; ++j) {
        double t = 2.0 * std::numbers::pi * j / n_theta;
        double diff = spec.boundary_data(t) - base.v_interp(spec.r0, t);
        out.offset[j] = diff;
        mean += diff;
    }
    mean /= n_theta;
    out.shift = mean;
    for (double& v : out.offset) v -= mean;
    for (double v : out.offset) out.eps_sup = std::max(out.eps_sup, std::abs(v));
    out.holder = holder_seminorm(out.offset, spec.r0, spec.alpha);
    return out;
}

struct ExteriorSolveOptions {
    double tol = 1e-10;
    int k_max = 40;
    double eps1_threshold = 0.1;    // gate on the normalized boundary offset
    double holder_threshold = 0.5;  // gate on its empirical Hoelder seminorm
    double tau = 0;               // weight exponent; 0 derives from beta
    GlobalSolveOptions global;    // options of the interior base solve
    std::function<double(double)> bump;  // interior mass bump, default (1-t^2)^3
};

struct ExteriorSolution {
    std::shared_ptr<const PolarGrid> grid;  // annulus [r0, R_max]
    PolarField u;                           // U + shift + h
    PolarField h;
    GlobalSolution base;
    BoundaryNormalization normalization;
    double u_shift = 0;      // total additive shift applied to the base
    double gamma = 0;
    double mass_outside = 0;
    double d_target = 0;
    AsymptoticFit fit;       // d_fit and the uniquely determined c_d
    double boundary_error = 0;
    double psi0_decay[3] = {0, 0, 0};  // sup (1+r)^{2+m} |D^m psi0|
    std::vector<IterationHistoryEntry> cascade_history;
    bool converged = false;
    PolarInterpolant u_interp;

    double eval(double r, double theta) const { return u_interp(r, theta); }
};

namespace detail {

/// Full coefficient evaluator adj(D^2 (U_rad + phi)): the radial part is
/// exact from the profile, the angular part is the (linear) adjugate of the
/// interpolated correction Hessian.
class ExteriorCoefficientEvaluator {
  public:
    ExteriorCoefficientEvaluator(const RadialProfile& profile,
                                 std::shared_ptr<const SphericalAverageTable> ftilde,
                                 const PolarField& phi)
        : radial_(profile, [ftilde](double r) { return (*ftilde)(r); }),
          r_max_(profile.r.back()) {
        HessianField H = cartesian_hessian(phi);
        h11_ = PolarInterpolant(H.u11);
        h12_ = PolarInterpolant(H.u12);
        h22_ = PolarInterpolant(H.u22);
    }

    SymMat2 operator()(Vec2 x) const {
        SymMat2 a = radial_(x);
        double r = x.norm();
        if (r <= r_max_) {
            double t = std::atan2(x.y, x.x);
            a.xx += h22_(r, t);
            a.yy += h11_(r, t);
            a.xy -= h12_(r, t);
        }
        return a;
    }

  private:
    RadialCoefficientEvaluator radial_;
    PolarInterpolant h11_, h12_, h22_;
    double r_max_;
};

inline CoefficientField sample_coefficients(const std::function<SymMat2(Vec2)>& a,
                                            std::shared_ptr<const PolarGrid> grid) {
    const auto& g = *grid;
    CoefficientField cf{PolarField(grid), PolarField(grid), PolarField(grid)};
    double lmin = 1e300, lmax = -1e300;
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta; ++j) {
            Vec2 x{g.r[i] * g.cos_theta[j], g.r[i] * g.sin_theta[j]};
            SymMat2 m = a(x);
            cf.a11.at(i, j) = m.xx;
            cf.a12.at(i, j) = m.xy;
            cf.a22.at(i, j) = m.yy;
            lmin = std::min(lmin, m.eig_min());
            lmax = std::max(lmax, m.eig_max());
        }
    cf.lambda_min = lmin;
    cf.lambda_max = lmax;
    if (!(lmin > 0.0))
        throw CoefficientDegeneracyError("exterior coefficients lost ellipticity");
    return cf;
}

}  // namespace detail

/// Exterior Dirichlet pipeline: extend the source inside the disk, solve the
/// global problem for the base U, normalize the boundary offset, solve psi_0
/// in Kelvin variables on the inverted disk, then run the zero-boundary
/// cascade on the annulus.
inline ExteriorSolution solve_exterior(const ExteriorSpec& spec, const SourceField& f,
                                       const GridSpec& gs = {},
                                       const ExteriorSolveOptions& opt = {}) {
    ExteriorSolution out;
    out.d_target = spec.d_target;

    auto ext = opt.bump ? extend_source(f, spec.r0, spec.d_target, opt.bump)
                        : extend_source(f, spec.r0, spec.d_target);
    out.gamma = ext.gamma;
    out.mass_outside = ext.mass_outside;

    GlobalSolveOptions gopt = opt.global;
    gopt.certify_truncation = false;
    AffineData aff = AffineData::identity();
    out.base = solve_global(ext.f_ext, aff, gs, gopt);

    double tau = opt.tau > 0 ? opt.tau : 0.9 * std::min(f.beta / 2.0 - 1.0, 1.0);

    auto grid = PolarGrid::make_exterior(gs.n_r, gs.n_theta, spec.r0, gs.r_max);
    out.grid = grid;
    out.normalization = normalize_boundary(out.base, spec, gs.n_theta);
    out.u_shift = out.normalization.shift;
    if (out.normalization.eps_sup > opt.eps1_threshold)
        throw InvalidSourceError("normalized boundary offset " +
                                 std::to_string(out.normalization.eps_sup) +
                                 " exceeds the smallness gate " +
                                 std::to_string(opt.eps1_threshold));
    if (out.normalization.holder > opt.holder_threshold)
        throw InvalidSourceError("boundary Hoelder seminorm " +
                                 std::to_string(out.normalization.holder) +
                                 " exceeds the smallness gate " +
                                 std::to_string(opt.holder_threshold));

    // psi_0: Kelvin-image Dirichlet problem on the inverted disk
    detail::ExteriorCoefficientEvaluator a_full(out.base.profile, out.base.ftilde, out.base.phi);
    std::function<SymMat2(Vec2)> a_fn = [&a_full](Vec2 x) { return a_full(x); };
    PolarField psi0(grid);
    {
        auto disk = PolarGrid::make_disk(gs.n_r, gs.n_theta, 1.0 / spec.r0);
        CoefficientField kelvin_cf{PolarField(disk), PolarField(disk), PolarField(disk)};
        kelvin_cf.b1 = PolarField(disk);
        kelvin_cf.b2 = PolarField(disk);
        kelvin_cf.has_drift = true;
        double lmin = 1e300, lmax = -1e300;
        for (int i = 0; i < disk->n_r(); ++i)
            for (int j = 0; j < disk->n_theta; ++j) {
                Vec2 y{disk->r[i] * disk->cos_theta[j], disk->r[i] * disk->sin_theta[j]};
                auto [b, bk] = kelvin_coefficients(a_fn, y);
                kelvin_cf.a11.at(i, j) = b.xx;
                kelvin_cf.a12.at(i, j) = b.xy;
                kelvin_cf.a22.at(i, j) = b.yy;
                kelvin_cf.b1.at(i, j) = bk.x;
                kelvin_cf.b2.at(i, j) = bk.y;
                lmin = std::min(lmin, b.eig_min());
                lmax = std::max(lmax, b.eig_max());
            }
        kelvin_cf.lambda_min = lmin;
        kelvin_cf.lambda_max = lmax;
        if (!(lmin > 0.0))
            throw CoefficientDegeneracyError("kelvin image coefficients lost ellipticity");

        LinearBC bc;
        bc.outer = EdgeData::dirichlet(out.normalization.offset);
        PolarField zero_rhs(disk);
        auto res = solve_linearized(kelvin_cf, zero_rhs, bc);

        double a0 = 0;
        for (int j = 0; j < disk->n_theta; ++j) a0 += res.psi.at(0, j);
        a0 /= disk->n_theta;
        out.u_shift += a0;

        PolarInterpolant itp(res.psi);
        for (int i = 0; i < grid->n_r(); ++i)
            for (int j = 0; j < grid->n_theta; ++j)
                psi0.at(i, j) = itp(1.0 / grid->r[i], grid->theta[j]) - a0;
    }

    // decay metrics of psi_0
    {
        GradientField gr = cartesian_gradient(psi0);
        HessianField He = cartesian_hessian(psi0);
        for (int i = 0; i < grid->n_r(); ++i) {
            double r = grid->r[i];
            for (int j = 0; j < grid->n_theta; ++j) {
                out.psi0_decay[0] =
                    std::max(out.psi0_decay[0], sq(1.0 + r) * std::abs(psi0.at(i, j)));
                double g1 = std::hypot(gr.gx.at(i, j), gr.gy.at(i, j));
                out.psi0_decay[1] = std::max(out.psi0_decay[1], std::pow(1.0 + r, 3.0) * g1);
                double h2 = std::max({std::abs(He.u11.at(i, j)), std::abs(He.u12.at(i, j)),
                                      std::abs(He.u22.at(i, j))});
                out.psi0_decay[2] = std::max(out.psi0_decay[2], std::pow(1.0 + r, 4.0) * h2);
            }
        }
    }

    // base values on the annulus
    PolarField U_ann(grid);
    for (int i = 0; i < grid->n_r(); ++i)
        for (int j = 0; j < grid->n_theta; ++j)
            U_ann.at(i, j) = out.base.v_interp(grid->r[i], grid->theta[j]) + out.u_shift;

    CoefficientField cf_ann = detail::sample_coefficients(a_fn, grid);

    // cascade: L psi_k = det(D^2 h_{k-2}) - det(D^2 h_{k-1}), zero boundary
    PolarField h = psi0;
    FluxPair flux_prev{PolarField(grid), PolarField(grid)};
    FluxPair flux_cur;
    {
        GradientField g0 = cartesian_gradient(h);
        HessianField H0 = cartesian_hessian(h);
        flux_cur = det_flux(g0, H0);
    }
    auto record = [&](int k, const PolarField& psik) {
        PolarField u = U_ann + h;
        HessianField H = cartesian_hessian(u);
        double min_eig = 1e300;
        for (int i = 0; i < grid->n_r(); ++i)
            for (int j = 0; j < grid->n_theta; ++j)
                min_eig = std::min(min_eig, H.sym(i, j).eig_min());
        out.cascade_history.push_back(
            {k, psik.sup_abs(), weighted_sup(psik, tau), 0.0, min_eig});
        if (!(min_eig > 0.0))
            throw IterationBreakdownError("exterior iterate lost convexity at level " +
                                              std::to_string(k),
                                          0.0, 0.0);
    };
    record(0, psi0);
    bool converged = out.cascade_history.back().weighted_sup < opt.tol;
    for (int k = 1; k <= opt.k_max && !converged; ++k) {
        PolarField rhs = divergence(flux_prev.f1 - flux_cur.f1, flux_prev.f2 - flux_cur.f2);
        LinearBC bc;  // zero Dirichlet on both edges
        PolarField psik = solve_linearized(cf_ann, rhs, bc).psi;
        h += psik;
        flux_prev = std::move(flux_cur);
        GradientField gk = cartesian_gradient(h);
        HessianField Hk = cartesian_hessian(h);
        flux_cur = det_flux(gk, Hk);
        record(k, psik);
        converged = out.cascade_history.back().weighted_sup < opt.tol;
    }
    if (!converged)
        throw NonConvergenceError("exterior cascade did not reach tolerance", out.cascade_history);
    out.converged = true;

    out.h = std::move(h);
    out.u = U_ann + out.h;

    out.boundary_error = 0;
    for (int j = 0; j < grid->n_theta; ++j)
        out.boundary_error = std::max(
            out.boundary_error, std::abs(out.u.at(0, j) - spec.boundary_data(grid->theta[j])));
    if (out.boundary_error > 10.0 * std::max(opt.tol, 1e-12) + 1e-9)
        throw BoundaryConsistencyError("converged exterior solution misses its boundary data by " +
                                       std::to_string(out.boundary_error));

    out.fit = fit_expansion(out.u, gs.r_max / 8.0, gs.r_max / 2.0);
    out.u_interp = PolarInterpolant(out.u);
    return out;
}

}  // namespace ampere2d
