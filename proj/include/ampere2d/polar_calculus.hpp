#pragma once

#include <complex>
#include <vector>

#include "ampere2d/interp.hpp"
#include "ampere2d/polar_grid.hpp"

namespace ampere2d {

/// Radial derivative (order 1 or 2) column by column. Global/disk grids read
/// ghost values through the origin via u(-r, theta) = u(r, theta + pi).
inline PolarField radial_derivative(const PolarField& u, int order) {
    const auto& g = u.grid();
    PolarField out(u.grid_ptr());
    const int nt = g.n_theta;
    const int half = nt / 2;
    parallel_for(0, static_cast<std::size_t>(g.n_r()), [&](std::size_t i) {
        const auto& st = g.stencil[i];
        for (int j = 0; j < nt; ++j) {
            double acc = 0;
            for (int k = 0; k < st.n; ++k) {
                int jj = st.mirror[k] ? (j + half) % nt : j;
                acc += (order == 1 ? st.w1[k] : st.w2[k]) * u.at(st.idx[k], jj);
            }
            out.at(i, j) = acc;
        }
    });
    return out;
}

/// Radial derivative of one angular mode's coefficient array; ghost values at
/// -r pick up the parity factor (-1)^m.
inline std::vector<std::complex<double>> mode_radial_derivative(
    const PolarGrid& g, const std::vector<std::complex<double>>& c, int m, int order) {
    std::vector<std::complex<double>> out(c.size());
    const double parity = (m % 2 == 0) ? 1.0 : -1.0;
    for (int i = 0; i < g.n_r(); ++i) {
        const auto& st = g.stencil[i];
        std::complex<double> acc = 0;
        for (int k = 0; k < st.n; ++k) {
            double w = (order == 1 ? st.w1[k] : st.w2[k]);
            acc += w * (st.mirror[k] ? parity * c[st.idx[k]] : c[st.idx[k]]);
        }
        out[i] = acc;
    }
    return out;
}

inline ModeStack theta_derivative_modes(const ModeStack& s, int order) {
    ModeStack out(s.grid_ptr());
    const int nm = s.n_modes();
    for (int i = 0; i < s.n_r(); ++i)
        for (int m = 0; m < nm; ++m) {
            if (order == 1) {
                // Nyquist first derivative of a real signal is dropped
                std::complex<double> f = (m == nm - 1) ? 0.0 : std::complex<double>(0.0, m);
                out.at(i, m) = f * s.at(i, m);
            } else {
                out.at(i, m) = -static_cast<double>(m) * static_cast<double>(m) * s.at(i, m);
            }
        }
    return out;
}

inline PolarField theta_derivative(const PolarField& u, int order) {
    return mode_recompose(theta_derivative_modes(mode_decompose(u), order));
}

namespace detail {

/// lim_{r->0} c(r)/r^pow from the first interior nodes, extrapolating the
/// even Taylor remainder in r^2.
inline std::complex<double> origin_mode_limit(const PolarGrid& g,
                                              const ModeStack& s, int m, int pow) {
    const int k = std::min(4, g.n_r() - 1);
    std::vector<double> t(k), yre(k), yim(k);
    for (int i = 1; i <= k; ++i) {
        double ri = g.r[i];
        std::complex<double> v = s.at(i, m) / std::pow(ri, pow);
        t[i - 1] = ri * ri;
        yre[i - 1] = v.real();
        yim[i - 1] = v.imag();
    }
    return {extrapolate_to_zero(t, yre), extrapolate_to_zero(t, yim)};
}

/// Second derivative at r = 0 of the (even) mode-0 radial profile, using the
/// same reflected origin stencil as the radial derivative operators so the
/// Hessian trace at the origin matches the per-mode operator identically.
inline double origin_mode0_second(const PolarGrid& g, const ModeStack& s) {
    const auto& st = g.stencil[0];
    double acc = 0;
    for (int k = 0; k < st.n; ++k) acc += st.w2[k] * s.at(st.idx[k], 0).real();
    return acc;
}

}  // namespace detail

struct GradientField {
    PolarField gx, gy;
};

inline GradientField cartesian_gradient(const PolarField& u) {
    const auto& g = u.grid();
    PolarField ur = radial_derivative(u, 1);
    ModeStack s = mode_decompose(u);
    PolarField ut = mode_recompose(theta_derivative_modes(s, 1));
    GradientField out{PolarField(u.grid_ptr()), PolarField(u.grid_ptr())};
    const int i0 = g.contains_origin() ? 1 : 0;
    parallel_for(i0, static_cast<std::size_t>(g.n_r()), [&](std::size_t i) {
        const double inv_r = 1.0 / g.r[i];
        for (int j = 0; j < g.n_theta; ++j) {
            double c = g.cos_theta[j], sn = g.sin_theta[j];
            double a = ur.at(i, j), b = ut.at(i, j) * inv_r;
            out.gx.at(i, j) = c * a - sn * b;
            out.gy.at(i, j) = sn * a + c * b;
        }
    });
    if (g.contains_origin()) {
        std::complex<double> a1 = detail::origin_mode_limit(g, s, 1, 1);
        for (int j = 0; j < g.n_theta; ++j) {
            out.gx.at(0, j) = a1.real();
            out.gy.at(0, j) = -a1.imag();
        }
    }
    return out;
}

struct HessianField {
    PolarField u11, u12, u22;
    bool one_sided_inner = false;  // exterior grids only
    bool one_sided_outer = true;   // truncation edge is always one-sided

    SymMat2 sym(int i, int j) const {
        return {u11.at(i, j), u12.at(i, j), u22.at(i, j)};
    }
};

/// Cartesian Hessian from polar derivatives: fourth-order stencils in r,
/// spectral differentiation in theta. The origin ring of global/disk grids is
/// reconstructed from the limits of the mode-0 and mode-2 coefficients.
inline HessianField cartesian_hessian(const PolarField& u) {
    const auto& g = u.grid();
    PolarField ur = radial_derivative(u, 1);
    PolarField urr = radial_derivative(u, 2);
    ModeStack s = mode_decompose(u);
    PolarField ut = mode_recompose(theta_derivative_modes(s, 1));
    PolarField utt = mode_recompose(theta_derivative_modes(s, 2));
    PolarField urt = radial_derivative(ut, 1);

    HessianField H{PolarField(u.grid_ptr()), PolarField(u.grid_ptr()), PolarField(u.grid_ptr())};
    H.one_sided_inner = !g.contains_origin();
    const int i0 = g.contains_origin() ? 1 : 0;
    parallel_for(i0, static_cast<std::size_t>(g.n_r()), [&](std::size_t i) {
        const double inv_r = 1.0 / g.r[i];
        for (int j = 0; j < g.n_theta; ++j) {
            double c = g.cos_theta[j], sn = g.sin_theta[j];
            double V = urt.at(i, j) * inv_r - ut.at(i, j) * inv_r * inv_r;
            double W = ur.at(i, j) * inv_r + utt.at(i, j) * inv_r * inv_r;
            double rr = urr.at(i, j);
            H.u11.at(i, j) = c * c * rr - 2.0 * sn * c * V + sn * sn * W;
            H.u22.at(i, j) = sn * sn * rr + 2.0 * sn * c * V + c * c * W;
            H.u12.at(i, j) = sn * c * (rr - W) + (c * c - sn * sn) * V;
        }
    });
    if (g.contains_origin()) {
        double trace = 2.0 * detail::origin_mode0_second(g, s);
        std::complex<double> a2 = detail::origin_mode_limit(g, s, 2, 2);
        double diff = 4.0 * a2.real();   // u11 - u22
        double b = -2.0 * a2.imag();     // u12
        for (int j = 0; j < g.n_theta; ++j) {
            H.u11.at(0, j) = 0.5 * (trace + diff);
            H.u22.at(0, j) = 0.5 * (trace - diff);
            H.u12.at(0, j) = b;
        }
    }
    return H;
}

inline PolarField det_hessian(const HessianField& H) {
    PolarField out(H.u11.grid_ptr());
    const auto& v11 = H.u11.data();
    const auto& v12 = H.u12.data();
    const auto& v22 = H.u22.data();
    auto& o = out.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = v11[k] * v22[k] - v12[k] * v12[k];
    return out;
}

inline double hessian_min_eig(const HessianField& H) {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < H.u11.n_r(); ++i)
        for (int j = 0; j < H.u11.n_theta(); ++j) m = std::min(m, H.sym(i, j).eig_min());
    return m;
}

/// Divergence-form flux pair of det(D^2 u):
///   det(D^2 u) = d1(u_1 u_22) + d2(-u_1 u_12).
struct FluxPair {
    PolarField f1, f2;
};

inline FluxPair det_flux(const GradientField& grad, const HessianField& hess) {
    FluxPair fp{PolarField(grad.gx.grid_ptr()), PolarField(grad.gx.grid_ptr())};
    const auto& ux = grad.gx.data();
    const auto& h22 = hess.u22.data();
    const auto& h12 = hess.u12.data();
    for (std::size_t k = 0; k < ux.size(); ++k) {
        fp.f1.data()[k] = ux[k] * h22[k];
        fp.f2.data()[k] = -ux[k] * h12[k];
    }
    return fp;
}

/// d1 f1 + d2 f2 for smooth scalar fields f1, f2.
inline PolarField divergence(const PolarField& f1, const PolarField& f2) {
    GradientField g1 = cartesian_gradient(f1);
    GradientField g2 = cartesian_gradient(f2);
    return g1.gx + g2.gy;
}

/// Smooth evaluator for a grid field: cubic splines of the angular mode
/// coefficients in r, Fourier synthesis in theta. Radii are clamped to the
/// grid range.
class PolarInterpolant {
  public:
    PolarInterpolant() = default;

    explicit PolarInterpolant(const PolarField& u)
        : grid_(u.grid_ptr()) {
        ModeStack s = mode_decompose(u);
        const int nm = s.n_modes();
        re_.reserve(nm);
        im_.reserve(nm);
        std::vector<double> yr(u.n_r()), yi(u.n_r());
        for (int m = 0; m < nm; ++m) {
            for (int i = 0; i < u.n_r(); ++i) {
                yr[i] = s.at(i, m).real();
                yi[i] = s.at(i, m).imag();
            }
            re_.emplace_back(grid_->r, yr);
            im_.emplace_back(grid_->r, yi);
        }
    }

    double operator()(double r, double theta) const {
        r = std::clamp(r, grid_->r.front(), grid_->r.back());
        const int nm = static_cast<int>(re_.size());
        const std::complex<double> rot(std::cos(theta), std::sin(theta));
        std::complex<double> e(1.0, 0.0);
        double acc = re_[0](r);
        for (int m = 1; m < nm; ++m) {
            e *= rot;
            acc += re_[m](r) * e.real() - im_[m](r) * e.imag();
        }
        return acc;
    }

    std::complex<double> mode_value(int m, double r) const {
        r = std::clamp(r, grid_->r.front(), grid_->r.back());
        return {re_[m](r), im_[m](r)};
    }

    int n_modes() const { return static_cast<int>(re_.size()); }
    const PolarGrid& grid() const { return *grid_; }

  private:
    std::shared_ptr<const PolarGrid> grid_;
    std::vector<CubicSpline> re_, im_;
};

}  // namespace ampere2d
