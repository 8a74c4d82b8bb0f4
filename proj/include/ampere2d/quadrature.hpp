#pragma once

#include <cmath>
#include <cstddef>
#include <functional>

#include "ampere2d/errors.hpp"

namespace ampere2d {

namespace detail {

// Gauss 7 / Kronrod 15 abscissae and weights on [-1, 1].
inline constexpr double kGK15Nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
inline constexpr double kGK15WeightsK[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
inline constexpr double kGK15WeightsG[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class F>
inline void gk15(const F& f, double a, double b, double& kronrod, double& err) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    for (int i = 0; i < 7; ++i) {
        fv[i] = f(c - h * kGK15Nodes[i]);
        fv[14 - i] = f(c + h * kGK15Nodes[i]);
    }
    fv[7] = f(c);
    double resk = 0, resg = 0;
    for (int i = 0; i < 7; ++i) resk += kGK15WeightsK[i] * (fv[i] + fv[14 - i]);
    resk += kGK15WeightsK[7] * fv[7];
    // Gauss nodes are the odd-indexed Kronrod nodes.
    for (int i = 0; i < 3; ++i) resg += kGK15WeightsG[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
    resg += kGK15WeightsG[3] * fv[7];
    kronrod = resk * h;
    err = std::abs((resk - resg) * h);
}

template <class F>
inline double adaptive_rec(const F& f, double a, double b, double tol, int depth) {
    double v, err;
    gk15(f, a, b, v, err);
    // the floors stop subdivision once the estimate sits at the roundoff
    // level, where halving cannot help
    if (err <= tol || err <= 1e-14 * std::abs(v) + 1e-17 || depth >= 24 ||
        b - a < 1e-14 * (1.0 + std::abs(a) + std::abs(b)))
        return v;
    double m = 0.5 * (a + b);
    return adaptive_rec(f, a, m, 0.5 * tol, depth + 1) +
           adaptive_rec(f, m, b, 0.5 * tol, depth + 1);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integral of f over [a, b], absolute tolerance tol.
template <class F>
inline double integrate(const F& f, double a, double b, double tol = 1e-12) {
    if (a == b) return 0.0;
    return detail::adaptive_rec(f, a, b, tol, 0);
}

/// Cumulative integral of f at the given increasing nodes, starting at 0 at
/// nodes[0]. Each segment is integrated adaptively so the values are accurate
/// to roughly tol per segment independent of node spacing.
template <class F>
inline std::vector<double> cumulative_integral(const F& f,
                                               const std::vector<double>& nodes,
                                               double tol = 1e-13) {
    std::vector<double> out(nodes.size(), 0.0);
    for (std::size_t i = 1; i < nodes.size(); ++i)
        out[i] = out[i - 1] + integrate(f, nodes[i - 1], nodes[i], tol);
    return out;
}

}  // namespace ampere2d
