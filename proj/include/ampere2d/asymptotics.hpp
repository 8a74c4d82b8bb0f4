#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ampere2d/errors.hpp"
#include "ampere2d/polar_calculus.hpp"
#include "ampere2d/source_field.hpp"

namespace ampere2d {

/// Fitted far-field expansion w ~ d log r + c (+ decay), with the residual
/// decay table and its log-log slope.
struct AsymptoticFit {
    double d_fit = 0;
    double c_fit = 0;
    double sigma_fit = 0;  // +inf when the model is exact to roundoff
    double r_lo = 0, r_hi = 0;
    std::vector<std::pair<double, double>> residual_table;  // (r, sup over theta)
    double max_residual = 0;
    double sigma_basis = 0;   // exponent of the de-biasing decay term, 0 if unused
    double decay_coeff = 0;   // its fitted coefficient
};

namespace detail {

struct FitSample {
    double r;        // sqrt(x'Ax)
    double w;        // u - quadratic - linear part
};

/// Weighted least squares of w against {log r, 1} plus an optional r^-sigma
/// column; returns SSE.
inline double fit3(const std::vector<FitSample>& s, double sigma, double& d, double& c,
                   double& k) {
    const bool use3 = sigma > 0;
    double M[3][3] = {{0}}, rhs[3] = {0};
    for (const auto& p : s) {
        double b[3] = {std::log(p.r), 1.0, use3 ? std::pow(p.r, -sigma) : 0.0};
        int nb = use3 ? 3 : 2;
        for (int i = 0; i < nb; ++i) {
            rhs[i] += b[i] * p.w;
            for (int j = 0; j < nb; ++j) M[i][j] += b[i] * b[j];
        }
    }
    const int n = use3 ? 3 : 2;
    // gaussian elimination with partial pivoting on the tiny normal system
    double A[3][4];
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) A[i][j] = M[i][j];
        A[i][n] = rhs[i];
    }
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int i = col + 1; i < n; ++i)
            if (std::abs(A[i][col]) > std::abs(A[piv][col])) piv = i;
        if (std::abs(A[piv][col]) < 1e-300) throw FitWindowError("singular normal equations");
        for (int j = 0; j <= n; ++j) std::swap(A[col][j], A[piv][j]);
        for (int i = 0; i < n; ++i) {
            if (i == col) continue;
            double f = A[i][col] / A[col][col];
            for (int j = col; j <= n; ++j) A[i][j] -= f * A[col][j];
        }
    }
    d = A[0][n] / A[0][0];
    c = A[1][n] / A[1][1];
    k = use3 ? A[2][n] / A[2][2] : 0.0;
    double sse = 0;
    for (const auto& p : s) {
        double model = d * std::log(p.r) + c + (use3 ? k * std::pow(p.r, -sigma) : 0.0);
        sse += sq(p.w - model);
    }
    return sse;
}

inline AsymptoticFit fit_samples(std::vector<FitSample> samples, double r_lo, double r_hi) {
    if (!(r_hi > r_lo) || r_hi / r_lo < 4.0)
        throw FitWindowError("fit window must span at least a factor of 4");
    AsymptoticFit fit;
    fit.r_lo = r_lo;
    fit.r_hi = r_hi;
    if (samples.size() < 12) throw FitWindowError("too few samples in the fit window");

    double d2, c2, kk;
    double sse2 = fit3(samples, 0.0, d2, c2, kk);
    fit.d_fit = d2;
    fit.c_fit = c2;

    // scan a decay exponent for the residual term; absorbing it removes the
    // O(r^-sigma) bias that the two-term fit folds into d and c
    double scale = 0;
    for (const auto& p : samples) scale += sq(p.w);
    if (sse2 > 1e-24 * std::max(1.0, scale)) {
        double best_sse = sse2, best_sigma = 0, best_d = d2, best_c = c2, best_k = 0;
        for (double sigma = 0.25; sigma <= 3.001; sigma += 0.05) {
            double d, c, k;
            double sse = fit3(samples, sigma, d, c, k);
            if (sse < best_sse) {
                best_sse = sse;
                best_sigma = sigma;
                best_d = d;
                best_c = c;
                best_k = k;
            }
        }
        if (best_sigma > 0 && best_sse < 0.99 * sse2) {
            fit.d_fit = best_d;
            fit.c_fit = best_c;
            fit.sigma_basis = best_sigma;
            fit.decay_coeff = best_k;
        }
    }

    // residual decay against the two-term model only
    std::vector<double> lx, ly;
    fit.residual_table.clear();
    // group samples per radius
    double cur_r = -1, cur_sup = 0;
    for (const auto& p : samples) {
        double resid = std::abs(p.w - fit.d_fit * std::log(p.r) - fit.c_fit);
        if (p.r != cur_r) {
            if (cur_r > 0) fit.residual_table.emplace_back(cur_r, cur_sup);
            cur_r = p.r;
            cur_sup = resid;
        } else {
            cur_sup = std::max(cur_sup, resid);
        }
    }
    if (cur_r > 0) fit.residual_table.emplace_back(cur_r, cur_sup);
    for (const auto& [r, v] : fit.residual_table) {
        fit.max_residual = std::max(fit.max_residual, v);
        if (v > 1e-13) {
            lx.push_back(std::log(r));
            ly.push_back(std::log(v));
        }
    }
    fit.sigma_fit = (lx.size() >= 3) ? -ls_slope(lx, ly)
                                     : std::numeric_limits<double>::infinity();
    return fit;
}

}  // namespace detail

/// Fit over an evaluator: samples u on ellipse rings sqrt(x'Ax) = r in the
/// window and fits u - x'Ax/2 - b.x against {log sqrt(x'Ax), 1}.
inline AsymptoticFit fit_expansion(const std::function<double(Vec2)>& u, const AffineData& aff,
                                   double r_lo, double r_hi, int n_radii = 48,
                                   int n_angles = 32) {
    std::vector<detail::FitSample> samples;
    for (int i = 0; i < n_radii; ++i) {
        double r = r_lo * std::pow(r_hi / r_lo, static_cast<double>(i) / (n_radii - 1));
        for (int j = 0; j < n_angles; ++j) {
            double t = 2.0 * std::numbers::pi * j / n_angles;
            Vec2 y{r * std::cos(t), r * std::sin(t)};
            Vec2 x = mat_vec(aff.inv_sqrtA, y);   // sqrt(x'Ax) = |y| = r
            double w = u(x) - 0.5 * r * r - dot(aff.b, x);
            samples.push_back({r, w});
        }
    }
    return detail::fit_samples(std::move(samples), r_lo, r_hi);
}

/// Fit over a grid field in normalized coordinates (v against |y|^2/2).
inline AsymptoticFit fit_expansion(const PolarField& v, double r_lo, double r_hi) {
    const auto& g = v.grid();
    std::vector<detail::FitSample> samples;
    for (int i = 0; i < g.n_r(); ++i) {
        double r = g.r[i];
        if (r < r_lo || r > r_hi) continue;
        for (int j = 0; j < g.n_theta; ++j)
            samples.push_back({r, v.at(i, j) - 0.5 * r * r});
    }
    return detail::fit_samples(std::move(samples), r_lo, r_hi);
}

/// Per-radius sup of |det(D^2 u) - f1| over the grid.
struct ResidualReport {
    std::vector<std::pair<double, double>> rows;
    double max_residual = 0;
    double tol = 0;
    bool ok = false;
};

inline ResidualReport residual_report(const PolarField& u, const SourceField& f1, double tol) {
    ResidualReport rep;
    rep.tol = tol;
    const auto& g = u.grid();
    PolarField det = det_hessian(cartesian_hessian(u));
    for (int i = 0; i < g.n_r(); ++i) {
        double sup = 0;
        for (int j = 0; j < g.n_theta; ++j) {
            Vec2 x{g.r[i] * g.cos_theta[j], g.r[i] * g.sin_theta[j]};
            sup = std::max(sup, std::abs(det.at(i, j) - f1.eval(x)));
        }
        rep.rows.emplace_back(g.r[i], sup);
        rep.max_residual = std::max(rep.max_residual, sup);
    }
    rep.ok = rep.max_residual <= tol;
    return rep;
}

inline void write_residual_csv(const ResidualReport& rep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot open " + path);
    out << "r,sup_residual\n";
    out.precision(17);
    for (const auto& [r, v] : rep.rows) out << r << ',' << v << '\n';
}

}  // namespace ampere2d
