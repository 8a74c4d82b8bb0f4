#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "ampere2d/util.hpp"

namespace ampere2d {

/// Image of the operator a_ij d_ij under the inversion y = x/|x|^2:
///   b_kl(y) = (d_ki - 2 y_k y_i/|y|^2) a_ij(y/|y|^2) (d_lj - 2 y_l y_j/|y|^2)
/// plus the first-order coefficients
///   b_k(y) = a_ij(y/|y|^2) (2 d_ki y_l - 2 d_kl y_i - 2 y_k d_il)/|y|^2
///            (d_lj - 2 y_l y_j/|y|^2).
/// The reflection is orthogonal, so b is the congruent image of a and shares
/// its eigenvalues; a = identity gives b = identity and b_k = 0.
inline std::pair<SymMat2, Vec2> kelvin_coefficients(const std::function<SymMat2(Vec2)>& a,
                                                    Vec2 y) {
    const double rho2 = dot(y, y);
    if (rho2 < 1e-28) return {SymMat2{1.0, 0.0, 1.0}, Vec2{0.0, 0.0}};
    const Vec2 x{y.x / rho2, y.y / rho2};
    const SymMat2 ax = a(x);
    const double amat[2][2] = {{ax.xx, ax.xy}, {ax.xy, ax.yy}};
    const double yv[2] = {y.x, y.y};

    // M = I - 2 y y^T / |y|^2
    double M[2][2];
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            M[k][i] = (k == i ? 1.0 : 0.0) - 2.0 * yv[k] * yv[i] / rho2;

    double b[2][2] = {{0, 0}, {0, 0}};
    for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) b[k][l] += M[k][i] * amat[i][j] * M[l][j];

    double bk[2] = {0, 0};
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int l = 0; l < 2; ++l) {
                    double T = (2.0 * (k == i ? yv[l] : 0.0) - 2.0 * (k == l ? yv[i] : 0.0) -
                                2.0 * yv[k] * (i == l ? 1.0 : 0.0)) /
                               rho2;
                    double P = (l == j ? 1.0 : 0.0) - 2.0 * yv[l] * yv[j] / rho2;
                    bk[k] += amat[i][j] * T * P;
                }

    return {SymMat2{b[0][0], b[0][1], b[1][1]}, Vec2{bk[0], bk[1]}};
}

/// Coefficients of the inverted-domain problem on the punctured disk
/// B_{1/r0}; bounded solutions continue through the puncture.
struct KelvinCoefficients {
    std::function<SymMat2(Vec2)> a;
    double r0 = 1.0;

    SymMat2 b_matrix(Vec2 y) const { return kelvin_coefficients(a, y).first; }
    Vec2 b_vector(Vec2 y) const { return kelvin_coefficients(a, y).second; }
    double disk_radius() const { return 1.0 / r0; }
};

}  // namespace ampere2d
