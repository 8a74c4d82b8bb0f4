#pragma once

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ampere2d/errors.hpp"

namespace ampere2d {

/// Fornberg finite-difference weights: fills w[k][j] with the weight of node
/// x[j] in the order-k derivative at z, for k = 0..max_order. x must hold
/// n distinct nodes; w must have (max_order+1) rows of n entries.
inline void fornberg_weights(double z, const double* x, int n, int max_order,
                             std::vector<std::vector<double>>& w) {
    w.assign(max_order + 1, std::vector<double>(n, 0.0));
    double c1 = 1.0, c4 = x[0] - z;
    w[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        int mn = std::min(i, max_order);
        double c2 = 1.0, c5 = c4;
        c4 = x[i] - z;
        for (int j = 0; j < i; ++j) {
            double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    w[k][i] = c1 * (k * w[k - 1][i - 1] - c5 * w[k][i - 1]) / c2;
                w[0][i] = -c1 * c5 * w[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k)
                w[k][j] = (c4 * w[k][j] - k * w[k - 1][j]) / c3;
            w[0][j] = c4 * w[0][j] / c3;
        }
        c1 = c2;
    }
}

/// General banded matrix in LAPACK gbsv layout (column major, extra kl rows
/// for fill-in). Entries outside the band are silently dropped on write of
/// exact zeros and rejected otherwise.
class BandedMatrix {
  public:
    BandedMatrix(int n, int kl, int ku)
        : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1), ab_(static_cast<std::size_t>(ldab_) * n, 0.0) {}

    void add(int i, int j, double v) {
        if (i - j > kl_ || j - i > ku_) {
            if (v != 0.0) throw SolverError("banded matrix entry outside band");
            return;
        }
        ab_[static_cast<std::size_t>(j) * ldab_ + (kl_ + ku_ + i - j)] += v;
    }

    /// Scales row i (all stored entries) by s.
    void scale_row(int i, double s) {
        int jlo = std::max(0, i - kl_), jhi = std::min(n_ - 1, i + ku_);
        for (int j = jlo; j <= jhi; ++j)
            ab_[static_cast<std::size_t>(j) * ldab_ + (kl_ + ku_ + i - j)] *= s;
    }

    double row_max(int i) const {
        double m = 0.0;
        int jlo = std::max(0, i - kl_), jhi = std::min(n_ - 1, i + ku_);
        for (int j = jlo; j <= jhi; ++j)
            m = std::max(m, std::abs(ab_[static_cast<std::size_t>(j) * ldab_ + (kl_ + ku_ + i - j)]));
        return m;
    }

    /// In-place solve A X = B for nrhs right-hand sides stored column major
    /// in b (n * nrhs). Throws IllPosedModeError on singular factorization.
    void solve(std::vector<double>& b, int nrhs, int mode_for_error = -1) {
        std::vector<lapack_int> ipiv(n_);
        std::vector<double> ab = ab_;  // gbsv overwrites the matrix
        lapack_int info = LAPACKE_dgbsv(LAPACK_COL_MAJOR, n_, kl_, ku_, nrhs,
                                        ab.data(), ldab_, ipiv.data(), b.data(), n_);
        if (info != 0)
            throw IllPosedModeError(mode_for_error,
                                    "banded factorization failed, info=" + std::to_string(info));
    }

    int size() const { return n_; }

  private:
    int n_, kl_, ku_, ldab_;
    std::vector<double> ab_;
};

}  // namespace ampere2d
