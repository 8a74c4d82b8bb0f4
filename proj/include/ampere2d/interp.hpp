#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ampere2d/errors.hpp"
#include "ampere2d/fd_weights.hpp"

namespace ampere2d {

/// Not-a-knot cubic spline on strictly increasing nodes. Evaluation outside
/// the node range continues the end cubics.
class CubicSpline {
  public:
    CubicSpline() = default;

    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        const int n = static_cast<int>(x_.size());
        if (n < 4) throw SolverError("cubic spline needs at least 4 nodes");
        m_.assign(n, 0.0);
        BandedMatrix A(n, 2, 2);
        std::vector<double> rhs(n, 0.0);
        auto h = [&](int i) { return x_[i + 1] - x_[i]; };
        // not-a-knot: d3 continuity at x_1 and x_{n-2}
        A.add(0, 0, 1.0 / h(0));
        A.add(0, 1, -1.0 / h(0) - 1.0 / h(1));
        A.add(0, 2, 1.0 / h(1));
        A.add(n - 1, n - 3, 1.0 / h(n - 3));
        A.add(n - 1, n - 2, -1.0 / h(n - 3) - 1.0 / h(n - 2));
        A.add(n - 1, n - 1, 1.0 / h(n - 2));
        for (int i = 1; i < n - 1; ++i) {
            A.add(i, i - 1, h(i - 1));
            A.add(i, i, 2.0 * (h(i - 1) + h(i)));
            A.add(i, i + 1, h(i));
            rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h(i) - (y_[i] - y_[i - 1]) / h(i - 1));
        }
        A.solve(rhs, 1);
        m_ = std::move(rhs);
    }

    double operator()(double x) const {
        const int n = static_cast<int>(x_.size());
        int i = static_cast<int>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
        i = std::clamp(i, 0, n - 2);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
        return a * y_[i] + b * y_[i + 1] +
               ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
    }

    double derivative(double x) const {
        const int n = static_cast<int>(x_.size());
        int i = static_cast<int>(std::upper_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
        i = std::clamp(i, 0, n - 2);
        const double h = x_[i + 1] - x_[i];
        const double a = (x_[i + 1] - x) / h, b = (x - x_[i]) / h;
        return (y_[i + 1] - y_[i]) / h +
               ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
    }

    bool valid() const { return !x_.empty(); }
    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }

  private:
    std::vector<double> x_, y_, m_;
};

/// Polynomial extrapolation of samples (s_i, y_i) to s = 0 (Richardson).
inline double extrapolate_to_zero(const std::vector<double>& s, const std::vector<double>& y) {
    std::vector<std::vector<double>> w;
    fornberg_weights(0.0, s.data(), static_cast<int>(s.size()), 0, w);
    double v = 0;
    for (std::size_t i = 0; i < s.size(); ++i) v += w[0][i] * y[i];
    return v;
}

/// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-30) throw SolverError("degenerate slope fit");
    return (n * sxy - sx * sy) / denom;
}

}  // namespace ampere2d
