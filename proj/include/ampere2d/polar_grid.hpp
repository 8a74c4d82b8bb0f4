#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "ampere2d/errors.hpp"
#include "ampere2d/fd_weights.hpp"
#include "ampere2d/fourier.hpp"
#include "ampere2d/util.hpp"

namespace ampere2d {

enum class GridKind : std::uint32_t { global = 0, exterior = 1, disk = 2 };

namespace detail {

inline std::vector<double> graded_radii(double r_start, double r_max, int n_r) {
    if (n_r < 8) throw SolverError("polar grid needs at least 8 radial nodes");
    const double len = r_max - r_start;
    const double uni_len = std::min(1.0, 0.5 * len);
    std::vector<double> r(n_r);
    if (len <= 2.0) {
        for (int i = 0; i < n_r; ++i) r[i] = r_start + len * i / (n_r - 1);
        return r;
    }
    // uniform spacing h0 on [r_start, r_start+uni_len], geometric beyond
    const int n_uni = std::max(4, (n_r - 1) / 4);
    const int n_geo = n_r - 1 - n_uni;
    const double h0 = uni_len / n_uni;
    const double tail = len - uni_len;
    auto geo_sum = [&](double q) {
        double s = 0, h = h0;
        for (int j = 0; j < n_geo; ++j) {
            h *= q;
            s += h;
        }
        return s;
    };
    double qlo = 1.0, qhi = 2.0;
    if (geo_sum(1.0 + 1e-12) >= tail) {
        // domain short enough that a uniform tail is already finer than h0
        for (int i = 0; i <= n_uni; ++i) r[i] = r_start + h0 * i;
        const double ht = tail / n_geo;
        for (int j = 1; j <= n_geo; ++j) r[n_uni + j] = r_start + uni_len + ht * j;
        return r;
    }
    while (geo_sum(qhi) < tail) qhi += 1.0;
    for (int it = 0; it < 200; ++it) {
        double qm = 0.5 * (qlo + qhi);
        (geo_sum(qm) < tail ? qlo : qhi) = qm;
    }
    const double q = 0.5 * (qlo + qhi);
    for (int i = 0; i <= n_uni; ++i) r[i] = r_start + h0 * i;
    double h = h0;
    for (int j = 1; j <= n_geo; ++j) {
        h *= q;
        r[n_uni + j] = r[n_uni + j - 1] + h;
    }
    r[n_r - 1] = r_max;  // kill bisection residue
    return r;
}

inline AngularTransform& ring_transform(int n) {
    static std::mutex m;
    static std::map<int, std::unique_ptr<AngularTransform>> cache;
    std::lock_guard<std::mutex> lock(m);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<AngularTransform>(n);
    return *slot;
}

}  // namespace detail

/// Polar discretization: graded radii (uniform near the inner end, geometric
/// ratio beyond) and a power-of-two uniform angular grid. `global` and `disk`
/// grids start at r = 0 and use parity reflection through the origin for
/// radial stencils; `exterior` grids are annuli with one-sided stencils at
/// both edges. The far-field size rule R_max >= 32 max(1, r0) applies to the
/// unbounded-problem kinds only; `disk` covers bounded solves (Kelvin image
/// domains, cross-validation patches).
class PolarGrid {
  public:
    // up to 6 nodes: centered 5-point stencils in the interior, one-sided
    // 6-point stencils at domain edges so second derivatives stay 4th order
    struct Stencil {
        int n;
        int idx[6];
        double w1[6], w2[6];
        bool mirror[6];
    };

    static std::shared_ptr<const PolarGrid> make_global(int n_r, int n_theta, double r_max) {
        return build(GridKind::global, detail::graded_radii(0.0, r_max, n_r), n_theta);
    }
    static std::shared_ptr<const PolarGrid> make_exterior(int n_r, int n_theta, double r0,
                                                          double r_max) {
        if (r0 <= 0) throw SolverError("exterior grid needs r0 > 0");
        return build(GridKind::exterior, detail::graded_radii(r0, r_max, n_r), n_theta);
    }
    static std::shared_ptr<const PolarGrid> make_disk(int n_r, int n_theta, double r_max) {
        return build(GridKind::disk, detail::graded_radii(0.0, r_max, n_r), n_theta);
    }
    static std::shared_ptr<const PolarGrid> from_radii(GridKind kind, std::vector<double> radii,
                                                       int n_theta) {
        return build(kind, std::move(radii), n_theta);
    }

    GridKind kind;
    std::vector<double> r;
    int n_theta = 0;
    std::vector<double> theta, cos_theta, sin_theta;
    std::vector<Stencil> stencil;      // radial derivative stencils per node
    std::vector<double> radial_weight; // trapezoid weights in r

    int n_r() const { return static_cast<int>(r.size()); }
    double r_inner() const { return r.front(); }
    double r_max() const { return r.back(); }
    bool contains_origin() const { return kind != GridKind::exterior; }

    /// Quadrature weight of node (i, j) for integrals f r dr dtheta.
    double quad_weight(int i) const {
        return r[i] * radial_weight[i] * (2.0 * std::numbers::pi / n_theta);
    }

  private:
    static std::shared_ptr<const PolarGrid> build(GridKind kind, std::vector<double> radii,
                                                  int n_theta) {
        auto g = std::make_shared<PolarGrid>();
        g->kind = kind;
        g->r = std::move(radii);
        g->n_theta = n_theta;
        const int n = g->n_r();
        if (n_theta < 32 || (n_theta & (n_theta - 1)) != 0)
            throw SolverError("n_theta must be a power of two >= 32");
        for (int i = 1; i < n; ++i)
            if (!(g->r[i] > g->r[i - 1])) throw SolverError("radii must be strictly increasing");
        if (kind != GridKind::exterior && g->r.front() != 0.0)
            throw SolverError("global/disk grids must start at r = 0");
        const double r0 = g->r.front();
        if (kind != GridKind::disk && g->r.back() < 32.0 * std::max(1.0, r0) - 1e-12)
            throw SolverError("R_max must be at least 32 max(1, r0)");

        g->theta.resize(n_theta);
        g->cos_theta.resize(n_theta);
        g->sin_theta.resize(n_theta);
        for (int j = 0; j < n_theta; ++j) {
            g->theta[j] = 2.0 * std::numbers::pi * j / n_theta;
            g->cos_theta[j] = std::cos(g->theta[j]);
            g->sin_theta[j] = std::sin(g->theta[j]);
        }

        g->stencil.resize(n);
        const bool origin = g->contains_origin();
        std::vector<std::vector<double>> w;
        for (int i = 0; i < n; ++i) {
            Stencil st{};
            double x[6];
            if (origin && i <= 1) {
                // centered stencil continued through the origin by reflection
                st.n = 5;
                int raw[5] = {i - 2, i - 1, i, i + 1, i + 2};
                for (int k = 0; k < 5; ++k) {
                    st.mirror[k] = raw[k] < 0;
                    st.idx[k] = st.mirror[k] ? -raw[k] : raw[k];
                    x[k] = st.mirror[k] ? -g->r[st.idx[k]] : g->r[st.idx[k]];
                }
            } else {
                const bool clipped = (i - 2 < 0 && !origin) || (i + 2 > n - 1);
                st.n = clipped ? 6 : 5;
                int lo = std::clamp(i - 2, 0, n - st.n);
                for (int k = 0; k < st.n; ++k) {
                    st.idx[k] = lo + k;
                    st.mirror[k] = false;
                    x[k] = g->r[st.idx[k]];
                }
            }
            fornberg_weights(g->r[i], x, st.n, 2, w);
            for (int k = 0; k < st.n; ++k) {
                st.w1[k] = w[1][k];
                st.w2[k] = w[2][k];
            }
            g->stencil[i] = st;
        }

        g->radial_weight.resize(n);
        for (int i = 0; i < n; ++i) {
            double lo = (i == 0) ? g->r[0] : 0.5 * (g->r[i - 1] + g->r[i]);
            double hi = (i == n - 1) ? g->r[n - 1] : 0.5 * (g->r[i] + g->r[i + 1]);
            g->radial_weight[i] = hi - lo;
        }
        return g;
    }
};

/// Scalar field sampled on a polar grid, row-major (radius-major) storage.
class PolarField {
  public:
    PolarField() = default;
    explicit PolarField(std::shared_ptr<const PolarGrid> grid, double fill = 0.0)
        : grid_(std::move(grid)),
          v_(static_cast<std::size_t>(grid_->n_r()) * grid_->n_theta, fill) {}

    double& at(int i, int j) { return v_[static_cast<std::size_t>(i) * grid_->n_theta + j]; }
    double at(int i, int j) const { return v_[static_cast<std::size_t>(i) * grid_->n_theta + j]; }
    double* row(int i) { return v_.data() + static_cast<std::size_t>(i) * grid_->n_theta; }
    const double* row(int i) const {
        return v_.data() + static_cast<std::size_t>(i) * grid_->n_theta;
    }

    const PolarGrid& grid() const { return *grid_; }
    std::shared_ptr<const PolarGrid> grid_ptr() const { return grid_; }
    int n_r() const { return grid_->n_r(); }
    int n_theta() const { return grid_->n_theta; }
    std::vector<double>& data() { return v_; }
    const std::vector<double>& data() const { return v_; }
    bool empty() const { return v_.empty(); }

    double sup_abs() const {
        double m = 0;
        for (double x : v_) m = std::max(m, std::abs(x));
        return m;
    }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    /// Max over the r = 0 ring of the deviation from its mean (single-valued
    /// origin check for solution fields on origin-containing grids).
    double origin_variation() const {
        if (!grid_->contains_origin()) return 0.0;
        double mean = 0;
        for (int j = 0; j < n_theta(); ++j) mean += at(0, j);
        mean /= n_theta();
        double dev = 0;
        for (int j = 0; j < n_theta(); ++j) dev = std::max(dev, std::abs(at(0, j) - mean));
        return dev;
    }

    PolarField& operator+=(const PolarField& o) {
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] += o.v_[k];
        return *this;
    }
    PolarField& operator-=(const PolarField& o) {
        for (std::size_t k = 0; k < v_.size(); ++k) v_[k] -= o.v_[k];
        return *this;
    }
    PolarField& operator*=(double s) {
        for (double& x : v_) x *= s;
        return *this;
    }
    PolarField& operator+=(double c) {
        for (double& x : v_) x += c;
        return *this;
    }

    friend PolarField operator+(PolarField a, const PolarField& b) { return a += b; }
    friend PolarField operator-(PolarField a, const PolarField& b) { return a -= b; }
    friend PolarField operator*(double s, PolarField a) { return a *= s; }

  private:
    std::shared_ptr<const PolarGrid> grid_;
    std::vector<double> v_;
};

inline PolarField field_from_polar(std::shared_ptr<const PolarGrid> grid,
                                   const std::function<double(double, double)>& f) {
    PolarField out(grid);
    const auto& g = *grid;
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta; ++j) out.at(i, j) = f(g.r[i], g.theta[j]);
    // keep the origin ring single-valued
    if (g.contains_origin()) {
        double v0 = f(0.0, 0.0);
        for (int j = 0; j < g.n_theta; ++j) out.at(0, j) = v0;
    }
    return out;
}

inline PolarField field_from_xy(std::shared_ptr<const PolarGrid> grid,
                                const std::function<double(Vec2)>& f) {
    PolarField out(grid);
    const auto& g = *grid;
    for (int i = 0; i < g.n_r(); ++i)
        for (int j = 0; j < g.n_theta; ++j)
            out.at(i, j) = f({g.r[i] * g.cos_theta[j], g.r[i] * g.sin_theta[j]});
    return out;
}

inline double weighted_sup(const PolarField& u, double tau) {
    const auto& g = u.grid();
    double m = 0;
    for (int i = 0; i < g.n_r(); ++i) {
        double w = std::pow(1.0 + g.r[i], tau);
        for (int j = 0; j < g.n_theta; ++j) m = std::max(m, w * std::abs(u.at(i, j)));
    }
    return m;
}

/// Angular Fourier coefficients per radius: c(i, m) for m = 0..n_theta/2 with
/// the convention u(i, theta) = Re(sum_m c(i, m) e^{i m theta}).
class ModeStack {
  public:
    ModeStack() = default;
    explicit ModeStack(std::shared_ptr<const PolarGrid> grid)
        : grid_(std::move(grid)),
          n_modes_(grid_->n_theta / 2 + 1),
          c_(static_cast<std::size_t>(grid_->n_r()) * n_modes_) {}

    std::complex<double>& at(int i, int m) {
        return c_[static_cast<std::size_t>(i) * n_modes_ + m];
    }
    std::complex<double> at(int i, int m) const {
        return c_[static_cast<std::size_t>(i) * n_modes_ + m];
    }
    std::complex<double>* row(int i) { return c_.data() + static_cast<std::size_t>(i) * n_modes_; }
    const std::complex<double>* row(int i) const {
        return c_.data() + static_cast<std::size_t>(i) * n_modes_;
    }

    int n_modes() const { return n_modes_; }
    int n_r() const { return grid_->n_r(); }
    const PolarGrid& grid() const { return *grid_; }
    std::shared_ptr<const PolarGrid> grid_ptr() const { return grid_; }

    std::vector<std::complex<double>> mode(int m) const {
        std::vector<std::complex<double>> out(n_r());
        for (int i = 0; i < n_r(); ++i) out[i] = at(i, m);
        return out;
    }
    void set_mode(int m, const std::vector<std::complex<double>>& g) {
        for (int i = 0; i < n_r(); ++i) at(i, m) = g[i];
    }

  private:
    std::shared_ptr<const PolarGrid> grid_;
    int n_modes_ = 0;
    std::vector<std::complex<double>> c_;
};

inline ModeStack mode_decompose(const PolarField& u) {
    ModeStack s(u.grid_ptr());
    auto& tr = detail::ring_transform(u.n_theta());
    for (int i = 0; i < u.n_r(); ++i) tr.forward(u.row(i), s.row(i));
    return s;
}

inline PolarField mode_recompose(const ModeStack& s) {
    PolarField u(s.grid_ptr());
    auto& tr = detail::ring_transform(s.grid().n_theta);
    for (int i = 0; i < s.n_r(); ++i) tr.inverse(s.row(i), u.row(i));
    return u;
}

// ---------------------------------------------------------------------------
// field serialization: CSV (r, theta, value) and a binary dump with a 32-byte
// header followed by the radii array and the row-major values.

inline void write_field_csv(const PolarField& u, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw SolverError("cannot open " + path);
    out << "r,theta,value\n";
    out.precision(17);
    for (int i = 0; i < u.n_r(); ++i)
        for (int j = 0; j < u.n_theta(); ++j)
            out << u.grid().r[i] << ',' << u.grid().theta[j] << ',' << u.at(i, j) << '\n';
}

inline constexpr char kFieldMagic[8] = {'A', 'M', 'P', '2', 'D', 'F', 'L', 'D'};

inline void write_field_binary(const PolarField& u, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SolverError("cannot open " + path);
    char header[32] = {};
    std::memcpy(header, kFieldMagic, 8);
    std::uint32_t nr = static_cast<std::uint32_t>(u.n_r());
    std::uint32_t nt = static_cast<std::uint32_t>(u.n_theta());
    std::uint32_t kind = static_cast<std::uint32_t>(u.grid().kind);
    std::memcpy(header + 8, &nr, 4);
    std::memcpy(header + 12, &nt, 4);
    std::memcpy(header + 16, &kind, 4);
    out.write(header, 32);
    out.write(reinterpret_cast<const char*>(u.grid().r.data()),
              static_cast<std::streamsize>(sizeof(double) * u.n_r()));
    out.write(reinterpret_cast<const char*>(u.data().data()),
              static_cast<std::streamsize>(sizeof(double) * u.data().size()));
    if (!out) throw SolverError("short write to " + path);
}

inline PolarField read_field_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SolverError("cannot open " + path);
    char header[32];
    in.read(header, 32);
    if (!in || std::memcmp(header, kFieldMagic, 8) != 0)
        throw SolverError("bad field dump header in " + path);
    std::uint32_t nr, nt, kind;
    std::memcpy(&nr, header + 8, 4);
    std::memcpy(&nt, header + 12, 4);
    std::memcpy(&kind, header + 16, 4);
    std::vector<double> radii(nr);
    in.read(reinterpret_cast<char*>(radii.data()), static_cast<std::streamsize>(8 * nr));
    auto grid = PolarGrid::from_radii(static_cast<GridKind>(kind), std::move(radii),
                                      static_cast<int>(nt));
    PolarField u(grid);
    in.read(reinterpret_cast<char*>(u.data().data()),
            static_cast<std::streamsize>(8 * u.data().size()));
    if (!in) throw SolverError("truncated field dump " + path);
    return u;
}

}  // namespace ampere2d
