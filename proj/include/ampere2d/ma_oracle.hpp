#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "ampere2d/errors.hpp"
#include "ampere2d/source_field.hpp"

namespace ampere2d {

/// Wide-stencil monotone discretization of det(D^2 u) on a disk-masked
/// uniform Cartesian grid. Directions are coprime lattice vectors grouped
/// into orthogonal pairs; the operator is
///   min over pairs (v, w) of [ (D_v u)^+ (D_w u)^+ + (D_v u)^- + (D_w u)^- ]
/// which is nondecreasing in every neighbor value.
struct StencilScheme {
    int width = 2;      // 1, 2 or 3
    int n = 129;        // nodes per side
    double radius = 2.0;

    std::vector<std::pair<Vec2, Vec2>> direction_pairs() const {
        std::vector<std::pair<Vec2, Vec2>> pairs = {{{1, 0}, {0, 1}}, {{1, 1}, {-1, 1}}};
        if (width >= 2) {
            pairs.push_back({{2, 1}, {-1, 2}});
            pairs.push_back({{1, 2}, {-2, 1}});
        }
        if (width >= 3) {
            pairs.push_back({{3, 1}, {-1, 3}});
            pairs.push_back({{1, 3}, {-3, 1}});
            pairs.push_back({{3, 2}, {-2, 3}});
            pairs.push_back({{2, 3}, {-3, 2}});
        }
        return pairs;
    }
};

struct OracleField {
    int n = 0;
    double h = 0, radius = 0;
    std::vector<double> u;           // n*n row-major, meaningful on the mask
    std::vector<unsigned char> mask; // 1 = interior unknown
    int newton_iters = 0;
    int gs_sweeps = 0;
    double residual = 0;

    double x_of(int i) const { return -radius + i * h; }
    double value(int i, int j) const { return u[static_cast<std::size_t>(j) * n + i]; }
    bool inside(int i, int j) const { return mask[static_cast<std::size_t>(j) * n + i] != 0; }
};

namespace detail {

struct Arm {
    int idx = -1;      // interior neighbor index into the unknown vector
    double rho = 0;    // arm length
    double bval = 0;   // boundary value when idx < 0
};

struct NodeStencil {
    int self = -1;
    // one entry per direction pair: arms v+, v-, w+, w-
    std::vector<std::array<Arm, 4>> pairs;
};

}  // namespace detail

/// Monotone wide-stencil solve of det(D^2 u) = f on the disk with Dirichlet
/// data on the circle: damped Newton on the min-form operator with a
/// nonlinear Gauss-Seidel fallback.
class MongeAmpereOracle {
  public:
    MongeAmpereOracle(const SourceField& f, std::function<double(double)> boundary_data,
                      const StencilScheme& scheme)
        : scheme_(scheme), boundary_(std::move(boundary_data)) {
        build(f);
    }

    OracleField solve(double tol = 1e-10, int newton_cap = 60) {
        const int m = static_cast<int>(unknown_.size());
        Eigen::VectorXd u = init_guess();
        Eigen::VectorXd F(m);
        assemble_residual(u, F);
        double res = F.lpNorm<Eigen::Infinity>();
        int newton_iters = 0, sweeps = 0, stagnations = 0;
        while (res > tol && newton_iters < newton_cap) {
            Eigen::SparseMatrix<double> J(m, m);
            assemble_jacobian(u, J);
            Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(J);
            if (lu.info() != Eigen::Success)
                throw SolverError("oracle newton factorization failed");
            Eigen::VectorXd delta = lu.solve(-F);
            double lambda = 1.0;
            Eigen::VectorXd u_new, F_new(m);
            double res_new = res;
            while (lambda > 1e-3) {
                u_new = u + lambda * delta;
                assemble_residual(u_new, F_new);
                res_new = F_new.lpNorm<Eigen::Infinity>();
                if (res_new < (1.0 - 0.25 * lambda) * res) break;
                lambda *= 0.5;
            }
            ++newton_iters;
            if (res_new < (1.0 - 0.25 * lambda) * res) {
                u = u_new;
                F = F_new;
                res = res_new;
                stagnations = 0;
            } else {
                // Newton stalled: relax with nonlinear sweeps, then retry
                ++stagnations;
                for (int s = 0; s < 25; ++s) gauss_seidel_sweep(u);
                sweeps += 25;
                assemble_residual(u, F);
                res = F.lpNorm<Eigen::Infinity>();
                if (stagnations > 8 || sweeps > 4000)
                    throw SolverError("oracle failed to converge, residual " +
                                      std::to_string(res));
            }
        }
        if (res > tol) throw SolverError("oracle iteration cap reached, residual " +
                                         std::to_string(res));
        OracleField out;
        out.n = scheme_.n;
        out.h = h_;
        out.radius = scheme_.radius;
        out.mask = mask_;
        out.u.assign(static_cast<std::size_t>(scheme_.n) * scheme_.n,
                     std::numeric_limits<double>::quiet_NaN());
        for (int k = 0; k < m; ++k) out.u[unknown_[k]] = u[k];
        // fill the boundary ring values for plotting and comparison
        for (int j = 0; j < scheme_.n; ++j)
            for (int i = 0; i < scheme_.n; ++i) {
                std::size_t q = static_cast<std::size_t>(j) * scheme_.n + i;
                if (!mask_[q]) {
                    double x = -scheme_.radius + i * h_, y = -scheme_.radius + j * h_;
                    double r = std::hypot(x, y);
                    if (r <= scheme_.radius + h_)
                        out.u[q] = boundary_(std::atan2(y, x));
                }
            }
        out.newton_iters = newton_iters;
        out.gs_sweeps = sweeps;
        out.residual = res;
        return out;
    }

    /// Discrete operator value at one interior node given the field; used by
    /// the monotonicity property check.
    double operator_value(const Eigen::VectorXd& u, int k) const {
        return node_residual(u, k) + frhs_[k];
    }
    int n_unknowns() const { return static_cast<int>(unknown_.size()); }

  private:
    StencilScheme scheme_;
    std::function<double(double)> boundary_;
    double h_ = 0;
    std::vector<unsigned char> mask_;
    std::vector<int> unknown_;          // grid index of each unknown
    std::vector<int> grid_to_unknown_;  // -1 outside
    std::vector<detail::NodeStencil> stencils_;
    std::vector<double> frhs_;
    std::vector<double> sqrtf_;

    void build(const SourceField& f) {
        const int n = scheme_.n;
        const double R = scheme_.radius;
        h_ = 2.0 * R / (n - 1);
        mask_.assign(static_cast<std::size_t>(n) * n, 0);
        grid_to_unknown_.assign(static_cast<std::size_t>(n) * n, -1);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                double x = -R + i * h_, y = -R + j * h_;
                if (x * x + y * y < R * R - 1e-12) {
                    std::size_t q = static_cast<std::size_t>(j) * n + i;
                    mask_[q] = 1;
                    grid_to_unknown_[q] = static_cast<int>(unknown_.size());
                    unknown_.push_back(static_cast<int>(q));
                }
            }
        auto pairs = scheme_.direction_pairs();
        stencils_.resize(unknown_.size());
        frhs_.resize(unknown_.size());
        sqrtf_.resize(unknown_.size());
        for (std::size_t k = 0; k < unknown_.size(); ++k) {
            int q = unknown_[k];
            int i = q % n, j = q / n;
            double x = -R + i * h_, y = -R + j * h_;
            frhs_[k] = f.eval({x, y});
            sqrtf_[k] = std::sqrt(std::max(0.0, frhs_[k]));
            detail::NodeStencil st;
            st.self = static_cast<int>(k);
            for (const auto& [v, w] : pairs) {
                std::array<detail::Arm, 4> arms;
                Vec2 dirs[4] = {v, {-v.x, -v.y}, w, {-w.x, -w.y}};
                for (int a = 0; a < 4; ++a) {
                    Vec2 d = dirs[a];
                    int ii = i + static_cast<int>(d.x), jj = j + static_cast<int>(d.y);
                    double len = std::hypot(d.x, d.y) * h_;
                    detail::Arm arm;
                    bool in = ii >= 0 && ii < n && jj >= 0 && jj < n &&
                              mask_[static_cast<std::size_t>(jj) * n + ii];
                    if (in) {
                        arm.idx = grid_to_unknown_[static_cast<std::size_t>(jj) * n + ii];
                        arm.rho = len;
                    } else {
                        // clip the arm at the circle and read the boundary data
                        double dx = d.x * h_, dy = d.y * h_;
                        double A = dx * dx + dy * dy;
                        double B = 2.0 * (x * dx + y * dy);
                        double C = x * x + y * y - R * R;
                        double disc = std::max(0.0, B * B - 4.0 * A * C);
                        double t = (-B + std::sqrt(disc)) / (2.0 * A);
                        t = std::clamp(t, 1e-6, 1.0);
                        arm.idx = -1;
                        arm.rho = t * len;
                        double bx = x + t * dx, by = y + t * dy;
                        arm.bval = boundary_(std::atan2(by, bx));
                    }
                    arms[a] = arm;
                }
                st.pairs.push_back(arms);
            }
            stencils_[k] = st;
        }
    }

    double arm_value(const Eigen::VectorXd& u, const detail::Arm& a) const {
        return a.idx >= 0 ? u[a.idx] : a.bval;
    }

    /// second difference along one direction (two arms), Shortley-Weller form
    double second_diff(const Eigen::VectorXd& u, double u0, const detail::Arm& p,
                       const detail::Arm& m) const {
        double up = arm_value(u, p), um = arm_value(u, m);
        return 2.0 / (p.rho + m.rho) * ((up - u0) / p.rho + (um - u0) / m.rho);
    }

    double node_residual(const Eigen::VectorXd& u, int k) const {
        const auto& st = stencils_[k];
        double u0 = u[k];
        double best = 1e300;
        for (const auto& arms : st.pairs) {
            double dv = second_diff(u, u0, arms[0], arms[1]);
            double dw = second_diff(u, u0, arms[2], arms[3]);
            double val = std::max(dv, 0.0) * std::max(dw, 0.0) + std::min(dv, 0.0) +
                         std::min(dw, 0.0);
            best = std::min(best, val);
        }
        return best - frhs_[k];
    }

    void assemble_residual(const Eigen::VectorXd& u, Eigen::VectorXd& F) const {
        for (int k = 0; k < static_cast<int>(unknown_.size()); ++k)
            F[k] = node_residual(u, k);
    }

    void assemble_jacobian(const Eigen::VectorXd& u, Eigen::SparseMatrix<double>& J) const {
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(unknown_.size() * 10);
        for (int k = 0; k < static_cast<int>(unknown_.size()); ++k) {
            const auto& st = stencils_[k];
            double u0 = u[k];
            // active pair
            double best = 1e300;
            int active = 0;
            for (int p = 0; p < static_cast<int>(st.pairs.size()); ++p) {
                const auto& arms = st.pairs[p];
                double dv = second_diff(u, u0, arms[0], arms[1]);
                double dw = second_diff(u, u0, arms[2], arms[3]);
                double val = std::max(dv, 0.0) * std::max(dw, 0.0) + std::min(dv, 0.0) +
                             std::min(dw, 0.0);
                if (val < best) {
                    best = val;
                    active = p;
                }
            }
            const auto& arms = st.pairs[active];
            double dv = second_diff(u, u0, arms[0], arms[1]);
            double dw = second_diff(u, u0, arms[2], arms[3]);
            // dF/d(dv), dF/d(dw) on the active branch
            double gv = (dv > 0.0) ? std::max(dw, 0.0) : 1.0;
            double gw = (dw > 0.0) ? std::max(dv, 0.0) : 1.0;
            auto add_dir = [&](const detail::Arm& p_arm, const detail::Arm& m_arm, double gd) {
                double c = 2.0 / (p_arm.rho + m_arm.rho);
                double wp = c / p_arm.rho, wm = c / m_arm.rho;
                if (p_arm.idx >= 0) trip.emplace_back(k, p_arm.idx, gd * wp);
                if (m_arm.idx >= 0) trip.emplace_back(k, m_arm.idx, gd * wm);
                trip.emplace_back(k, k, -gd * (wp + wm));
            };
            add_dir(arms[0], arms[1], gv);
            add_dir(arms[2], arms[3], gw);
        }
        J.setFromTriplets(trip.begin(), trip.end());
    }

    /// pointwise solve of the active-pair equation for u0, neighbors frozen
    void gauss_seidel_sweep(Eigen::VectorXd& u) const {
        for (int k = 0; k < static_cast<int>(unknown_.size()); ++k) {
            const auto& st = stencils_[k];
            double best_u0 = -1e300;
            bool found = false;
            double beta_sum = 0;
            for (const auto& arms : st.pairs) {
                // D_v = alpha_v - beta_v u0
                auto lin = [&](const detail::Arm& p, const detail::Arm& m, double& alpha,
                               double& beta) {
                    double c = 2.0 / (p.rho + m.rho);
                    alpha = c * (arm_value(u, p) / p.rho + arm_value(u, m) / m.rho);
                    beta = c * (1.0 / p.rho + 1.0 / m.rho);
                };
                double av, bv, aw, bw;
                lin(arms[0], arms[1], av, bv);
                lin(arms[2], arms[3], aw, bw);
                beta_sum += bv + bw;
                // both-positive branch: (av - bv u)(aw - bw u) = f
                double A = bv * bw;
                double B = av * bw + aw * bv;
                double C = av * aw - frhs_[st.self];
                double disc = B * B - 4.0 * A * C;
                if (disc >= 0.0) {
                    double root = (B - std::sqrt(disc)) / (2.0 * A);
                    if (av - bv * root >= -1e-14 && aw - bw * root >= -1e-14) {
                        // smallest admissible candidate over pairs solves the min-form
                        if (!found || root < best_u0) best_u0 = root;
                        found = true;
                    }
                }
            }
            if (found) {
                u[k] = best_u0;
            } else {
                // relaxation step when no quadratic branch admits a root
                Eigen::VectorXd& uu = u;
                double r = node_residual(uu, k);
                u[k] += r / std::max(beta_sum, 1e-12);
            }
        }
    }

    Eigen::VectorXd init_guess() {
        // Poisson warm start: laplace u = 2 sqrt(f), five-point Shortley-Weller
        const int m = static_cast<int>(unknown_.size());
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd rhs(m);
        for (int k = 0; k < m; ++k) {
            const auto& arms0 = stencils_[k].pairs[0];  // axis pair (1,0), (0,1)
            rhs[k] = 2.0 * sqrtf_[k];
            auto add_dir = [&](const detail::Arm& p, const detail::Arm& q) {
                double c = 2.0 / (p.rho + q.rho);
                double wp = c / p.rho, wq = c / q.rho;
                trip.emplace_back(k, k, -(wp + wq));
                if (p.idx >= 0)
                    trip.emplace_back(k, p.idx, wp);
                else
                    rhs[k] -= wp * p.bval;
                if (q.idx >= 0)
                    trip.emplace_back(k, q.idx, wq);
                else
                    rhs[k] -= wq * q.bval;
            };
            add_dir(arms0[0], arms0[1]);
            add_dir(arms0[2], arms0[3]);
        }
        Eigen::SparseMatrix<double> A(m, m);
        A.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
        if (lu.info() != Eigen::Success) throw SolverError("oracle warm start failed");
        return lu.solve(rhs);
    }
};

inline OracleField oracle_solve_disk(const SourceField& f,
                                     const std::function<double(double)>& boundary_data,
                                     const StencilScheme& scheme, double tol = 1e-10) {
    MongeAmpereOracle solver(f, boundary_data, scheme);
    return solver.solve(tol);
}

/// Interpolates a pipeline solution to the oracle nodes and reports sup and
/// per-ring differences.
struct CompareReport {
    double sup_diff = 0;
    std::vector<std::pair<double, double>> ring_table;  // (r, sup on ring band)
};

inline CompareReport compare(const std::function<double(Vec2)>& pipeline,
                             const OracleField& oracle) {
    CompareReport rep;
    const int n = oracle.n;
    const int n_rings = n / 2;
    std::vector<double> ring_sup(n_rings, 0.0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            if (!oracle.inside(i, j)) continue;
            Vec2 x{oracle.x_of(i), oracle.x_of(j)};
            double d = std::abs(pipeline(x) - oracle.value(i, j));
            rep.sup_diff = std::max(rep.sup_diff, d);
            int ring = std::min(n_rings - 1,
                                static_cast<int>(x.norm() / oracle.radius * n_rings));
            ring_sup[ring] = std::max(ring_sup[ring], d);
        }
    for (int k = 0; k < n_rings; ++k)
        rep.ring_table.emplace_back((k + 0.5) * oracle.radius / n_rings, ring_sup[k]);
    return rep;
}

}  // namespace ampere2d
