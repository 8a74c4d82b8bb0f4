#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ampere2d/exterior.hpp"

using namespace ampere2d;

namespace {

// exact exterior radial solution for f = 1, r0 = 1, d = 1/2:
// u(r) = int_1^r sqrt(t^2+1) dt, vanishing on the unit circle
double radial_oracle(double r) {
    auto F = [](double t) { return 0.5 * (t * std::sqrt(t * t + 1.0) + std::asinh(t)); };
    return F(r) - F(1.0);
}

ExteriorSpec radial_spec() {
    ExteriorSpec spec;
    spec.r0 = 1.0;
    spec.boundary_data = [](double) { return 0.0; };
    spec.alpha = 0.5;
    spec.d_target = 0.5;
    return spec;
}

}  // namespace

TEST_CASE("kelvin coefficient identities") {
    auto identity = [](Vec2) { return SymMat2{1.0, 0.0, 1.0}; };

    SECTION("identity coefficients are invariant with zero drift") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (int k = 0; k < 1000; ++k) {
            Vec2 y{dist(rng), dist(rng)};
            auto [b, bk] = kelvin_coefficients(identity, y);
            CHECK(std::abs(b.xx - 1.0) < 1e-12);
            CHECK(std::abs(b.xy) < 1e-12);
            CHECK(std::abs(b.yy - 1.0) < 1e-12);
            CHECK(std::abs(bk.x) < 1e-12);
            CHECK(std::abs(bk.y) < 1e-12);
        }
    }

    SECTION("reflection fixes the axes on the x axis") {
        auto a = [](Vec2) { return SymMat2{1.1, 0.0, 1.0}; };
        auto [b, bk] = kelvin_coefficients(a, {0.5, 0.0});
        CHECK(b.xx == Catch::Approx(1.1).margin(1e-14));
        CHECK(b.yy == Catch::Approx(1.0).margin(1e-14));
        CHECK(b.xy == Catch::Approx(0.0).margin(1e-14));
    }

    SECTION("eigenvalues are congruent to the pre-image coefficients") {
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        auto a = [](Vec2 x) {
            double w = 0.2 / (1.0 + dot(x, x));
            return SymMat2{1.0 + w, 0.3 * w, 1.0 - 0.5 * w};
        };
        for (int k = 0; k < 1000; ++k) {
            Vec2 y{dist(rng), dist(rng)};
            if (y.norm() < 1e-3) continue;
            auto [b, bk] = kelvin_coefficients(a, y);
            Vec2 x{y.x / dot(y, y), y.y / dot(y, y)};
            SymMat2 ax = a(x);
            CHECK(b.eig_min() == Catch::Approx(ax.eig_min()).margin(1e-10));
            CHECK(b.eig_max() == Catch::Approx(ax.eig_max()).margin(1e-10));
        }
    }

    SECTION("harmonic pullback: cos(theta)/r maps to a harmonic function") {
        // w(x) = x1/|x|^2 pulls back to w(y/|y|^2) = y1; the transformed
        // operator must annihilate it up to discretization error
        auto disk = PolarGrid::make_disk(64, 64, 1.0);
        auto w = field_from_xy(disk, [](Vec2 y) { return y.x; });
        CoefficientField cf{PolarField(disk), PolarField(disk), PolarField(disk)};
        cf.b1 = PolarField(disk);
        cf.b2 = PolarField(disk);
        cf.has_drift = true;
        for (int i = 0; i < disk->n_r(); ++i)
            for (int j = 0; j < disk->n_theta; ++j) {
                Vec2 y{disk->r[i] * disk->cos_theta[j], disk->r[i] * disk->sin_theta[j]};
                auto [b, bk] = kelvin_coefficients(identity, y);
                cf.a11.at(i, j) = b.xx;
                cf.a12.at(i, j) = b.xy;
                cf.a22.at(i, j) = b.yy;
                cf.b1.at(i, j) = bk.x;
                cf.b2.at(i, j) = bk.y;
            }
        PolarField Lw = apply_operator(cf, w);
        CHECK(Lw.sup_abs() < 1e-9);
    }
}

TEST_CASE("source extension") {
    SECTION("unit source with zero mass target is untouched") {
        auto ext = extend_source(make_constant_source(), 1.0, 0.0);
        CHECK(ext.gamma == Catch::Approx(0.0).margin(1e-12));
        for (double r : {0.0, 0.5, 0.9, 2.0})
            CHECK(ext.f_ext.eval({r, 0.3}) == Catch::Approx(1.0).margin(1e-12));
    }

    SECTION("bump amplitude matches the closed form") {
        // int_0^1 t (1-t^2)^3 dt = 1/8, so gamma = d / (r0^2 / 8)
        auto ext = extend_source(make_constant_source(), 1.0, 0.3);
        CHECK(ext.gamma == Catch::Approx(2.4).margin(1e-9));
    }

    SECTION("different bump profiles both meet the mass constraint") {
        auto chi2 = [](double t) { return std::abs(t) < 1.0 ? std::pow(1.0 - t * t, 4.0) : 0.0; };
        auto e1 = extend_source(make_constant_source(), 1.0, 0.3);
        auto e2 = extend_source(make_constant_source(), 1.0, 0.3, chi2);
        for (const auto* e : {&e1, &e2}) {
            double mass = integrate(
                [&](double r) { return r * spherical_average_deviation(e->f_ext, r); }, 0.0, 1.0,
                1e-13);
            CHECK(mass == Catch::Approx(0.3).margin(1e-10));
        }
        CHECK(e2.gamma == Catch::Approx(3.0).margin(1e-9));  // int t(1-t^2)^4 dt = 1/10
    }

    SECTION("inadmissible targets are rejected") {
        CHECK_THROWS_AS(extend_source(make_constant_source(), 1.0, -0.51),
                        ExtensionInfeasibleError);
        // admissible by the theorem bound but below the positivity floor
        CHECK_THROWS_AS(extend_source(make_constant_source(), 1.0, -0.4),
                        ExtensionInfeasibleError);
    }

    SECTION("extension of a nonconstant source keeps its exterior values") {
        auto f = make_rational_source(0.1, 2.0);
        auto ext = extend_source(f, 1.0, 0.2);
        for (double r : {1.0, 1.5, 4.0})
            CHECK(ext.f_ext.eval({r, 0.0}) == Catch::Approx(f.eval({r, 0.0})).margin(1e-14));
        double mass_in = integrate(
            [&](double r) { return r * spherical_average_deviation(ext.f_ext, r); }, 0.0, 1.0,
            1e-13);
        CHECK(mass_in + ext.mass_outside == Catch::Approx(0.2).margin(1e-9));
    }
}

TEST_CASE("boundary normalization") {
    auto sol = solve_global(make_constant_source(), AffineData::identity(),
                            GridSpec{128, 64, 64.0}, [] {
                                GlobalSolveOptions o;
                                o.certify_truncation = false;
                                return o;
                            }());
    const double u_r0 = 0.5;  // v = r^2/2 at r0 = 1

    SECTION("constant offset is absorbed entirely") {
        ExteriorSpec spec;
        spec.r0 = 1.0;
        spec.boundary_data = [&](double) { return u_r0 + 5.0; };
        spec.alpha = 0.5;
        auto norm = normalize_boundary(sol, spec, 64);
        CHECK(norm.shift == Catch::Approx(5.0).margin(1e-9));
        CHECK(norm.eps_sup < 1e-9);
    }

    SECTION("zero-mean perturbation passes through") {
        ExteriorSpec spec;
        spec.r0 = 1.0;
        spec.boundary_data = [&](double t) { return u_r0 + 0.01 * std::cos(t); };
        spec.alpha = 0.5;
        auto norm = normalize_boundary(sol, spec, 64);
        CHECK(std::abs(norm.shift) < 1e-9);
        CHECK(norm.eps_sup == Catch::Approx(0.01).margin(1e-9));
        CHECK(norm.holder > 0.0);
    }
}

TEST_CASE("exterior radial problem against the quadrature oracle") {
    auto sol = solve_exterior(radial_spec(), make_constant_source(), GridSpec{256, 64, 64.0});
    CHECK(sol.converged);
    CHECK(sol.gamma == Catch::Approx(4.0).margin(1e-9));
    CHECK(sol.fit.d_fit == Catch::Approx(0.5).margin(1e-3));
    CHECK(sol.boundary_error < 1e-6);
    double err = 0;
    for (int i = 0; i < sol.grid->n_r(); ++i) {
        double r = sol.grid->r[i];
        if (r > 32.0) break;
        for (int j = 0; j < sol.grid->n_theta; j += 5)
            err = std::max(err, std::abs(sol.u.at(i, j) - radial_oracle(r)));
    }
    CHECK(err < 1e-4);
}

TEST_CASE("exterior problem with matching quadratic data is trivial") {
    // f = 1, boundary phi = r0^2/2, d = 0: the paraboloid solves it with h = 0
    ExteriorSpec spec;
    spec.r0 = 1.0;
    spec.boundary_data = [](double) { return 0.5; };
    spec.alpha = 0.5;
    spec.d_target = 0.0;
    auto sol = solve_exterior(spec, make_constant_source(), GridSpec{192, 64, 64.0});
    CHECK(sol.gamma == Catch::Approx(0.0).margin(1e-10));
    CHECK(sol.h.sup_abs() < 1e-9);
    double err = 0;
    for (int i = 0; i < sol.grid->n_r(); ++i)
        for (int j = 0; j < sol.grid->n_theta; j += 7)
            err = std::max(err, std::abs(sol.u.at(i, j) - 0.5 * sq(sol.grid->r[i])));
    CHECK(err < 1e-8);
    CHECK(std::abs(sol.fit.d_fit) < 1e-8);
}

TEST_CASE("uniqueness holds across extension profiles") {
    auto chi2 = [](double t) { return std::abs(t) < 1.0 ? std::pow(1.0 - t * t, 4.0) : 0.0; };
    ExteriorSolveOptions o2;
    o2.bump = chi2;
    auto s1 = solve_exterior(radial_spec(), make_constant_source(), GridSpec{192, 64, 64.0});
    auto s2 = solve_exterior(radial_spec(), make_constant_source(), GridSpec{192, 64, 64.0}, o2);
    double diff = 0;
    for (int i = 0; i < s1.grid->n_r(); ++i) {
        if (s1.grid->r[i] > 32.0) break;
        for (int j = 0; j < s1.grid->n_theta; ++j)
            diff = std::max(diff, std::abs(s1.u.at(i, j) - s2.u.at(i, j)));
    }
    CHECK(diff < 1e-4);
}

TEST_CASE("perturbed boundary data") {
    ExteriorSpec spec = radial_spec();
    spec.boundary_data = [](double t) { return 0.01 * std::cos(t); };
    auto sol = solve_exterior(spec, make_constant_source(), GridSpec{192, 64, 64.0});
    CHECK(sol.converged);
    CHECK(sol.boundary_error < 1e-6);
    // the solution differs from the radial one by the order of the data
    auto rad = solve_exterior(radial_spec(), make_constant_source(), GridSpec{192, 64, 64.0});
    double diff = 0;
    for (int i = 0; i < sol.grid->n_r(); ++i)
        for (int j = 0; j < sol.grid->n_theta; j += 3)
            diff = std::max(diff, std::abs(sol.u.at(i, j) - rad.u.at(i, j)));
    CHECK(diff < 0.05);
    CHECK(diff > 1e-4);
    // psi0 decay metrics are finite and the cascade contracted geometrically
    for (double v : sol.psi0_decay) CHECK(std::isfinite(v));
    for (std::size_t k = 2; k < sol.cascade_history.size(); ++k)
        CHECK(sol.cascade_history[k].weighted_sup <=
              0.5 * sol.cascade_history[k - 1].weighted_sup);
    // decay metrics are stable under grid refinement (same domain)
    auto fine = solve_exterior(spec, make_constant_source(), GridSpec{256, 64, 64.0});
    for (int m = 0; m < 3; ++m)
        CHECK(std::abs(sol.psi0_decay[m] - fine.psi0_decay[m]) <=
              0.15 * std::max(sol.psi0_decay[m], fine.psi0_decay[m]));
}

TEST_CASE("rough boundary data beyond the smallness gate is rejected") {
    ExteriorSpec spec = radial_spec();
    spec.boundary_data = [](double t) { return 2.0 * std::sqrt(std::abs(std::sin(t))); };
    CHECK_THROWS_AS(solve_exterior(spec, make_constant_source(), GridSpec{128, 64, 64.0}),
                    InvalidSourceError);
}
