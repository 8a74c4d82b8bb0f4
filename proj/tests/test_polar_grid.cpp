#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <random>

#include "ampere2d/polar_calculus.hpp"
#include "ampere2d/polar_grid.hpp"

using namespace ampere2d;

TEST_CASE("grid construction invariants") {
    auto g = PolarGrid::make_global(128, 64, 64.0);
    REQUIRE(g->n_r() == 128);
    CHECK(g->r.front() == 0.0);
    CHECK(g->r.back() == Catch::Approx(64.0));
    for (int i = 1; i < g->n_r(); ++i) CHECK(g->r[i] > g->r[i - 1]);
    // uniform region then geometric growth
    double h0 = g->r[1] - g->r[0];
    CHECK(g->r[2] - g->r[1] == Catch::Approx(h0).margin(1e-14));
    CHECK(g->r[g->n_r() - 1] - g->r[g->n_r() - 2] > h0);

    CHECK_THROWS_AS(PolarGrid::make_global(128, 48, 64.0), SolverError);  // not a power of two
    CHECK_THROWS_AS(PolarGrid::make_global(128, 64, 8.0), SolverError);   // too small for far field
    CHECK_THROWS_AS(PolarGrid::make_exterior(128, 64, 2.0, 40.0), SolverError);
    CHECK_NOTHROW(PolarGrid::make_disk(64, 64, 1.0));
}

TEST_CASE("mode decomposition basics") {
    auto g = PolarGrid::make_disk(32, 64, 2.0);

    SECTION("constant field has only mode zero") {
        PolarField u(g, 1.0);
        ModeStack s = mode_decompose(u);
        for (int i = 0; i < s.n_r(); ++i) {
            CHECK(s.at(i, 0).real() == Catch::Approx(1.0).margin(1e-14));
            for (int m = 1; m < s.n_modes(); ++m) CHECK(std::abs(s.at(i, m)) < 1e-14);
        }
    }

    SECTION("pure cos(3 theta) lands in mode 3") {
        auto u = field_from_polar(g, [](double, double t) { return std::cos(3.0 * t); });
        ModeStack s = mode_decompose(u);
        for (int i = 1; i < s.n_r(); ++i)
            for (int m = 0; m < s.n_modes(); ++m) {
                double expect = (m == 3) ? 1.0 : 0.0;
                CHECK(std::abs(s.at(i, m) - expect) < 1e-13);
            }
    }

    SECTION("decompose then recompose is the identity") {
        std::mt19937 rng(1234);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        PolarField u(g);
        for (int i = 0; i < u.n_r(); ++i)
            for (int j = 0; j < u.n_theta(); ++j) u.at(i, j) = dist(rng);
        PolarField v = mode_recompose(mode_decompose(u));
        double err = 0;
        for (int i = 0; i < u.n_r(); ++i)
            for (int j = 0; j < u.n_theta(); ++j)
                err = std::max(err, std::abs(u.at(i, j) - v.at(i, j)));
        CHECK(err < 1e-12);
    }
}

TEST_CASE("cartesian hessian on reference fields") {
    SECTION("r^2/2 has identity Hessian and unit determinant") {
        auto g = PolarGrid::make_global(96, 64, 64.0);
        auto u = field_from_polar(g, [](double r, double) { return 0.5 * r * r; });
        HessianField H = cartesian_hessian(u);
        for (int i = 0; i < g->n_r(); ++i)
            for (int j = 0; j < g->n_theta; j += 7) {
                CHECK(H.u11.at(i, j) == Catch::Approx(1.0).margin(1e-9));
                CHECK(H.u22.at(i, j) == Catch::Approx(1.0).margin(1e-9));
                CHECK(H.u12.at(i, j) == Catch::Approx(0.0).margin(1e-9));
            }
        PolarField det = det_hessian(H);
        CHECK(det.sup_abs() == Catch::Approx(1.0).margin(1e-9));
    }

    SECTION("x1 x2 has zero diagonal and unit mixed derivative") {
        auto g = PolarGrid::make_disk(48, 64, 2.0);
        auto u = field_from_xy(g, [](Vec2 p) { return p.x * p.y; });
        HessianField H = cartesian_hessian(u);
        for (int i = 0; i < g->n_r(); ++i)
            for (int j = 0; j < g->n_theta; j += 5) {
                CHECK(H.u11.at(i, j) == Catch::Approx(0.0).margin(1e-10));
                CHECK(H.u22.at(i, j) == Catch::Approx(0.0).margin(1e-10));
                CHECK(H.u12.at(i, j) == Catch::Approx(1.0).margin(1e-10));
            }
    }

    SECTION("rank-one Hessian has zero determinant") {
        auto g = PolarGrid::make_disk(48, 64, 2.0);
        auto u = field_from_xy(g, [](Vec2 p) { return 0.5 * p.x * p.x; });
        PolarField det = det_hessian(cartesian_hessian(u));
        CHECK(det.sup_abs() < 1e-10);
    }

    SECTION("exterior grid: det of r^2/2 + d log r") {
        const double d = 0.5;
        auto g = PolarGrid::make_exterior(256, 64, 1.0, 64.0);
        auto u = field_from_polar(g, [=](double r, double) { return 0.5 * r * r + d * std::log(r); });
        PolarField det = det_hessian(cartesian_hessian(u));
        double err = 0, err_interior = 0;
        for (int i = 0; i < g->n_r(); ++i) {
            double expect = 1.0 - d * d / std::pow(g->r[i], 4);
            for (int j = 0; j < g->n_theta; ++j) {
                double e = std::abs(det.at(i, j) - expect);
                err = std::max(err, e);
                if (i >= 2 && i < g->n_r() - 2) err_interior = std::max(err_interior, e);
            }
        }
        CHECK(err < 1e-5);
        CHECK(err_interior < 1e-7);
        HessianField H = cartesian_hessian(u);
        CHECK(H.one_sided_inner);
    }
}

TEST_CASE("gradient on reference fields") {
    auto g = PolarGrid::make_disk(48, 64, 2.0);
    auto u = field_from_xy(g, [](Vec2 p) { return 2.0 * p.x - 3.0 * p.y + p.x * p.y; });
    GradientField grad = cartesian_gradient(u);
    for (int i = 0; i < g->n_r(); ++i)
        for (int j = 0; j < g->n_theta; j += 5) {
            double x = g->r[i] * g->cos_theta[j], y = g->r[i] * g->sin_theta[j];
            CHECK(grad.gx.at(i, j) == Catch::Approx(2.0 + y).margin(1e-10));
            CHECK(grad.gy.at(i, j) == Catch::Approx(-3.0 + x).margin(1e-10));
        }
    CHECK(grad.gx.origin_variation() < 1e-12);
}

TEST_CASE("divergence form of the Hessian determinant") {
    auto g = PolarGrid::make_disk(64, 64, 2.0);
    auto u = field_from_xy(g, [](Vec2 p) {
        return 0.5 * (p.x * p.x + p.y * p.y) + 0.05 * std::exp(-(p.x * p.x) - 2.0 * p.y * p.y);
    });
    HessianField H = cartesian_hessian(u);
    GradientField grad = cartesian_gradient(u);
    PolarField det = det_hessian(H);
    FluxPair fp = det_flux(grad, H);
    PolarField div = divergence(fp.f1, fp.f2);
    // interior agreement (edges carry one-sided noise)
    double err = 0;
    for (int i = 1; i < g->n_r() - 4; ++i)
        for (int j = 0; j < g->n_theta; ++j)
            err = std::max(err, std::abs(div.at(i, j) - det.at(i, j)));
    CHECK(err < 5e-6);
}

TEST_CASE("differentiation order of the polar Hessian") {
    // Polynomial radial content is differentiated exactly by the five-point
    // stencils; the pinned field only checks the exact regime.
    auto err_poly = [](int nr) {
        auto g = PolarGrid::make_global(nr, 64, 64.0);
        auto u = field_from_polar(g, [](double r, double t) {
            return 0.5 * r * r + r * r * r * std::cos(3.0 * t) / 100.0;
        });
        HessianField H = cartesian_hessian(u);
        double err = 0;
        for (int i = 0; i < g->n_r(); ++i)
            for (int j = 0; j < g->n_theta; ++j) {
                double r = g->r[i], t = g->theta[j], c = g->cos_theta[j], s = g->sin_theta[j];
                double urr = 1.0 + 6.0 * r * std::cos(3.0 * t) / 100.0;
                double W = 1.0 + (3.0 * r - 9.0 * r) * std::cos(3.0 * t) / 100.0;
                double V = (-9.0 * r + 3.0 * r) * std::sin(3.0 * t) / 100.0;
                double e11 = c * c * urr - 2 * s * c * V + s * s * W;
                err = std::max(err, std::abs(H.u11.at(i, j) - e11));
            }
        return err;
    };
    CHECK(err_poly(96) < 1e-10);
    CHECK(err_poly(192) < 1e-10);

    // measured order on a non-polynomial radial profile
    auto err_smooth = [](int nr) {
        auto g = PolarGrid::make_global(nr, 64, 64.0);
        auto u = field_from_polar(g, [](double r, double t) {
            return 0.5 * r * r + std::cos(2.0 * t) * r * r / ((1.0 + r * r) * (1.0 + r * r));
        });
        HessianField H = cartesian_hessian(u);
        double err = 0;
        for (int i = 0; i < g->n_r(); ++i)
            for (int j = 0; j < g->n_theta; ++j) {
                double r = g->r[i], t = g->theta[j], c = g->cos_theta[j], s = g->sin_theta[j];
                double q = 1.0 + r * r;
                double f = r * r / (q * q);
                double fr = 2.0 * r * (1.0 - r * r) / (q * q * q);
                double frr = 2.0 * std::pow(q, -2.0) - 20.0 * r * r * std::pow(q, -3.0) +
                             24.0 * std::pow(r, 4) * std::pow(q, -4.0);
                double urr = 1.0 + std::cos(2 * t) * frr;
                double W = 1.0 + std::cos(2 * t) * fr / r - 4.0 * std::cos(2 * t) * f / (r * r);
                double V = -2.0 * std::sin(2 * t) * (fr / r - f / (r * r));
                double e11 = c * c * urr - 2 * s * c * V + s * s * W;
                err = std::max(err, std::abs(H.u11.at(i, j) - e11));
            }
        return err;
    };
    double e1 = err_smooth(64), e2 = err_smooth(128);
    double order = std::log2(e1 / e2);
    CHECK(order >= 3.5);
}

TEST_CASE("rotational equivariance of the Hessian") {
    auto g = PolarGrid::make_disk(40, 64, 2.0);
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double a[6];
    for (double& c : a) c = dist(rng);
    auto eval = [&](double r, double t) {
        double x = r * std::cos(t), y = r * std::sin(t);
        return a[0] + a[1] * x + a[2] * y + a[3] * x * x + a[4] * x * y +
               a[5] * (x * x * y + y * y * y);
    };
    auto u = field_from_polar(g, eval);
    const double dt = 2.0 * std::numbers::pi / g->n_theta;
    // rotate samples by one angular step
    PolarField ur(g);
    for (int i = 0; i < g->n_r(); ++i)
        for (int j = 0; j < g->n_theta; ++j)
            ur.at(i, j) = u.at(i, (j - 1 + g->n_theta) % g->n_theta);
    HessianField H = cartesian_hessian(u);
    HessianField Hr = cartesian_hessian(ur);
    double c = std::cos(dt), s = std::sin(dt);
    double err = 0;
    for (int i = 0; i < g->n_r(); ++i)
        for (int j = 0; j < g->n_theta; ++j) {
            int jp = (j - 1 + g->n_theta) % g->n_theta;
            // R H R^T with R = [[c, -s], [s, c]]
            double h11 = H.u11.at(i, jp), h12 = H.u12.at(i, jp), h22 = H.u22.at(i, jp);
            double e11 = c * c * h11 - 2 * s * c * h12 + s * s * h22;
            double e12 = s * c * (h11 - h22) + (c * c - s * s) * h12;
            double e22 = s * s * h11 + 2 * s * c * h12 + c * c * h22;
            err = std::max({err, std::abs(Hr.u11.at(i, j) - e11),
                            std::abs(Hr.u12.at(i, j) - e12), std::abs(Hr.u22.at(i, j) - e22)});
        }
    CHECK(err < 1e-10);
}

TEST_CASE("binary field dump round trip") {
    auto g = PolarGrid::make_exterior(64, 64, 0.5, 32.0);
    auto u = field_from_polar(g, [](double r, double t) { return std::sin(r) * std::cos(2 * t); });
    std::string path = "field_dump_test.bin";
    write_field_binary(u, path);
    PolarField v = read_field_binary(path);
    REQUIRE(v.n_r() == u.n_r());
    REQUIRE(v.grid().kind == GridKind::exterior);
    double err = 0;
    for (int i = 0; i < u.n_r(); ++i) {
        CHECK(v.grid().r[i] == u.grid().r[i]);
        for (int j = 0; j < u.n_theta(); ++j)
            err = std::max(err, std::abs(u.at(i, j) - v.at(i, j)));
    }
    CHECK(err == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("interpolant reproduces smooth fields off the nodes") {
    auto g = PolarGrid::make_disk(96, 64, 2.0);
    auto f = [](double r, double t) {
        return std::exp(-r * r) * (1.0 + 0.3 * r * r * std::cos(2 * t));
    };
    PolarInterpolant itp(field_from_polar(g, f));
    double err = 0;
    for (double r : {0.013, 0.52, 1.337, 1.99})
        for (double t : {0.1, 2.0, 4.5})
            err = std::max(err, std::abs(itp(r, t) - f(r, t)));
    CHECK(err < 2e-7);
}
